#include "medtag/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "medtag/tokenization.hpp"

namespace medtag {

std::vector<ConllSequence> read_conll(std::istream& in, std::vector<int>* start_lines) {
  std::vector<ConllSequence> seqs;
  ConllSequence cur;
  int cur_start = 0;
  std::string line;
  int line_no = 0;
  auto flush = [&] {
    if (!cur.tokens.empty()) {
      seqs.push_back(std::move(cur));
      if (start_lines) start_lines->push_back(cur_start);
      cur = ConllSequence{};
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw std::runtime_error("conll: expected token<TAB>tag at line " + std::to_string(line_no));
    }
    if (cur.tokens.empty()) cur_start = line_no;
    cur.tokens.push_back(line.substr(0, tab));
    cur.tags.push_back(line.substr(tab + 1));
    if (cur.tokens.back().empty() || cur.tags.back().empty()) {
      throw std::runtime_error("conll: empty token or tag at line " + std::to_string(line_no));
    }
  }
  flush();
  return seqs;
}

std::vector<ConllSequence> read_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_conll(in);
}

void write_conll(std::ostream& out, const std::vector<ConllSequence>& seqs) {
  for (const auto& s : seqs) {
    if (s.tokens.size() != s.tags.size()) {
      throw std::invalid_argument("conll: " + std::to_string(s.tokens.size()) + " tokens vs " +
                                  std::to_string(s.tags.size()) + " tags");
    }
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << '\t' << s.tags[i] << '\n';
    }
    out << '\n';
  }
}

void write_conll_file(const std::string& path, const std::vector<ConllSequence>& seqs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_conll(out, seqs);
}

std::vector<EntitySpan> decode_entities(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> out;
  bool open = false;
  EntitySpan cur;
  auto close = [&](int end) {
    if (open) {
      cur.end = end;
      out.push_back(cur);
      open = false;
    }
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O" || tag == kPaddingTag) {
      close(i);
    } else if (tag.rfind("B-", 0) == 0) {
      close(i);
      cur = {i, i, tag.substr(2)};
      open = true;
    } else if (tag.rfind("I-", 0) == 0) {
      std::string type = tag.substr(2);
      if (!open || cur.type != type) {
        close(i);
        cur = {i, i, type};
        open = true;
      }
    } else {
      throw std::invalid_argument("decode_entities: bad tag '" + tag + "' at position " +
                                  std::to_string(i));
    }
  }
  close(static_cast<int>(tags.size()));
  return out;
}

namespace {

void check_aligned(const std::vector<std::vector<std::string>>& gold,
                   const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("scoring: " + std::to_string(gold.size()) + " gold sequences vs " +
                                std::to_string(pred.size()) + " predicted");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw std::invalid_argument("scoring: sequence " + std::to_string(i) + " has " +
                                  std::to_string(gold[i].size()) + " gold tags vs " +
                                  std::to_string(pred[i].size()) + " predicted");
    }
  }
}

struct MatchedPair {
  int cat;      // 1 = span match, 2 = label match, 3 = neither
  int overlap;  // tokens shared
  EntitySpan gold;
  EntitySpan pred;
  int gi;
  int pi;
};

}  // namespace

Scores strict_score(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& pred) {
  check_aligned(gold, pred);
  Scores s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = decode_entities(gold[i]);
    auto p = decode_entities(pred[i]);
    std::vector<bool> pred_used(p.size(), false);
    for (const auto& ge : g) {
      bool hit = false;
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (!pred_used[k] && p[k] == ge) {
          pred_used[k] = true;
          hit = true;
          break;
        }
      }
      if (hit) {
        ++s.overall.tp;
        ++s.per_type[ge.type].tp;
      } else {
        ++s.overall.fn;
        ++s.per_type[ge.type].fn;
      }
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!pred_used[k]) {
        ++s.overall.fp;
        ++s.per_type[p[k].type].fp;
      }
    }
  }
  return s;
}

ErrorBreakdown classify_errors(const std::vector<std::vector<std::string>>& gold,
                               const std::vector<std::vector<std::string>>& pred) {
  check_aligned(gold, pred);
  ErrorBreakdown e;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = decode_entities(gold[i]);
    auto p = decode_entities(pred[i]);
    std::vector<bool> g_used(g.size(), false);
    std::vector<bool> p_used(p.size(), false);

    // Exact matches first; they are correct, not errors.
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      for (std::size_t pi = 0; pi < p.size(); ++pi) {
        if (!p_used[pi] && g[gi] == p[pi]) {
          g_used[gi] = true;
          p_used[pi] = true;
          break;
        }
      }
    }

    std::vector<MatchedPair> cands;
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      if (g_used[gi]) continue;
      for (std::size_t pi = 0; pi < p.size(); ++pi) {
        if (p_used[pi] || !g[gi].overlaps(p[pi])) continue;
        int cat;
        if (g[gi].same_span(p[pi])) {
          cat = 1;
        } else if (g[gi].type == p[pi].type) {
          cat = 2;
        } else {
          cat = 3;
        }
        int ov = std::min(g[gi].end, p[pi].end) - std::max(g[gi].start, p[pi].start);
        cands.push_back({cat, ov, g[gi], p[pi], static_cast<int>(gi), static_cast<int>(pi)});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const MatchedPair& a, const MatchedPair& b) {
      if (a.cat != b.cat) return a.cat < b.cat;
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      if (a.gold.start != b.gold.start) return a.gold.start < b.gold.start;
      if (a.pred.start != b.pred.start) return a.pred.start < b.pred.start;
      if (a.gold.end != b.gold.end) return a.gold.end < b.gold.end;
      if (a.pred.end != b.pred.end) return a.pred.end < b.pred.end;
      if (a.gold.type != b.gold.type) return a.gold.type < b.gold.type;
      return a.pred.type < b.pred.type;
    });
    for (const auto& c : cands) {
      if (g_used[c.gi] || p_used[c.pi]) continue;
      g_used[c.gi] = true;
      p_used[c.pi] = true;
      if (c.cat == 1) {
        ++e.right_span_wrong_label;
      } else if (c.cat == 2) {
        ++e.right_label_overlapping_span;
      } else {
        ++e.wrong_label_overlapping_span;
      }
    }
    for (std::size_t pi = 0; pi < p.size(); ++pi) {
      if (!p_used[pi]) ++e.complete_false_positive;
    }
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      if (!g_used[gi]) ++e.complete_false_negative;
    }
  }
  return e;
}

ModelComparison compare_models(const std::vector<std::vector<std::string>>& gold,
                               const std::vector<std::vector<std::string>>& pred_first,
                               const std::vector<std::vector<std::string>>& pred_second) {
  ModelComparison c;
  c.first = strict_score(gold, pred_first);
  c.second = strict_score(gold, pred_second);
  c.first_errors = classify_errors(gold, pred_first);
  c.second_errors = classify_errors(gold, pred_second);
  std::set<std::string> types;
  for (const auto& [t, _] : c.first.per_type) types.insert(t);
  for (const auto& [t, _] : c.second.per_type) types.insert(t);
  for (const auto& t : types) {
    auto a = c.first.per_type.find(t);
    auto b = c.second.per_type.find(t);
    double fa = a == c.first.per_type.end() ? 0.0 : a->second.f1();
    double fb = b == c.second.per_type.end() ? 0.0 : b->second.f1();
    c.f1_delta[t] = fb - fa;
  }
  return c;
}

namespace {

nlohmann::json counts_json(const TagCounts& c) {
  return {{"tp", c.tp},        {"fp", c.fp},          {"fn", c.fn},
          {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
}

}  // namespace

nlohmann::json to_json(const Scores& s) {
  nlohmann::json j = counts_json(s.overall);
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [t, c] : s.per_type) per[t] = counts_json(c);
  j["per_type"] = per;
  return j;
}

nlohmann::json to_json(const ErrorBreakdown& e) {
  return {{"right_span_wrong_label", e.right_span_wrong_label},
          {"right_label_overlapping_span", e.right_label_overlapping_span},
          {"wrong_label_overlapping_span", e.wrong_label_overlapping_span},
          {"complete_false_positive", e.complete_false_positive},
          {"complete_false_negative", e.complete_false_negative},
          {"total", e.total()}};
}

nlohmann::json to_json(const ModelComparison& c) {
  return {{"first", to_json(c.first)},
          {"second", to_json(c.second)},
          {"first_errors", to_json(c.first_errors)},
          {"second_errors", to_json(c.second_errors)},
          {"f1_delta", c.f1_delta}};
}

namespace {

void score_row(std::ostream& out, const std::string& name, const TagCounts& c, std::size_t width) {
  out << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::fixed
      << std::setprecision(4) << std::setw(10) << c.precision() << std::setw(10) << c.recall()
      << std::setw(10) << c.f1() << std::setw(8) << c.tp << std::setw(8) << c.fp << std::setw(8)
      << c.fn << '\n';
}

}  // namespace

std::string render_scores(const Scores& s) {
  std::size_t width = 8;
  for (const auto& [t, _] : s.per_type) width = std::max(width, t.size() + 2);
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "type" << std::right << std::setw(10)
      << "prec" << std::setw(10) << "rec" << std::setw(10) << "f1" << std::setw(8) << "tp"
      << std::setw(8) << "fp" << std::setw(8) << "fn" << '\n';
  score_row(out, "ALL", s.overall, width);
  for (const auto& [t, c] : s.per_type) score_row(out, t, c, width);
  return out.str();
}

std::string render_errors(const ErrorBreakdown& e) {
  std::ostringstream out;
  out << "right span, wrong label:        " << e.right_span_wrong_label << '\n'
      << "right label, overlapping span:  " << e.right_label_overlapping_span << '\n'
      << "wrong label, overlapping span:  " << e.wrong_label_overlapping_span << '\n'
      << "complete false positive:        " << e.complete_false_positive << '\n'
      << "complete false negative:        " << e.complete_false_negative << '\n'
      << "total errors:                   " << e.total() << '\n';
  return out.str();
}

std::string render_comparison(const ModelComparison& c) {
  std::ostringstream out;
  out << "== first ==\n"
      << render_scores(c.first) << render_errors(c.first_errors) << "\n== second ==\n"
      << render_scores(c.second) << render_errors(c.second_errors) << "\n== f1 delta (second - first) ==\n";
  for (const auto& [t, d] : c.f1_delta) {
    out << std::left << std::setw(24) << t << std::right << std::showpos << std::fixed
        << std::setprecision(4) << d << std::noshowpos << '\n';
  }
  return out.str();
}

}  // namespace medtag
