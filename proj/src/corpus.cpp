#include "medtag/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace medtag {

namespace {

[[noreturn]] void fail_at(const std::string& what, int line_no) {
  throw std::runtime_error(what + " at line " + std::to_string(line_no));
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

int parse_int(const std::string& s, const std::string& what, int line_no) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail_at("pubtator: bad " + what + " '" + s + "'", line_no);
  }
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fold_for_compare(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

void sort_mentions(Document& doc) {
  std::sort(doc.mentions.begin(), doc.mentions.end(), [](const Mention& a, const Mention& b) {
    if (a.start_char != b.start_char) return a.start_char < b.start_char;
    return a.end_char < b.end_char;
  });
}

std::string span_str(const Mention& m) {
  return "[" + std::to_string(m.start_char) + "," + std::to_string(m.end_char) + ") '" + m.surface + "'";
}

}  // namespace

LabelScheme LabelScheme::from_types(std::vector<std::string> types) {
  types.push_back(kUnknownType);
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  for (const auto& t : types) {
    if (t.empty()) throw std::invalid_argument("label scheme: empty type name");
  }
  LabelScheme s;
  s.types = std::move(types);
  return s;
}

LabelScheme LabelScheme::from_corpus(const std::vector<Document>& docs) {
  std::set<std::string> seen;
  for (const auto& d : docs) {
    for (const auto& m : d.mentions) {
      if (!m.resolved_type.empty()) {
        seen.insert(m.resolved_type);
      } else if (!m.raw_types.empty()) {
        seen.insert(m.raw_types.front());
      }
    }
  }
  return from_types({seen.begin(), seen.end()});
}

LabelScheme LabelScheme::i2b2() { return from_types({"problem", "test", "treatment"}); }

bool LabelScheme::has_type(const std::string& t) const {
  return std::binary_search(types.begin(), types.end(), t);
}

int LabelScheme::type_index(const std::string& t) const {
  auto it = std::lower_bound(types.begin(), types.end(), t);
  if (it == types.end() || *it != t) return -1;
  return static_cast<int>(it - types.begin());
}

std::vector<std::string> LabelScheme::iob_tags() const {
  std::vector<std::string> tags{"O"};
  for (const auto& t : types) {
    tags.push_back("B-" + t);
    tags.push_back("I-" + t);
  }
  return tags;
}

std::vector<Document> parse_pubtator(std::istream& in) {
  std::vector<Document> docs;
  Document cur;
  bool open = false;
  bool have_title = false;
  bool have_abstract = false;
  bool have_mentions = false;

  auto close_block = [&](int line_no) {
    if (!open) return;
    if (!have_title) fail_at("pubtator: block without title line", line_no);
    sort_mentions(cur);
    docs.push_back(std::move(cur));
    cur = Document{};
    open = have_title = have_abstract = have_mentions = false;
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      close_block(line_no);
      continue;
    }

    if (line.find('\t') != std::string::npos) {
      auto f = split_tabs(line);
      if (f.size() != 5 && f.size() != 6) {
        fail_at("pubtator: expected 5 or 6 tab-separated fields, got " + std::to_string(f.size()),
                line_no);
      }
      if (!open || !have_title) fail_at("pubtator: mention before document text", line_no);
      if (f[0] != cur.doc_id) {
        fail_at("pubtator: mention for document '" + f[0] + "' inside block '" + cur.doc_id + "'",
                line_no);
      }
      Mention m;
      m.start_char = parse_int(f[1], "start offset", line_no);
      m.end_char = parse_int(f[2], "end offset", line_no);
      m.surface = f[3];
      if (m.start_char < 0 || m.end_char <= m.start_char ||
          m.end_char > static_cast<int>(cur.text.size())) {
        fail_at("pubtator: offsets [" + f[1] + "," + f[2] + ") out of range for document '" +
                    cur.doc_id + "'",
                line_no);
      }
      if (cur.text.compare(m.start_char, m.end_char - m.start_char, m.surface) != 0) {
        fail_at("pubtator: surface '" + m.surface + "' does not match text at [" + f[1] + "," +
                    f[2] + ")",
                line_no);
      }
      std::stringstream types(f[4]);
      std::string t;
      while (std::getline(types, t, ',')) {
        t = trim(t);
        if (!t.empty()) m.raw_types.push_back(t);
      }
      if (m.raw_types.empty()) fail_at("pubtator: mention without semantic type", line_no);
      if (f.size() == 6) m.concept_id = f[5];
      cur.mentions.push_back(std::move(m));
      have_mentions = true;
      continue;
    }

    std::size_t p1 = line.find('|');
    std::size_t p2 = (p1 == std::string::npos) ? std::string::npos : line.find('|', p1 + 1);
    if (p2 == std::string::npos) fail_at("pubtator: unrecognized line", line_no);
    std::string id = line.substr(0, p1);
    std::string kind = line.substr(p1 + 1, p2 - p1 - 1);
    std::string body = line.substr(p2 + 1);
    if (id.empty()) fail_at("pubtator: empty document id", line_no);
    if (kind != "t" && kind != "a") fail_at("pubtator: unknown section '" + kind + "'", line_no);

    if (kind == "t") {
      if (open) fail_at("pubtator: title line inside open block (missing blank line?)", line_no);
      open = true;
      have_title = true;
      cur.doc_id = id;
      cur.text = body;
    } else {
      if (!open || !have_title) fail_at("pubtator: abstract before title", line_no);
      if (have_abstract) fail_at("pubtator: duplicate abstract line", line_no);
      if (have_mentions) fail_at("pubtator: abstract after mention lines", line_no);
      if (id != cur.doc_id) {
        fail_at("pubtator: abstract for document '" + id + "' inside block '" + cur.doc_id + "'",
                line_no);
      }
      have_abstract = true;
      cur.text += " " + body;
    }
  }
  close_block(line_no + 1);
  return docs;
}

std::vector<Document> parse_pubtator_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_pubtator(in);
}

namespace {

struct NoteLine {
  int offset = 0;  // char offset of line start in the note
  std::vector<Token> tokens;
};

std::vector<NoteLine> index_note(const std::string& text) {
  std::vector<NoteLine> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = (nl == std::string::npos) ? text.size() : nl;
    NoteLine ln;
    ln.offset = static_cast<int>(pos);
    std::size_t i = pos;
    while (i < end) {
      while (i < end && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i >= end) break;
      std::size_t j = i;
      while (j < end && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      ln.tokens.push_back({text.substr(i, j - i), static_cast<int>(i), static_cast<int>(j)});
      i = j;
    }
    lines.push_back(std::move(ln));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return lines;
}

const std::set<std::string> kI2b2Types = {"problem", "test", "treatment"};

struct Coord {
  int line = 0;   // 1-based
  int token = 0;  // as written in the file
};

Coord parse_coord(const std::string& s, int line_no) {
  std::size_t colon = s.find(':');
  if (colon == std::string::npos) fail_at("concept file: bad coordinate '" + s + "'", line_no);
  try {
    std::size_t u1 = 0, u2 = 0;
    Coord c;
    c.line = std::stoi(s.substr(0, colon), &u1);
    c.token = std::stoi(s.substr(colon + 1), &u2);
    if (u1 != colon || u2 != s.size() - colon - 1) throw std::invalid_argument(s);
    return c;
  } catch (const std::exception&) {
    fail_at("concept file: bad coordinate '" + s + "'", line_no);
  }
}

}  // namespace

Document parse_i2b2(const std::string& doc_id, const std::string& note_text,
                    std::istream& concept_lines, const I2b2Options& opts,
                    std::vector<std::string>* warnings) {
  Document doc;
  doc.doc_id = doc_id;
  doc.text = note_text;
  auto lines = index_note(note_text);

  std::string line;
  int line_no = 0;
  while (std::getline(concept_lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    if (line.rfind("c=\"", 0) != 0) fail_at("concept file: line must start with c=\"", line_no);
    std::size_t sep = line.rfind("||t=\"");
    if (sep == std::string::npos) fail_at("concept file: missing ||t=\"...\" part", line_no);
    std::string left = line.substr(0, sep);
    std::string right = line.substr(sep + 5);
    if (right.empty() || right.back() != '"') fail_at("concept file: unterminated type", line_no);
    std::string type = right.substr(0, right.size() - 1);
    if (!kI2b2Types.count(type)) fail_at("concept file: unknown type '" + type + "'", line_no);

    std::size_t close = left.rfind('"');
    if (close < 3 || close == std::string::npos) fail_at("concept file: unterminated surface", line_no);
    std::string quoted = left.substr(3, close - 3);
    std::istringstream coords(left.substr(close + 1));
    std::string c1, c2, extra;
    if (!(coords >> c1 >> c2) || (coords >> extra)) {
      fail_at("concept file: expected exactly two coordinates", line_no);
    }
    Coord a = parse_coord(c1, line_no);
    Coord b = parse_coord(c2, line_no);
    int base = opts.tokens_zero_based ? 0 : 1;
    a.token -= base;
    b.token -= base;

    auto check = [&](const Coord& c, const std::string& which) -> const NoteLine& {
      if (c.line < 1 || c.line > static_cast<int>(lines.size())) {
        fail_at("concept file: line " + std::to_string(c.line) + " out of range for document '" +
                    doc_id + "'",
                line_no);
      }
      const NoteLine& ln = lines[c.line - 1];
      if (c.token < 0 || c.token >= static_cast<int>(ln.tokens.size())) {
        fail_at("concept file: " + which + " token index out of range on line " +
                    std::to_string(c.line) + " of document '" + doc_id + "'",
                line_no);
      }
      return ln;
    };
    const NoteLine& la = check(a, "start");
    const NoteLine& lb = check(b, "end");
    if (a.line > b.line || (a.line == b.line && a.token > b.token)) {
      fail_at("concept file: start coordinate after end coordinate", line_no);
    }

    Mention m;
    m.start_char = la.tokens[a.token].start_char;
    m.end_char = lb.tokens[b.token].end_char;
    m.surface = note_text.substr(m.start_char, m.end_char - m.start_char);
    m.raw_types.push_back(type);
    if (warnings && fold_for_compare(m.surface) != fold_for_compare(quoted)) {
      warnings->push_back("document '" + doc_id + "' line " + std::to_string(line_no) +
                          ": note text '" + m.surface + "' differs from quoted surface '" + quoted +
                          "'");
    }
    doc.mentions.push_back(std::move(m));
  }
  sort_mentions(doc);
  return doc;
}

Document parse_i2b2_files(const std::string& note_path, const std::string& concept_path,
                          const I2b2Options& opts, std::vector<std::string>* warnings) {
  std::ifstream note(note_path);
  if (!note) throw std::runtime_error("cannot open " + note_path);
  std::stringstream text;
  text << note.rdbuf();
  std::ifstream con(concept_path);
  if (!con) throw std::runtime_error("cannot open " + concept_path);
  std::string id = note_path;
  std::size_t slash = id.find_last_of('/');
  if (slash != std::string::npos) id = id.substr(slash + 1);
  std::size_t dot = id.find_last_of('.');
  if (dot != std::string::npos) id = id.substr(0, dot);
  return parse_i2b2(id, text.str(), con, opts, warnings);
}

void resolve_labels(Document& doc, const LabelScheme& scheme) {
  for (auto& m : doc.mentions) {
    std::string t = m.raw_types.empty() ? std::string(kUnknownType) : m.raw_types.front();
    m.resolved_type = scheme.has_type(t) ? t : kUnknownType;
  }
}

void resolve_labels(std::vector<Document>& docs, const LabelScheme& scheme) {
  for (auto& d : docs) resolve_labels(d, scheme);
}

void resolve_overlaps(Document& doc, std::vector<std::string>* warnings) {
  sort_mentions(doc);
  std::vector<Mention> kept;
  auto note_drop = [&](const Mention& dropped, const Mention& winner) {
    if (warnings) {
      warnings->push_back("document '" + doc.doc_id + "': dropped mention " + span_str(dropped) +
                          " overlapping " + span_str(winner));
    }
  };
  for (auto& m : doc.mentions) {
    bool keep = true;
    while (!kept.empty() && keep) {
      Mention& last = kept.back();
      if (m.start_char >= last.end_char) break;
      int len_m = m.end_char - m.start_char;
      int len_last = last.end_char - last.start_char;
      if (len_m > len_last) {
        note_drop(last, m);
        kept.pop_back();
      } else {
        note_drop(m, last);
        keep = false;
      }
    }
    if (keep) kept.push_back(std::move(m));
  }
  doc.mentions = std::move(kept);
}

void resolve_overlaps(std::vector<Document>& docs, std::vector<std::string>* warnings) {
  for (auto& d : docs) resolve_overlaps(d, warnings);
}

LabeledSequence to_iob(const Document& doc, const TokenizedText& tokens,
                       std::vector<std::string>* warnings) {
  for (std::size_t i = 1; i < doc.mentions.size(); ++i) {
    const Mention& a = doc.mentions[i - 1];
    const Mention& b = doc.mentions[i];
    if (b.start_char < a.end_char) {
      throw std::runtime_error("document '" + doc.doc_id + "': overlapping mentions " + span_str(a) +
                               " and " + span_str(b));
    }
  }

  LabeledSequence seq;
  seq.doc_id = doc.doc_id;
  seq.raw_tokens.reserve(tokens.tokens.size());
  for (const auto& t : tokens.tokens) seq.raw_tokens.push_back(t.surface);
  seq.tokens = tokens.normalized;
  seq.tags.assign(tokens.tokens.size(), "O");

  int last_used = -1;
  for (const auto& m : doc.mentions) {
    if (m.resolved_type.empty()) {
      throw std::invalid_argument("document '" + doc.doc_id + "': mention " + span_str(m) +
                                  " has no resolved type; resolve labels first");
    }
    int first = -1, last = -1;
    for (int t = 0; t < static_cast<int>(tokens.tokens.size()); ++t) {
      const Token& tok = tokens.tokens[t];
      if (tok.start_char < m.end_char && m.start_char < tok.end_char) {
        if (first < 0) first = t;
        last = t;
      }
    }
    if (first < 0) {
      if (warnings) {
        warnings->push_back("document '" + doc.doc_id + "': mention " + span_str(m) +
                            " covers no tokens; skipped");
      }
      continue;
    }
    if (warnings && (tokens.tokens[first].start_char != m.start_char ||
                     tokens.tokens[last].end_char != m.end_char)) {
      warnings->push_back("document '" + doc.doc_id + "': mention " + span_str(m) +
                          " snapped to token span [" +
                          std::to_string(tokens.tokens[first].start_char) + "," +
                          std::to_string(tokens.tokens[last].end_char) + ")");
    }
    if (first <= last_used) {
      // Disjoint char spans can still collide after snapping; first wins.
      if (warnings) {
        warnings->push_back("document '" + doc.doc_id + "': mention " + span_str(m) +
                            " collides with an earlier mention after snapping; skipped");
      }
      continue;
    }
    seq.tags[first] = "B-" + m.resolved_type;
    for (int t = first + 1; t <= last; ++t) seq.tags[t] = "I-" + m.resolved_type;
    last_used = last;
  }
  return seq;
}

LabeledSequence document_to_sequence(const Document& doc, std::vector<std::string>* warnings) {
  TokenizedText toks = word_tokenize(doc.text);
  normalize_numbers(toks);
  return to_iob(doc, toks, warnings);
}

CorpusStats corpus_stats(const std::vector<Document>& docs) {
  CorpusStats s;
  s.num_documents = static_cast<int>(docs.size());
  for (const auto& d : docs) {
    s.num_tokens += static_cast<long long>(word_tokenize(d.text).tokens.size());
    for (const auto& m : d.mentions) {
      if (m.resolved_type.empty()) {
        throw std::invalid_argument("corpus_stats: document '" + d.doc_id + "' has mention " +
                                    span_str(m) + " with no resolved type; resolve labels first");
      }
      ++s.num_entities;
      ++s.entities_per_type[m.resolved_type];
    }
  }
  s.num_types = static_cast<int>(s.entities_per_type.size());
  return s;
}

}  // namespace medtag
