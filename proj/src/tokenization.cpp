#include "medtag/tokenization.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace medtag {

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool all_punct(const std::string& s, int begin, int end) {
  for (int i = begin; i < end; ++i) {
    if (!is_punct(s[i])) return false;
  }
  return end > begin;
}

}  // namespace

TokenizedText word_tokenize(const std::string& text) {
  TokenizedText out;
  const int n = static_cast<int>(text.size());
  int i = 0;
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    if (i >= n) break;
    int j = i;
    while (j < n && !is_space(text[j])) ++j;

    if (all_punct(text, i, j)) {
      out.tokens.push_back({text.substr(i, j - i), i, j});
    } else {
      int lo = i;
      int hi = j;
      while (is_punct(text[lo])) {
        out.tokens.push_back({std::string(1, text[lo]), lo, lo + 1});
        ++lo;
      }
      std::vector<Token> tail;
      while (is_punct(text[hi - 1])) {
        --hi;
        tail.push_back({std::string(1, text[hi]), hi, hi + 1});
      }
      out.tokens.push_back({text.substr(lo, hi - lo), lo, hi});
      for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.tokens.push_back(*it);
    }
    i = j;
  }
  out.normalized.reserve(out.tokens.size());
  for (const auto& t : out.tokens) out.normalized.push_back(t.surface);
  return out;
}

bool is_numeric_token(const std::string& token) {
  if (token.empty()) return false;
  int i = 0;
  if (token[0] == '+' || token[0] == '-') i = 1;
  int digits = 0;
  int dots = 0;
  for (; i < static_cast<int>(token.size()); ++i) {
    char c = token[i];
    if (c >= '0' && c <= '9') {
      ++digits;
    } else if (c == '.') {
      ++dots;
    } else {
      return false;
    }
  }
  return digits > 0 && dots <= 1;
}

std::vector<std::string> normalize_numbers(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(is_numeric_token(t) ? "NUM" : t);
  return out;
}

void normalize_numbers(TokenizedText& text) { text.normalized = normalize_numbers(text.normalized); }

SubwordVocab SubwordVocab::load(std::istream& in) {
  SubwordVocab v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // trailing newline
      throw std::runtime_error("subword vocab: empty piece at line " + std::to_string(line_no));
    }
    if (v.index.count(line)) {
      throw std::runtime_error("subword vocab: duplicate piece '" + line + "' at line " +
                               std::to_string(line_no));
    }
    v.index[line] = static_cast<int>(v.pieces.size());
    v.pieces.push_back(line);
  }
  if (!v.has(v.unk_token)) {
    throw std::runtime_error("subword vocab: missing required token " + v.unk_token);
  }
  return v;
}

SubwordVocab SubwordVocab::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("subword vocab: cannot open " + path);
  return load(in);
}

SubwordVocab SubwordVocab::from_pieces(std::vector<std::string> pieces) {
  std::ostringstream buf;
  for (const auto& p : pieces) buf << p << '\n';
  std::istringstream in(buf.str());
  return load(in);
}

std::vector<std::string> wordpiece_tokenize(const std::string& word, const SubwordVocab& vocab) {
  if (word.empty()) throw std::invalid_argument("wordpiece_tokenize: empty word");
  if (static_cast<int>(word.size()) > vocab.max_chars_per_word) return {vocab.unk_token};
  std::vector<std::string> pieces;
  int start = 0;
  const int n = static_cast<int>(word.size());
  while (start < n) {
    int end = n;
    std::string match;
    while (end > start) {
      std::string sub = word.substr(start, end - start);
      if (start > 0) sub = vocab.continuation_marker + sub;
      if (vocab.has(sub)) {
        match = sub;
        break;
      }
      --end;
    }
    if (match.empty()) return {vocab.unk_token};
    pieces.push_back(match);
    start = end;
  }
  return pieces;
}

std::vector<int> PieceAlignment::piece_ids(const SubwordVocab& vocab) const {
  std::vector<int> ids;
  ids.reserve(pieces.size());
  for (const auto& p : pieces) {
    int id = vocab.id(p);
    if (id < 0) throw std::runtime_error("piece '" + p + "' not in vocab");
    ids.push_back(id);
  }
  return ids;
}

std::vector<int> PieceAlignment::first_piece_positions() const {
  std::vector<int> pos;
  for (int i = 0; i < static_cast<int>(pieces.size()); ++i) {
    if (is_first_piece[i]) pos.push_back(i);
  }
  return pos;
}

PieceAlignment tokenize_words(const std::vector<std::string>& words, const SubwordVocab& vocab) {
  PieceAlignment a;
  for (int w = 0; w < static_cast<int>(words.size()); ++w) {
    auto pieces = wordpiece_tokenize(words[w], vocab);
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      a.pieces.push_back(std::move(pieces[k]));
      a.word_index.push_back(w);
      a.is_first_piece.push_back(k == 0 ? 1 : 0);
    }
  }
  return a;
}

std::vector<std::string> align_labels(const std::vector<std::string>& word_tags,
                                      const PieceAlignment& alignment) {
  if (static_cast<int>(word_tags.size()) != alignment.num_words()) {
    throw std::invalid_argument("align_labels: " + std::to_string(word_tags.size()) +
                                " tags for " + std::to_string(alignment.num_words()) + " words");
  }
  std::vector<std::string> out;
  out.reserve(alignment.pieces.size());
  for (std::size_t i = 0; i < alignment.pieces.size(); ++i) {
    out.push_back(alignment.is_first_piece[i] ? word_tags[alignment.word_index[i]] : kPaddingTag);
  }
  return out;
}

std::vector<std::string> collapse_predictions(const std::vector<std::string>& piece_tags,
                                              const PieceAlignment& alignment) {
  if (piece_tags.size() != alignment.pieces.size()) {
    throw std::invalid_argument("collapse_predictions: " + std::to_string(piece_tags.size()) +
                                " tags for " + std::to_string(alignment.pieces.size()) + " pieces");
  }
  std::vector<std::string> out(alignment.num_words());
  for (std::size_t i = 0; i < piece_tags.size(); ++i) {
    if (alignment.is_first_piece[i]) out[alignment.word_index[i]] = piece_tags[i];
  }
  return out;
}

std::vector<std::pair<int, int>> split_by_piece_budget(const std::vector<std::string>& words,
                                                       const SubwordVocab& vocab, int max_pieces) {
  if (max_pieces <= 0) throw std::invalid_argument("split_by_piece_budget: max_pieces must be positive");
  std::vector<std::pair<int, int>> ranges;
  int start = 0;
  int used = 0;
  for (int w = 0; w < static_cast<int>(words.size()); ++w) {
    int cost = static_cast<int>(wordpiece_tokenize(words[w], vocab).size());
    if (w > start && used + cost > max_pieces) {
      ranges.emplace_back(start, w);
      start = w;
      used = 0;
    }
    used += cost;
    if (used > max_pieces && w == start) {  // single over-budget word
      ranges.emplace_back(w, w + 1);
      start = w + 1;
      used = 0;
    }
  }
  if (start < static_cast<int>(words.size())) ranges.emplace_back(start, static_cast<int>(words.size()));
  return ranges;
}

}  // namespace medtag
