#include "medtag/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace medtag {

WordVocab WordVocab::build(const std::vector<std::vector<std::string>>& sequences,
                           std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : sequences) {
    for (const auto& w : seq) ++counts[w];
  }
  std::vector<std::string> kept;
  for (const auto& [w, c] : counts) {
    if (c >= min_count && w != kUnk) kept.push_back(w);
  }
  kept.insert(kept.begin(), kUnk);
  return from_words(std::move(kept));
}

WordVocab WordVocab::from_words(std::vector<std::string> words) {
  if (words.empty() || words[0] != kUnk) {
    words.insert(words.begin(), kUnk);
  }
  WordVocab v;
  for (auto& w : words) {
    if (v.index.count(w)) throw std::invalid_argument("word vocab: duplicate word '" + w + "'");
    v.index[w] = static_cast<int>(v.words.size());
    v.words.push_back(std::move(w));
  }
  return v;
}

CharVocab CharVocab::build(const std::vector<std::vector<std::string>>& sequences) {
  std::set<char> seen;
  for (const auto& seq : sequences) {
    for (const auto& w : seq) {
      for (char c : w) seen.insert(c);
    }
  }
  return from_chars(std::string(seen.begin(), seen.end()));
}

CharVocab CharVocab::from_chars(std::string chars) {
  CharVocab v;
  v.chars = std::move(chars);
  for (std::size_t i = 0; i < v.chars.size(); ++i) {
    if (v.index.count(v.chars[i])) {
      throw std::invalid_argument("char vocab: duplicate character");
    }
    v.index[v.chars[i]] = static_cast<int>(i) + 1;
  }
  return v;
}

std::vector<int> CharVocab::encode(const std::string& word) const {
  std::vector<int> ids;
  ids.reserve(word.size());
  for (char c : word) ids.push_back(id(c));
  return ids;
}

int load_pretrained_embeddings(std::istream& in, const WordVocab& vocab, Parameter& table) {
  if (table.value.dim() != 2 || table.value.rows() != static_cast<int>(vocab.size())) {
    throw std::invalid_argument("embedding table shape " + table.value.shape_str() +
                                " does not cover vocab of " + std::to_string(vocab.size()));
  }
  const int dim = table.value.cols();
  int loaded = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    if (!vocab.has(word)) continue;
    int row = vocab.id(word);
    std::vector<double> values;
    double v = 0;
    while (fields >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != dim) {
      throw std::runtime_error("embeddings: expected " + std::to_string(dim) + " values, got " +
                               std::to_string(values.size()) + " at line " +
                               std::to_string(line_no));
    }
    for (int j = 0; j < dim; ++j) table.value.at(row, j) = values[j];
    ++loaded;
  }
  return loaded;
}

int load_pretrained_embeddings_file(const std::string& path, const WordVocab& vocab,
                                    Parameter& table) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_pretrained_embeddings(in, vocab, table);
}

}  // namespace medtag
