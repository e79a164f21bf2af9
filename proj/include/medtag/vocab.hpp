#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "medtag/autodiff.hpp"

namespace medtag {

/// Closed word inventory with an unknown fallback at a fixed slot.
struct WordVocab {
  std::vector<std::string> words;  // index = id, words[0] == kUnk
  std::unordered_map<std::string, int> index;

  static constexpr const char* kUnk = "<unk>";

  /// Keeps words appearing at least min_count times, ordered
  /// lexicographically after the unknown slot, so builds are reproducible.
  static WordVocab build(const std::vector<std::vector<std::string>>& sequences,
                         std::size_t min_count = 1);
  static WordVocab from_words(std::vector<std::string> words);

  int id(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? 0 : it->second;
  }
  bool has(const std::string& w) const { return index.count(w) > 0; }
  std::size_t size() const { return words.size(); }
};

/// Byte-level character inventory, unknown at slot 0.
struct CharVocab {
  std::string chars;  // chars[i] has id i + 1; id 0 is unknown
  std::unordered_map<char, int> index;

  static CharVocab build(const std::vector<std::vector<std::string>>& sequences);
  static CharVocab from_chars(std::string chars);

  int id(char c) const {
    auto it = index.find(c);
    return it == index.end() ? 0 : it->second;
  }
  std::vector<int> encode(const std::string& word) const;
  std::size_t size() const { return chars.size() + 1; }
};

/// Text embedding file, one `word v1 v2 ... vD` line per word. Rows for
/// in-vocab words overwrite the table; other words keep their initialization.
/// Returns how many rows were filled. Dimension mismatches throw.
int load_pretrained_embeddings(std::istream& in, const WordVocab& vocab, Parameter& table);
int load_pretrained_embeddings_file(const std::string& path, const WordVocab& vocab,
                                    Parameter& table);

}  // namespace medtag
