#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace medtag {

/// Reserved tag for non-initial subword pieces. Lives in the piece-level
/// output space but is excluded from the loss and never reaches the scorer.
inline constexpr const char* kPaddingTag = "X";

struct Token {
  std::string surface;
  int start_char = 0;
  int end_char = 0;  // exclusive
};

struct TokenizedText {
  std::vector<Token> tokens;
  std::vector<std::string> normalized;  // surfaces after NUM replacement
};

/// Splits on whitespace, then peels leading/trailing ASCII punctuation into
/// separate single-character tokens. A token that is all punctuation stays
/// whole. Offsets index into the original text.
TokenizedText word_tokenize(const std::string& text);

/// True for an optional sign followed by digits with at most one decimal
/// point (and at least one digit).
bool is_numeric_token(const std::string& token);

/// Replaces numeric tokens with the literal "NUM"; everything else keeps its
/// casing. Idempotent.
std::vector<std::string> normalize_numbers(const std::vector<std::string>& tokens);
void normalize_numbers(TokenizedText& text);

struct SubwordVocab {
  std::vector<std::string> pieces;  // line index = piece id
  std::unordered_map<std::string, int> index;
  std::string continuation_marker = "##";
  std::string unk_token = "[UNK]";
  std::string pad_token = "[PAD]";
  int max_chars_per_word = 200;

  /// One piece per line, line index = id. Requires the unknown token.
  static SubwordVocab load(std::istream& in);
  static SubwordVocab load_file(const std::string& path);
  static SubwordVocab from_pieces(std::vector<std::string> pieces);

  int id(const std::string& piece) const {
    auto it = index.find(piece);
    return it == index.end() ? -1 : it->second;
  }
  int unk_id() const { return id(unk_token); }
  bool has(const std::string& piece) const { return index.count(piece) > 0; }
  std::size_t size() const { return pieces.size(); }
};

/// Greedy longest-match-first decomposition; non-initial pieces carry the
/// continuation marker. A word with no decomposition becomes the single
/// unknown token.
std::vector<std::string> wordpiece_tokenize(const std::string& word, const SubwordVocab& vocab);

struct PieceAlignment {
  std::vector<std::string> pieces;
  std::vector<int> word_index;              // per-piece source word
  std::vector<unsigned char> is_first_piece;

  int num_words() const { return word_index.empty() ? 0 : word_index.back() + 1; }
  std::vector<int> piece_ids(const SubwordVocab& vocab) const;
  std::vector<int> first_piece_positions() const;
};

PieceAlignment tokenize_words(const std::vector<std::string>& words, const SubwordVocab& vocab);

/// First piece of word i gets word_tags[i]; every later piece gets the
/// reserved padding tag.
std::vector<std::string> align_labels(const std::vector<std::string>& word_tags, const PieceAlignment& alignment);

/// Inverse of align_labels: a word's tag is its first piece's tag; padding
/// tags (and anything else on continuation pieces) are discarded.
std::vector<std::string> collapse_predictions(const std::vector<std::string>& piece_tags,
                                              const PieceAlignment& alignment);

/// Chunks a word sequence into [start, end) ranges whose piece counts stay
/// within max_pieces, splitting only at word boundaries. A single word whose
/// pieces exceed the budget gets a range of its own.
std::vector<std::pair<int, int>> split_by_piece_budget(const std::vector<std::string>& words,
                                                       const SubwordVocab& vocab, int max_pieces);

}  // namespace medtag
