#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "medtag/tokenization.hpp"

namespace medtag {

/// Catch-all class for semantic types outside the active inventory.
inline constexpr const char* kUnknownType = "UnknownType";

struct Mention {
  int start_char = 0;
  int end_char = 0;  // exclusive
  std::string surface;
  std::vector<std::string> raw_types;  // as listed in the source file
  std::string resolved_type;           // single type after resolution
  std::string concept_id;              // optional ontology identifier
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<Mention> mentions;  // sorted by (start_char, end_char)
};

struct LabelScheme {
  std::vector<std::string> types;  // sorted, always contains kUnknownType

  /// Sorts, dedupes, and appends the unknown class if missing.
  static LabelScheme from_types(std::vector<std::string> types);
  /// Every type observed in the documents (first listed type per mention).
  static LabelScheme from_corpus(const std::vector<Document>& docs);
  static LabelScheme i2b2();  // problem / test / treatment

  bool has_type(const std::string& t) const;
  int type_index(const std::string& t) const;  // -1 if absent

  /// "O" followed by B-/I- per type; size is 2 * types.size() + 1.
  std::vector<std::string> iob_tags() const;
};

/// PubTator blocks: title line `ID|t|text`, abstract line `ID|a|text`,
/// then one mention per line `ID<TAB>start<TAB>end<TAB>surface<TAB>types<TAB>concept`
/// with types comma-separated. Blocks end at blank lines. Document text is
/// title + " " + abstract. Errors carry the 1-based line number.
std::vector<Document> parse_pubtator(std::istream& in);
std::vector<Document> parse_pubtator_file(const std::string& path);

struct I2b2Options {
  /// Token coordinates are 1-based by default; some releases count from 0.
  bool tokens_zero_based = false;
};

/// Concept lines `c="surface" L1:T1 L2:T2||t="type"` against a line-oriented
/// note; L is a 1-based line number, T a token index into that line's
/// whitespace tokens. Converts to character offsets into the note text.
Document parse_i2b2(const std::string& doc_id, const std::string& note_text,
                    std::istream& concept_lines, const I2b2Options& opts = {},
                    std::vector<std::string>* warnings = nullptr);
Document parse_i2b2_files(const std::string& note_path, const std::string& concept_path,
                          const I2b2Options& opts = {}, std::vector<std::string>* warnings = nullptr);

/// Picks each mention's first listed type; types absent from the scheme
/// resolve to the unknown class.
void resolve_labels(Document& doc, const LabelScheme& scheme);
void resolve_labels(std::vector<Document>& docs, const LabelScheme& scheme);

/// Drops any mention strictly contained in (or tied with, keeping the
/// earlier) an overlapping longer one, so remaining spans are disjoint.
/// Appends one note per dropped mention.
void resolve_overlaps(Document& doc, std::vector<std::string>* warnings = nullptr);
void resolve_overlaps(std::vector<Document>& docs, std::vector<std::string>* warnings = nullptr);

struct LabeledSequence {
  std::string doc_id;
  std::vector<std::string> tokens;      // normalized surfaces
  std::vector<std::string> raw_tokens;  // original surfaces
  std::vector<std::string> tags;        // IOB, one per token
};

/// Projects resolved mentions onto tokens as IOB tags. Mention boundaries
/// falling inside a token snap outward to the whole token. Requires disjoint
/// mentions; overlap raises an error naming both spans.
LabeledSequence to_iob(const Document& doc, const TokenizedText& tokens,
                       std::vector<std::string>* warnings = nullptr);

/// Full ingestion for one document: tokenize, NUM-normalize, tag.
LabeledSequence document_to_sequence(const Document& doc, std::vector<std::string>* warnings = nullptr);

struct CorpusStats {
  int num_documents = 0;
  long long num_tokens = 0;
  long long num_entities = 0;
  int num_types = 0;  // distinct resolved types present in the data
  std::map<std::string, long long> entities_per_type;
};

/// Counts use the word tokenizer; each mention counts once under its
/// resolved type.
CorpusStats corpus_stats(const std::vector<Document>& docs);

}  // namespace medtag
