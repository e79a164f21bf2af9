#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace medtag {

struct ConllSequence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

/// `token<TAB>tag` lines, blank line between sequences. Errors carry the
/// 1-based line number.
std::vector<ConllSequence> read_conll(std::istream& in, std::vector<int>* start_lines = nullptr);
std::vector<ConllSequence> read_conll_file(const std::string& path);
void write_conll(std::ostream& out, const std::vector<ConllSequence>& seqs);
void write_conll_file(const std::string& path, const std::vector<ConllSequence>& seqs);

/// Token-index span, end exclusive.
struct EntitySpan {
  int start = 0;
  int end = 0;
  std::string type;

  bool operator==(const EntitySpan& o) const = default;
  bool same_span(const EntitySpan& o) const { return start == o.start && end == o.end; }
  bool overlaps(const EntitySpan& o) const { return start < o.end && o.start < end; }
};

/// Reads maximal entity runs out of an IOB tag sequence. A continuation tag
/// with no matching open entity starts a new one (conventional repair), so
/// any tag sequence decodes. Padding tags count as outside.
std::vector<EntitySpan> decode_entities(const std::vector<std::string>& tags);

struct TagCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct Scores {
  TagCounts overall;
  std::map<std::string, TagCounts> per_type;
};

/// Strict micro scoring: an entity counts as correct only when span and type
/// both match, one-to-one. Sequence counts and lengths must line up.
Scores strict_score(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& pred);

struct ErrorBreakdown {
  long long right_span_wrong_label = 0;
  long long right_label_overlapping_span = 0;
  long long wrong_label_overlapping_span = 0;
  long long complete_false_positive = 0;  // prediction left unpaired, usually touching no gold
  long long complete_false_negative = 0;  // gold entity left unpaired, usually untouched

  long long total() const {
    return right_span_wrong_label + right_label_overlapping_span + wrong_label_overlapping_span +
           complete_false_positive + complete_false_negative;
  }
};

/// Buckets every non-correct entity. Exact matches are removed first; the
/// rest are paired greedily (exact-span before overlap buckets, larger
/// overlap first, then position) so each entity lands in one bucket. Unpaired
/// predictions and golds become the two complete-miss buckets. The result
/// does not depend on sequence order.
ErrorBreakdown classify_errors(const std::vector<std::vector<std::string>>& gold,
                               const std::vector<std::vector<std::string>>& pred);

struct ModelComparison {
  Scores first;
  Scores second;
  ErrorBreakdown first_errors;
  ErrorBreakdown second_errors;
  /// second minus first, per type that appears on either side.
  std::map<std::string, double> f1_delta;
};

ModelComparison compare_models(const std::vector<std::vector<std::string>>& gold,
                               const std::vector<std::vector<std::string>>& pred_first,
                               const std::vector<std::vector<std::string>>& pred_second);

nlohmann::json to_json(const Scores& s);
nlohmann::json to_json(const ErrorBreakdown& e);
nlohmann::json to_json(const ModelComparison& c);

std::string render_scores(const Scores& s);
std::string render_errors(const ErrorBreakdown& e);
std::string render_comparison(const ModelComparison& c);

}  // namespace medtag
