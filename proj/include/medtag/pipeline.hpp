#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "medtag/config.hpp"

namespace medtag {

struct LoadedSplit {
  std::vector<Document> documents;  // empty for CoNLL input
  std::vector<LabeledSequence> sequences;
};

/// Both splits read, label-resolved, overlap-cleaned, and tagged. The scheme
/// comes from the configuration (or is observed from the training split).
struct LoadedData {
  LoadedSplit train;
  LoadedSplit dev;
  LabelScheme scheme;
  std::vector<std::string> warnings;
};

LoadedData load_data(const DataConfig& cfg);

/// Document-level stats when documents exist; otherwise counts over decoded
/// CoNLL sequences, treating each sequence as one document.
CorpusStats split_stats(const LoadedSplit& split);

/// CoNLL rows to training sequences: surfaces kept as raw tokens, number
/// normalization applied for the model inputs.
std::vector<LabeledSequence> sequences_from_conll(const std::vector<ConllSequence>& raw);

std::vector<ConllSequence> sequences_to_conll(const std::vector<LabeledSequence>& seqs);

std::string render_stats(const CorpusStats& stats);
nlohmann::json to_json(const CorpusStats& stats);

}  // namespace medtag
