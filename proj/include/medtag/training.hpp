#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "medtag/corpus.hpp"
#include "medtag/eval.hpp"
#include "medtag/models.hpp"
#include "medtag/optim.hpp"

namespace medtag {

/// Bijection between tag strings and class ids.
struct TagMap {
  std::vector<std::string> tags;
  std::unordered_map<std::string, int> index;

  /// IOB tags of the scheme, in scheme order.
  static TagMap from_scheme(const LabelScheme& scheme);
  /// Same plus the subword padding class at the last id.
  static TagMap piece_space(const LabelScheme& scheme);
  static TagMap from_tags(std::vector<std::string> tags);

  int id(const std::string& tag) const;  // throws on unknown tags
  const std::string& name(int id) const;
  std::size_t size() const { return tags.size(); }
};

enum class ModelKind {
  recurrent_crf,      // word+char embeddings, stacked bi-LSTM, CRF
  encoder_linear,     // transformer, linear head on the last layer
  encoder_recurrent,  // transformer, bi-LSTM head over the last four layers
  dual_encoder,       // two transformers, concatenated word features
};
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct TaggerConfig {
  ModelKind kind = ModelKind::recurrent_crf;
  RecurrentConfig recurrent;
  TransformerConfig encoder;         // vocab_size filled when the tagger is built
  TransformerConfig second_encoder;  // dual_encoder only
};

/// A complete model: configuration, label space, input vocabularies, and
/// parameters. Everything needed to reproduce predictions travels together
/// through checkpoints.
struct Tagger {
  TaggerConfig config;
  LabelScheme scheme;
  TagMap word_tags;
  TagMap piece_labels;           // encoder paths
  WordVocab words;               // recurrent path
  CharVocab chars;               // recurrent path
  SubwordVocab subwords;         // encoder paths
  SubwordVocab second_subwords;  // dual_encoder
  ParamStore params;
  std::uint64_t seed = 0;

  bool uses_subwords() const {
    return config.kind != ModelKind::recurrent_crf;
  }
};

/// Builds vocabularies from the training sequences and initializes
/// parameters from the seed. Subword vocabularies must be supplied for the
/// encoder paths.
Tagger build_tagger(const TaggerConfig& config, const LabelScheme& scheme,
                    const std::vector<LabeledSequence>& train, std::uint64_t seed,
                    SubwordVocab subwords = {}, SubwordVocab second_subwords = {});

/// Tags one sentence of normalized tokens. Long inputs on the encoder paths
/// are split into piece-budget windows and the word tags reassembled.
std::vector<std::string> predict_tags(const Tagger& tagger, const std::vector<std::string>& words);
std::vector<std::vector<std::string>> predict_tags(const Tagger& tagger,
                                                   const std::vector<LabeledSequence>& data);

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct Batch {
  std::vector<int> members;  // dataset indices
  int max_len = 0;
  std::vector<std::vector<int>> padded_ids;      // members x max_len, pad_id filled
  std::vector<std::vector<unsigned char>> mask;  // 1 marks a real position
  std::vector<int> lengths;
};

/// Shuffles the dataset order with the given stream and chunks it; the final
/// batch may be short. Each batch pads its members to the batch maximum.
std::vector<Batch> make_batches(const std::vector<std::vector<int>>& id_sequences, int batch_size,
                                int pad_id, Rng& rng);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class LrPolicy {
  constant,       // peak_lr everywhere (recurrent path)
  warmup_linear,  // linear warmup over the first fraction, then linear decay
};

struct TrainOptions {
  OptimizerConfig optim;
  LrPolicy lr_policy = LrPolicy::constant;
  double clip_norm = 5.0;  // global gradient norm cap; 0 disables
  std::uint64_t seed = 42;
  std::string log_path;         // JSON lines, one object per epoch; empty disables
  std::string checkpoint_path;  // best-dev model; empty disables
};

/// Built-in defaults per model family: the recurrent tagger trains with a
/// constant rate and no weight decay; encoder fine-tuning uses warmup plus
/// decay and decoupled decay 0.01.
TrainOptions default_train_options(ModelKind kind);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_precision = 0.0;
  double dev_recall = 0.0;
  double dev_f1 = 0.0;
  bool has_dev = false;
  double last_lr = 0.0;
  int steps_done = 0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int total_steps = 0;
  int best_epoch = 0;        // 1-based; 0 when no dev set was given
  double best_dev_f1 = 0.0;
  double final_train_loss = 0.0;
};

/// Optimizes the tagger in place. One optimizer step per batch;
/// total_steps = epochs * ceil(N / batch_size) drives the schedule, whose
/// step argument is 1-based. A non-finite loss or gradient aborts with a
/// descriptive error. Identical inputs and seed reproduce identical results.
TrainResult train(Tagger& tagger, const std::vector<LabeledSequence>& train_data,
                  const std::vector<LabeledSequence>& dev_data, const TrainOptions& options);

/// Mean of per-sentence losses for one batch of dataset indices, on a fresh
/// eval or training tape. Exposed for the batching equivalence check.
double batch_loss_value(const Tagger& tagger, const std::vector<LabeledSequence>& data,
                        const std::vector<int>& members);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Binary layout: magic "MTCKPT01", little-endian u32 JSON header length, a
/// JSON header (configuration, label scheme, vocabularies, seed, parameter
/// names and shapes in order), then each parameter's values as little-endian
/// f64 in the listed order.
void save_checkpoint(const Tagger& tagger, const std::string& path);
Tagger load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Cross-validation grid search
// ---------------------------------------------------------------------------

struct GridPoint {
  int batch_size = 32;
  double lr = 0.001;
  int epochs = 10;
};

struct CvOptions {
  int folds = 10;
  std::vector<int> batch_sizes = {16, 32};
  std::vector<double> lrs = {2e-5, 3e-5, 5e-5, 1e-4};
  int max_epochs = 10;  // every epoch count up to this is a grid point
  std::uint64_t seed = 42;
  TrainOptions train_template;  // lr policy, clipping, optimizer constants
};

struct CvCell {
  GridPoint point;
  double mean_f1 = 0.0;
  std::vector<double> fold_f1;
};

struct CvResult {
  GridPoint best;
  double best_mean_f1 = 0.0;
  std::vector<CvCell> table;
  std::vector<std::vector<int>> fold_documents;  // document indices per fold
};

/// Documents are assigned to folds whole, so no document contributes to both
/// sides of a split. For each batch/lr pair one run per fold covers every
/// epoch budget. The best cell maximizes mean F1; exact ties prefer fewer
/// epochs, then a smaller rate, then a smaller batch.
CvResult kfold_cv(const TaggerConfig& config, const LabelScheme& scheme,
                  const std::vector<Document>& documents, const CvOptions& options,
                  SubwordVocab subwords = {}, SubwordVocab second_subwords = {});

}  // namespace medtag
