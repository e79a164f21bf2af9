#pragma once

#include <string>
#include <utility>
#include <vector>

#include "medtag/autodiff.hpp"
#include "medtag/tokenization.hpp"
#include "medtag/vocab.hpp"

namespace medtag {

// ---------------------------------------------------------------------------
// LSTM primitives
// ---------------------------------------------------------------------------

/// Creates W [4h x in], U [4h x h], b [4h] under `prefix.`; gate order in the
/// stacked dimension is input, forget, output, candidate.
void init_lstm_params(ParamStore& params, const std::string& prefix, int input_dim, int hidden,
                      Rng& rng);

/// One cell update; returns (h, c).
std::pair<Var, Var> lstm_step(Tape& tape, ParamStore& params, const std::string& prefix, Var x,
                              Var h, Var c);

/// Runs the cell over the sequence from zero state. Outputs are indexed by
/// input position regardless of direction, so output t of a reversed run is
/// the state after consuming positions T-1..t.
std::vector<Var> lstm_run(Tape& tape, ParamStore& params, const std::string& prefix,
                          const std::vector<Var>& inputs, bool reverse);

/// Stacked bidirectional layers under `prefix.l<i>.fwd` / `prefix.l<i>.bwd`;
/// each position's output is the concatenation of both directions (2h wide).
void init_bilstm(ParamStore& params, const std::string& prefix, int input_dim, int hidden,
                 int layers, Rng& rng);
std::vector<Var> bilstm_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                                const std::vector<Var>& inputs, int layers);

// ---------------------------------------------------------------------------
// Word representations: trained word embedding + character encoder
// ---------------------------------------------------------------------------

struct RecurrentConfig {
  int word_dim = 300;
  int char_dim = 100;
  int char_hidden = 50;  // per direction; character encoding is twice this
  int hidden = 1536;     // per direction, per stacked layer
  int layers = 2;
  double dropout = 0.0;  // applied to assembled word representations

  int word_repr_dim() const { return word_dim + 2 * char_hidden; }
  void validate() const;
};

/// Parameters: emb.word, emb.char, char.{fwd,bwd}.*, lstm.l<i>.*, proj.{w,b},
/// crf.trans; all under `prefix.`.
void init_recurrent_tagger(ParamStore& params, const std::string& prefix,
                           const RecurrentConfig& config, int word_vocab_size, int char_vocab_size,
                           int num_tags, Rng& rng);

/// Word embedding row concatenated with the final states of a single-layer
/// character bi-LSTM.
Var assemble_word_repr(Tape& tape, ParamStore& params, const std::string& prefix,
                       const RecurrentConfig& config, int word_id, const std::vector<int>& char_ids);

/// Per-token tag scores [num_tags] for one sentence.
std::vector<Var> recurrent_emissions(Tape& tape, ParamStore& params, const std::string& prefix,
                                     const RecurrentConfig& config, const WordVocab& words,
                                     const CharVocab& chars,
                                     const std::vector<std::string>& sentence);

// ---------------------------------------------------------------------------
// Linear-chain CRF over K tags plus virtual start/stop states
// ---------------------------------------------------------------------------

inline int crf_num_states(int num_tags) { return num_tags + 2; }
inline int crf_start_state(int num_tags) { return num_tags; }
inline int crf_stop_state(int num_tags) { return num_tags + 1; }

/// Unnormalized log score of one tag path.
Var crf_path_score(Tape& tape, const std::vector<Var>& emissions, Var transitions,
                   const std::vector<int>& tags);

/// Log partition over all paths via the forward recurrence in log space.
Var crf_log_z(Tape& tape, const std::vector<Var>& emissions, Var transitions);

/// Negative log likelihood of the gold path.
Var crf_nll(Tape& tape, const std::vector<Var>& emissions, Var transitions,
            const std::vector<int>& gold);

/// Exact best path; score ties resolve toward the lower tag index at every
/// decision, so decoding is deterministic.
std::vector<int> crf_viterbi(const Tensor& emissions, const Tensor& transitions);

// ---------------------------------------------------------------------------
// Transformer encoder (post-norm blocks, learned positions, GELU feed-forward)
// ---------------------------------------------------------------------------

struct TransformerConfig {
  int layers = 12;
  int dim = 768;
  int heads = 12;
  int ff_dim = 3072;
  int max_positions = 512;
  double dropout = 0.1;
  int vocab_size = 0;

  int head_dim() const { return dim / heads; }
  void validate() const;
};

void init_transformer(ParamStore& params, const std::string& prefix,
                      const TransformerConfig& config, Rng& rng);

/// Encodes a piece sequence and returns every block's output, each [T x dim].
/// `keep` marks real positions; masked positions receive no attention weight,
/// so outputs at real positions do not depend on padding. Sequences longer
/// than max_positions throw.
std::vector<Var> transformer_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                                     const TransformerConfig& config,
                                     const std::vector<int>& piece_ids,
                                     const std::vector<unsigned char>* keep = nullptr);

// ---------------------------------------------------------------------------
// Classification heads
// ---------------------------------------------------------------------------

void init_linear_head(ParamStore& params, const std::string& prefix, int input_dim,
                      int num_classes, Rng& rng);
/// Per-position logits [T x num_classes] from features [T x input_dim].
Var linear_head(Tape& tape, ParamStore& params, const std::string& prefix, Var features);

/// Bidirectional LSTM whose input and output widths both equal input_dim
/// (hidden is input_dim / 2 per direction), followed by a linear projection.
void init_bilstm_head(ParamStore& params, const std::string& prefix, int input_dim,
                      int num_classes, Rng& rng);
Var bilstm_head(Tape& tape, ParamStore& params, const std::string& prefix, Var features);

/// Feature matrix for head input: the last `use_layers` encoder outputs
/// concatenated along the feature axis (all of them if fewer exist).
Var concat_last_layers(const std::vector<Var>& layer_outputs, int use_layers = 4);

/// Mean negative log-probability of the gold class over supervised
/// positions; throws if no position is supervised.
Var token_cross_entropy(Tape& tape, Var logits, const std::vector<int>& gold,
                        const std::vector<unsigned char>& supervised);

// ---------------------------------------------------------------------------
// Dual encoder: two transformers read the same words through their own
// subword vocabularies; their last-layer first-piece vectors are concatenated
// per word and classified jointly.
// ---------------------------------------------------------------------------

struct DualInput {
  std::vector<int> first_ids;
  std::vector<int> second_ids;
  std::vector<int> first_word_rows;   // first-piece position per word
  std::vector<int> second_word_rows;
  int num_words = 0;
};

/// Tokenizes one sentence under both vocabularies. Throws if either piece
/// sequence exceeds its encoder's max_positions.
DualInput make_dual_input(const std::vector<std::string>& words, const SubwordVocab& first_vocab,
                          const SubwordVocab& second_vocab, const TransformerConfig& first_config,
                          const TransformerConfig& second_config);

/// Word-level logits [num_words x num_classes]. Encoders live under
/// `prefix.first` and `prefix.second`, the head under `prefix.head`.
Var dual_encoder_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                         const TransformerConfig& first_config,
                         const TransformerConfig& second_config, const DualInput& input);

void init_dual_encoder(ParamStore& params, const std::string& prefix,
                       const TransformerConfig& first_config,
                       const TransformerConfig& second_config, int num_classes, Rng& rng);

}  // namespace medtag
