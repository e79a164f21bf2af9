#include "medtag/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medtag {

namespace {

Tensor ones(int n) {
  Tensor t = Tensor::zeros({n});
  for (auto& v : t.data) v = 1.0;
  return t;
}

std::vector<int> iota(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

void init_lstm_params(ParamStore& params, const std::string& prefix, int input_dim, int hidden,
                      Rng& rng) {
  if (input_dim <= 0 || hidden <= 0) {
    throw std::invalid_argument("init_lstm_params: dimensions must be positive");
  }
  params.create(prefix + ".W", glorot_uniform({4 * hidden, input_dim}, input_dim, hidden, rng));
  params.create(prefix + ".U", glorot_uniform({4 * hidden, hidden}, hidden, hidden, rng));
  Tensor b = Tensor::zeros({4 * hidden});
  // Start with an open forget gate so early gradients reach back in time.
  for (int i = hidden; i < 2 * hidden; ++i) b.data[i] = 1.0;
  params.create(prefix + ".b", b);
}

std::pair<Var, Var> lstm_step(Tape& tape, ParamStore& params, const std::string& prefix, Var x,
                              Var h, Var c) {
  Var W = tape.param(params.get(prefix + ".W"));
  Var U = tape.param(params.get(prefix + ".U"));
  Var b = tape.param(params.get(prefix + ".b"));
  const int hidden = params.get(prefix + ".U").value.cols();
  Var z = add(add(matvec(W, x), matvec(U, h)), b);
  Var i = sigmoid(slice(z, 0, hidden));
  Var f = sigmoid(slice(z, hidden, hidden));
  Var o = sigmoid(slice(z, 2 * hidden, hidden));
  Var g = tanh(slice(z, 3 * hidden, hidden));
  Var c_next = add(mul(f, c), mul(i, g));
  Var h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

std::vector<Var> lstm_run(Tape& tape, ParamStore& params, const std::string& prefix,
                          const std::vector<Var>& inputs, bool reverse) {
  if (inputs.empty()) throw std::invalid_argument("lstm_run: empty input sequence");
  const int hidden = params.get(prefix + ".U").value.cols();
  Var h = tape.input(Tensor::zeros({hidden}));
  Var c = tape.input(Tensor::zeros({hidden}));
  const int n = static_cast<int>(inputs.size());
  std::vector<Var> out(inputs.size());
  for (int step = 0; step < n; ++step) {
    int t = reverse ? n - 1 - step : step;
    std::tie(h, c) = lstm_step(tape, params, prefix, inputs[t], h, c);
    out[t] = h;
  }
  return out;
}

void init_bilstm(ParamStore& params, const std::string& prefix, int input_dim, int hidden,
                 int layers, Rng& rng) {
  if (layers <= 0) throw std::invalid_argument("init_bilstm: layers must be positive");
  for (int l = 0; l < layers; ++l) {
    int in_dim = l == 0 ? input_dim : 2 * hidden;
    std::string base = prefix + ".l" + std::to_string(l);
    init_lstm_params(params, base + ".fwd", in_dim, hidden, rng);
    init_lstm_params(params, base + ".bwd", in_dim, hidden, rng);
  }
}

std::vector<Var> bilstm_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                                const std::vector<Var>& inputs, int layers) {
  std::vector<Var> current = inputs;
  for (int l = 0; l < layers; ++l) {
    std::string base = prefix + ".l" + std::to_string(l);
    auto fwd = lstm_run(tape, params, base + ".fwd", current, false);
    auto bwd = lstm_run(tape, params, base + ".bwd", current, true);
    std::vector<Var> next(current.size());
    for (std::size_t t = 0; t < current.size(); ++t) next[t] = concat(fwd[t], bwd[t]);
    current = std::move(next);
  }
  return current;
}

// ---------------------------------------------------------------------------
// Word representations
// ---------------------------------------------------------------------------

void RecurrentConfig::validate() const {
  if (word_dim <= 0 || char_dim <= 0 || char_hidden <= 0 || hidden <= 0 || layers <= 0) {
    throw std::invalid_argument("recurrent config: dimensions must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("recurrent config: dropout must lie in [0, 1)");
  }
}

void init_recurrent_tagger(ParamStore& params, const std::string& prefix,
                           const RecurrentConfig& config, int word_vocab_size, int char_vocab_size,
                           int num_tags, Rng& rng) {
  config.validate();
  if (word_vocab_size <= 0 || char_vocab_size <= 0 || num_tags <= 0) {
    throw std::invalid_argument("init_recurrent_tagger: sizes must be positive");
  }
  params.create(prefix + ".emb.word", normal_init({word_vocab_size, config.word_dim}, 0.1, rng));
  params.create(prefix + ".emb.char", normal_init({char_vocab_size, config.char_dim}, 0.1, rng));
  init_lstm_params(params, prefix + ".char.fwd", config.char_dim, config.char_hidden, rng);
  init_lstm_params(params, prefix + ".char.bwd", config.char_dim, config.char_hidden, rng);
  init_bilstm(params, prefix + ".lstm", config.word_repr_dim(), config.hidden, config.layers, rng);
  params.create(prefix + ".proj.w",
                glorot_uniform({num_tags, 2 * config.hidden}, 2 * config.hidden, num_tags, rng));
  params.create(prefix + ".proj.b", Tensor::zeros({num_tags}));
  int states = crf_num_states(num_tags);
  params.create(prefix + ".crf.trans", Tensor::zeros({states, states}));
}

Var assemble_word_repr(Tape& tape, ParamStore& params, const std::string& prefix,
                       const RecurrentConfig& config, int word_id,
                       const std::vector<int>& char_ids) {
  Var word_table = tape.param(params.get(prefix + ".emb.word"));
  Var word_vec = row(word_table, word_id);

  Var char_repr;
  if (char_ids.empty()) {
    char_repr = tape.input(Tensor::zeros({2 * config.char_hidden}));
  } else {
    Var char_table = tape.param(params.get(prefix + ".emb.char"));
    std::vector<Var> cvecs;
    cvecs.reserve(char_ids.size());
    for (int id : char_ids) cvecs.push_back(row(char_table, id));
    auto fwd = lstm_run(tape, params, prefix + ".char.fwd", cvecs, false);
    auto bwd = lstm_run(tape, params, prefix + ".char.bwd", cvecs, true);
    char_repr = concat(fwd.back(), bwd.front());
  }
  return dropout(concat(word_vec, char_repr), config.dropout);
}

std::vector<Var> recurrent_emissions(Tape& tape, ParamStore& params, const std::string& prefix,
                                     const RecurrentConfig& config, const WordVocab& words,
                                     const CharVocab& chars,
                                     const std::vector<std::string>& sentence) {
  if (sentence.empty()) throw std::invalid_argument("recurrent_emissions: empty sentence");
  std::vector<Var> reprs;
  reprs.reserve(sentence.size());
  for (const auto& w : sentence) {
    reprs.push_back(
        assemble_word_repr(tape, params, prefix, config, words.id(w), chars.encode(w)));
  }
  auto states = bilstm_forward(tape, params, prefix + ".lstm", reprs, config.layers);
  Var w = tape.param(params.get(prefix + ".proj.w"));
  Var b = tape.param(params.get(prefix + ".proj.b"));
  std::vector<Var> emissions;
  emissions.reserve(states.size());
  for (Var s : states) emissions.push_back(add(matvec(w, s), b));
  return emissions;
}

// ---------------------------------------------------------------------------
// CRF
// ---------------------------------------------------------------------------

namespace {

int crf_check(const std::vector<Var>& emissions, const Var& transitions) {
  if (emissions.empty()) throw std::invalid_argument("crf: empty emission sequence");
  Tape* tape = transitions.tape;
  int num_tags = static_cast<int>(tape->val(emissions[0]).size());
  for (const Var& e : emissions) {
    if (static_cast<int>(tape->val(e).size()) != num_tags) {
      throw std::invalid_argument("crf: ragged emission widths");
    }
  }
  const Tensor& t = tape->val(transitions);
  int states = crf_num_states(num_tags);
  if (t.dim() != 2 || t.rows() != states || t.cols() != states) {
    throw std::invalid_argument("crf: transition shape " + t.shape_str() + " does not match " +
                                std::to_string(states) + " states");
  }
  return num_tags;
}

}  // namespace

Var crf_path_score(Tape& tape, const std::vector<Var>& emissions, Var transitions,
                   const std::vector<int>& tags) {
  (void)tape;
  int num_tags = crf_check(emissions, transitions);
  if (tags.size() != emissions.size()) {
    throw std::invalid_argument("crf_path_score: " + std::to_string(tags.size()) + " tags for " +
                                std::to_string(emissions.size()) + " positions");
  }
  for (int y : tags) {
    if (y < 0 || y >= num_tags) throw std::invalid_argument("crf_path_score: tag id out of range");
  }
  const int states = crf_num_states(num_tags);
  std::vector<Var> terms;
  int prev = crf_start_state(num_tags);
  for (std::size_t t = 0; t < tags.size(); ++t) {
    terms.push_back(pick(transitions, prev * states + tags[t]));
    terms.push_back(pick(emissions[t], tags[t]));
    prev = tags[t];
  }
  terms.push_back(pick(transitions, prev * states + crf_stop_state(num_tags)));
  return sum(concat(terms));
}

Var crf_log_z(Tape& tape, const std::vector<Var>& emissions, Var transitions) {
  int num_tags = crf_check(emissions, transitions);
  Var start_row = slice(row(transitions, crf_start_state(num_tags)), 0, num_tags);
  Var alpha = add(start_row, emissions[0]);

  std::vector<Var> into_tag(num_tags);  // transition column k restricted to real tags
  for (int k = 0; k < num_tags; ++k) into_tag[k] = slice(col(transitions, k), 0, num_tags);

  for (std::size_t t = 1; t < emissions.size(); ++t) {
    std::vector<Var> next(num_tags);
    for (int k = 0; k < num_tags; ++k) next[k] = log_sum_exp(add(alpha, into_tag[k]));
    alpha = add(concat(next), emissions[t]);
  }
  Var stop_col = slice(col(transitions, crf_stop_state(num_tags)), 0, num_tags);
  (void)tape;
  return log_sum_exp(add(alpha, stop_col));
}

Var crf_nll(Tape& tape, const std::vector<Var>& emissions, Var transitions,
            const std::vector<int>& gold) {
  return sub(crf_log_z(tape, emissions, transitions),
             crf_path_score(tape, emissions, transitions, gold));
}

std::vector<int> crf_viterbi(const Tensor& emissions, const Tensor& transitions) {
  if (emissions.dim() != 2 || emissions.rows() < 1) {
    throw std::invalid_argument("crf_viterbi: emissions must be [T x K], got " +
                                emissions.shape_str());
  }
  const int T = emissions.rows();
  const int K = emissions.cols();
  const int states = crf_num_states(K);
  if (transitions.dim() != 2 || transitions.rows() != states || transitions.cols() != states) {
    throw std::invalid_argument("crf_viterbi: transition shape " + transitions.shape_str() +
                                " does not match " + std::to_string(states) + " states");
  }
  const int start = crf_start_state(K);
  const int stop = crf_stop_state(K);

  std::vector<double> delta(K);
  std::vector<std::vector<int>> back(T, std::vector<int>(K, -1));
  for (int k = 0; k < K; ++k) delta[k] = transitions.at(start, k) + emissions.at(0, k);
  for (int t = 1; t < T; ++t) {
    std::vector<double> next(K);
    for (int k = 0; k < K; ++k) {
      int best_j = 0;
      double best = delta[0] + transitions.at(0, k);
      for (int j = 1; j < K; ++j) {
        double s = delta[j] + transitions.at(j, k);
        if (s > best) {  // strict, so ties keep the lower source index
          best = s;
          best_j = j;
        }
      }
      next[k] = best + emissions.at(t, k);
      back[t][k] = best_j;
    }
    delta = std::move(next);
  }
  int best_k = 0;
  double best = delta[0] + transitions.at(0, stop);
  for (int k = 1; k < K; ++k) {
    double s = delta[k] + transitions.at(k, stop);
    if (s > best) {
      best = s;
      best_k = k;
    }
  }
  std::vector<int> path(T);
  path[T - 1] = best_k;
  for (int t = T - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
  return path;
}

// ---------------------------------------------------------------------------
// Transformer
// ---------------------------------------------------------------------------

void TransformerConfig::validate() const {
  if (layers <= 0 || dim <= 0 || heads <= 0 || ff_dim <= 0 || max_positions <= 0 ||
      vocab_size <= 0) {
    throw std::invalid_argument("transformer config: dimensions must be positive");
  }
  if (dim % heads != 0) {
    throw std::invalid_argument("transformer config: dim " + std::to_string(dim) +
                                " not divisible by heads " + std::to_string(heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("transformer config: dropout must lie in [0, 1)");
  }
}

void init_transformer(ParamStore& params, const std::string& prefix,
                      const TransformerConfig& config, Rng& rng) {
  config.validate();
  const double sd = 0.02;
  params.create(prefix + ".tok_emb", normal_init({config.vocab_size, config.dim}, sd, rng));
  params.create(prefix + ".pos_emb", normal_init({config.max_positions, config.dim}, sd, rng));
  params.create(prefix + ".emb_ln.gamma", ones(config.dim));
  params.create(prefix + ".emb_ln.beta", Tensor::zeros({config.dim}));
  for (int l = 0; l < config.layers; ++l) {
    std::string base = prefix + ".l" + std::to_string(l);
    for (const char* w : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"}) {
      params.create(base + w, normal_init({config.dim, config.dim}, sd, rng));
    }
    for (const char* b : {".attn.bq", ".attn.bk", ".attn.bv", ".attn.bo"}) {
      params.create(base + b, Tensor::zeros({config.dim}));
    }
    params.create(base + ".ln1.gamma", ones(config.dim));
    params.create(base + ".ln1.beta", Tensor::zeros({config.dim}));
    params.create(base + ".ffn.w1", normal_init({config.dim, config.ff_dim}, sd, rng));
    params.create(base + ".ffn.b1", Tensor::zeros({config.ff_dim}));
    params.create(base + ".ffn.w2", normal_init({config.ff_dim, config.dim}, sd, rng));
    params.create(base + ".ffn.b2", Tensor::zeros({config.dim}));
    params.create(base + ".ln2.gamma", ones(config.dim));
    params.create(base + ".ln2.beta", Tensor::zeros({config.dim}));
  }
}

std::vector<Var> transformer_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                                     const TransformerConfig& config,
                                     const std::vector<int>& piece_ids,
                                     const std::vector<unsigned char>* keep) {
  config.validate();
  const int T = static_cast<int>(piece_ids.size());
  if (T == 0) throw std::invalid_argument("transformer_forward: empty piece sequence");
  if (T > config.max_positions) {
    throw std::invalid_argument("transformer_forward: sequence of " + std::to_string(T) +
                                " pieces exceeds max_positions " +
                                std::to_string(config.max_positions) + "; split the input first");
  }
  for (int id : piece_ids) {
    if (id < 0 || id >= config.vocab_size) {
      throw std::invalid_argument("transformer_forward: piece id " + std::to_string(id) +
                                  " outside vocab of " + std::to_string(config.vocab_size));
    }
  }
  if (keep && static_cast<int>(keep->size()) != T) {
    throw std::invalid_argument("transformer_forward: mask length " +
                                std::to_string(keep->size()) + " does not match sequence length " +
                                std::to_string(T));
  }

  auto p = [&](const std::string& name) { return tape.param(params.get(prefix + name)); };

  Var x = add(embedding_lookup(p(".tok_emb"), piece_ids),
              gather_rows(p(".pos_emb"), iota(T)));
  x = layer_norm_rows(x, p(".emb_ln.gamma"), p(".emb_ln.beta"));
  x = dropout(x, config.dropout);

  const int dh = config.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outputs;
  outputs.reserve(config.layers);
  for (int l = 0; l < config.layers; ++l) {
    std::string base = ".l" + std::to_string(l);
    Var q = add_rowwise(matmul(x, p(base + ".attn.wq")), p(base + ".attn.bq"));
    Var k = add_rowwise(matmul(x, p(base + ".attn.wk")), p(base + ".attn.bk"));
    Var v = add_rowwise(matmul(x, p(base + ".attn.wv")), p(base + ".attn.bv"));
    std::vector<Var> heads;
    heads.reserve(config.heads);
    for (int a = 0; a < config.heads; ++a) {
      Var qa = slice_cols(q, a * dh, dh);
      Var ka = slice_cols(k, a * dh, dh);
      Var va = slice_cols(v, a * dh, dh);
      Var scores = scale(matmul(qa, ka, false, true), inv_sqrt_dh);
      Var probs = softmax_rows(scores, keep);
      heads.push_back(matmul(probs, va));
    }
    Var attn = add_rowwise(matmul(concat_cols(heads), p(base + ".attn.wo")), p(base + ".attn.bo"));
    attn = dropout(attn, config.dropout);
    x = layer_norm_rows(add(x, attn), p(base + ".ln1.gamma"), p(base + ".ln1.beta"));

    Var h1 = gelu(add_rowwise(matmul(x, p(base + ".ffn.w1")), p(base + ".ffn.b1")));
    Var h2 = add_rowwise(matmul(h1, p(base + ".ffn.w2")), p(base + ".ffn.b2"));
    h2 = dropout(h2, config.dropout);
    x = layer_norm_rows(add(x, h2), p(base + ".ln2.gamma"), p(base + ".ln2.beta"));
    outputs.push_back(x);
  }
  return outputs;
}

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

void init_linear_head(ParamStore& params, const std::string& prefix, int input_dim,
                      int num_classes, Rng& rng) {
  if (input_dim <= 0 || num_classes <= 0) {
    throw std::invalid_argument("init_linear_head: sizes must be positive");
  }
  params.create(prefix + ".w", glorot_uniform({num_classes, input_dim}, input_dim, num_classes, rng));
  params.create(prefix + ".b", Tensor::zeros({num_classes}));
}

Var linear_head(Tape& tape, ParamStore& params, const std::string& prefix, Var features) {
  Var w = tape.param(params.get(prefix + ".w"));
  Var b = tape.param(params.get(prefix + ".b"));
  return add_rowwise(matmul(features, w, false, true), b);
}

void init_bilstm_head(ParamStore& params, const std::string& prefix, int input_dim,
                      int num_classes, Rng& rng) {
  if (input_dim <= 0 || input_dim % 2 != 0) {
    throw std::invalid_argument("init_bilstm_head: input_dim must be positive and even, got " +
                                std::to_string(input_dim));
  }
  init_bilstm(params, prefix + ".lstm", input_dim, input_dim / 2, 1, rng);
  init_linear_head(params, prefix + ".out", input_dim, num_classes, rng);
}

Var bilstm_head(Tape& tape, ParamStore& params, const std::string& prefix, Var features) {
  const Tensor& f = tape.val(features);
  if (f.dim() != 2) {
    throw std::invalid_argument("bilstm_head: features must be [T x D], got " + f.shape_str());
  }
  std::vector<Var> inputs;
  inputs.reserve(f.rows());
  for (int t = 0; t < f.rows(); ++t) inputs.push_back(row(features, t));
  auto states = bilstm_forward(tape, params, prefix + ".lstm", inputs, 1);
  return linear_head(tape, params, prefix + ".out", stack_rows(states));
}

Var concat_last_layers(const std::vector<Var>& layer_outputs, int use_layers) {
  if (layer_outputs.empty()) throw std::invalid_argument("concat_last_layers: no layer outputs");
  if (use_layers <= 0) throw std::invalid_argument("concat_last_layers: use_layers must be positive");
  int take = std::min<int>(use_layers, static_cast<int>(layer_outputs.size()));
  std::vector<Var> parts(layer_outputs.end() - take, layer_outputs.end());
  return concat_cols(parts);
}

Var token_cross_entropy(Tape& tape, Var logits, const std::vector<int>& gold,
                        const std::vector<unsigned char>& supervised) {
  const Tensor& l = tape.val(logits);
  if (l.dim() != 2) {
    throw std::invalid_argument("token_cross_entropy: logits must be [T x K], got " +
                                l.shape_str());
  }
  const int T = l.rows();
  const int K = l.cols();
  if (static_cast<int>(gold.size()) != T || static_cast<int>(supervised.size()) != T) {
    throw std::invalid_argument("token_cross_entropy: expected " + std::to_string(T) +
                                " labels and flags, got " + std::to_string(gold.size()) + " and " +
                                std::to_string(supervised.size()));
  }
  Var log_probs = log_softmax_rows(logits);
  std::vector<Var> picked;
  for (int t = 0; t < T; ++t) {
    if (!supervised[t]) continue;
    if (gold[t] < 0 || gold[t] >= K) {
      throw std::invalid_argument("token_cross_entropy: label id " + std::to_string(gold[t]) +
                                  " outside " + std::to_string(K) + " classes");
    }
    picked.push_back(pick(log_probs, t * K + gold[t]));
  }
  if (picked.empty()) throw std::invalid_argument("token_cross_entropy: no supervised positions");
  return scale(sum(concat(picked)), -1.0 / static_cast<double>(picked.size()));
}

// ---------------------------------------------------------------------------
// Dual encoder
// ---------------------------------------------------------------------------

DualInput make_dual_input(const std::vector<std::string>& words, const SubwordVocab& first_vocab,
                          const SubwordVocab& second_vocab, const TransformerConfig& first_config,
                          const TransformerConfig& second_config) {
  if (words.empty()) throw std::invalid_argument("make_dual_input: empty sentence");
  DualInput in;
  auto a = tokenize_words(words, first_vocab);
  auto b = tokenize_words(words, second_vocab);
  in.first_ids = a.piece_ids(first_vocab);
  in.second_ids = b.piece_ids(second_vocab);
  in.first_word_rows = a.first_piece_positions();
  in.second_word_rows = b.first_piece_positions();
  in.num_words = static_cast<int>(words.size());
  if (static_cast<int>(in.first_ids.size()) > first_config.max_positions ||
      static_cast<int>(in.second_ids.size()) > second_config.max_positions) {
    throw std::invalid_argument("make_dual_input: piece sequence exceeds an encoder budget (" +
                                std::to_string(in.first_ids.size()) + " and " +
                                std::to_string(in.second_ids.size()) + " pieces); split the input");
  }
  return in;
}

void init_dual_encoder(ParamStore& params, const std::string& prefix,
                       const TransformerConfig& first_config,
                       const TransformerConfig& second_config, int num_classes, Rng& rng) {
  init_transformer(params, prefix + ".first", first_config, rng);
  init_transformer(params, prefix + ".second", second_config, rng);
  init_linear_head(params, prefix + ".head", first_config.dim + second_config.dim, num_classes,
                   rng);
}

Var dual_encoder_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                         const TransformerConfig& first_config,
                         const TransformerConfig& second_config, const DualInput& input) {
  if (input.num_words <= 0) throw std::invalid_argument("dual_encoder_forward: empty input");
  auto first_layers =
      transformer_forward(tape, params, prefix + ".first", first_config, input.first_ids);
  auto second_layers =
      transformer_forward(tape, params, prefix + ".second", second_config, input.second_ids);
  Var first_words = gather_rows(first_layers.back(), input.first_word_rows);
  Var second_words = gather_rows(second_layers.back(), input.second_word_rows);
  Var features = concat_cols({first_words, second_words});
  return linear_head(tape, params, prefix + ".head", features);
}

}  // namespace medtag
