#include "medtag/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace medtag {

// ---------------------------------------------------------------------------
// Tag maps and model kinds
// ---------------------------------------------------------------------------

TagMap TagMap::from_scheme(const LabelScheme& scheme) { return from_tags(scheme.iob_tags()); }

TagMap TagMap::piece_space(const LabelScheme& scheme) {
  auto tags = scheme.iob_tags();
  tags.push_back(kPaddingTag);
  return from_tags(std::move(tags));
}

TagMap TagMap::from_tags(std::vector<std::string> tags) {
  TagMap m;
  for (auto& t : tags) {
    if (m.index.count(t)) throw std::invalid_argument("tag map: duplicate tag '" + t + "'");
    m.index[t] = static_cast<int>(m.tags.size());
    m.tags.push_back(std::move(t));
  }
  return m;
}

int TagMap::id(const std::string& tag) const {
  auto it = index.find(tag);
  if (it == index.end()) throw std::invalid_argument("tag map: unknown tag '" + tag + "'");
  return it->second;
}

const std::string& TagMap::name(int id) const {
  if (id < 0 || id >= static_cast<int>(tags.size())) {
    throw std::invalid_argument("tag map: id " + std::to_string(id) + " outside " +
                                std::to_string(tags.size()) + " tags");
  }
  return tags[id];
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::recurrent_crf: return "recurrent_crf";
    case ModelKind::encoder_linear: return "encoder_linear";
    case ModelKind::encoder_recurrent: return "encoder_recurrent";
    case ModelKind::dual_encoder: return "dual_encoder";
  }
  throw std::logic_error("unreachable model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "recurrent_crf") return ModelKind::recurrent_crf;
  if (s == "encoder_linear") return ModelKind::encoder_linear;
  if (s == "encoder_recurrent") return ModelKind::encoder_recurrent;
  if (s == "dual_encoder") return ModelKind::dual_encoder;
  throw std::invalid_argument("unknown model kind '" + s +
                              "' (expected recurrent_crf, encoder_linear, encoder_recurrent, or "
                              "dual_encoder)");
}

// ---------------------------------------------------------------------------
// Tagger assembly
// ---------------------------------------------------------------------------

namespace {

int head_input_dim(const TransformerConfig& cfg) {
  return cfg.dim * std::min(4, cfg.layers);
}

}  // namespace

Tagger build_tagger(const TaggerConfig& config, const LabelScheme& scheme,
                    const std::vector<LabeledSequence>& train, std::uint64_t seed,
                    SubwordVocab subwords, SubwordVocab second_subwords) {
  Tagger t;
  t.config = config;
  t.scheme = scheme;
  t.word_tags = TagMap::from_scheme(scheme);
  t.piece_labels = TagMap::piece_space(scheme);
  t.seed = seed;
  Rng init_rng(derive_seed(seed, "init"));

  switch (config.kind) {
    case ModelKind::recurrent_crf: {
      std::vector<std::vector<std::string>> token_seqs;
      token_seqs.reserve(train.size());
      for (const auto& s : train) token_seqs.push_back(s.tokens);
      t.words = WordVocab::build(token_seqs);
      t.chars = CharVocab::build(token_seqs);
      init_recurrent_tagger(t.params, "m", config.recurrent, static_cast<int>(t.words.size()),
                            static_cast<int>(t.chars.size()),
                            static_cast<int>(t.word_tags.size()), init_rng);
      break;
    }
    case ModelKind::encoder_linear:
    case ModelKind::encoder_recurrent: {
      if (subwords.pieces.empty()) {
        throw std::invalid_argument("build_tagger: encoder models need a subword vocabulary");
      }
      t.subwords = std::move(subwords);
      t.config.encoder.vocab_size = static_cast<int>(t.subwords.size());
      init_transformer(t.params, "enc", t.config.encoder, init_rng);
      int classes = static_cast<int>(t.piece_labels.size());
      if (config.kind == ModelKind::encoder_linear) {
        init_linear_head(t.params, "head", t.config.encoder.dim, classes, init_rng);
      } else {
        init_bilstm_head(t.params, "head", head_input_dim(t.config.encoder), classes, init_rng);
      }
      break;
    }
    case ModelKind::dual_encoder: {
      if (subwords.pieces.empty() || second_subwords.pieces.empty()) {
        throw std::invalid_argument("build_tagger: dual encoder needs both subword vocabularies");
      }
      t.subwords = std::move(subwords);
      t.second_subwords = std::move(second_subwords);
      t.config.encoder.vocab_size = static_cast<int>(t.subwords.size());
      t.config.second_encoder.vocab_size = static_cast<int>(t.second_subwords.size());
      init_dual_encoder(t.params, "dual", t.config.encoder, t.config.second_encoder,
                        static_cast<int>(t.word_tags.size()), init_rng);
      break;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Training windows: the unit a batch is made of. The recurrent path takes
// whole sentences; encoder paths chop sentences into piece-budget windows.
// ---------------------------------------------------------------------------

namespace {

struct Window {
  int seq = 0;
  int begin = 0;
  int end = 0;
};

std::vector<std::pair<int, int>> dual_ranges(const std::vector<std::string>& words,
                                             const SubwordVocab& va, const SubwordVocab& vb,
                                             int budget_a, int budget_b) {
  std::vector<std::pair<int, int>> ranges;
  int start = 0, used_a = 0, used_b = 0;
  for (int w = 0; w < static_cast<int>(words.size()); ++w) {
    int ca = static_cast<int>(wordpiece_tokenize(words[w], va).size());
    int cb = static_cast<int>(wordpiece_tokenize(words[w], vb).size());
    if (w > start && (used_a + ca > budget_a || used_b + cb > budget_b)) {
      ranges.emplace_back(start, w);
      start = w;
      used_a = used_b = 0;
    }
    used_a += ca;
    used_b += cb;
    if ((used_a > budget_a || used_b > budget_b) && w == start) {
      ranges.emplace_back(w, w + 1);
      start = w + 1;
      used_a = used_b = 0;
    }
  }
  if (start < static_cast<int>(words.size())) {
    ranges.emplace_back(start, static_cast<int>(words.size()));
  }
  return ranges;
}

std::vector<Window> make_windows(const Tagger& t, const std::vector<LabeledSequence>& data) {
  std::vector<Window> out;
  for (int i = 0; i < static_cast<int>(data.size()); ++i) {
    const auto& tokens = data[i].tokens;
    if (tokens.empty()) continue;
    if (data[i].tags.size() != tokens.size()) {
      throw std::invalid_argument("training data: sequence " + std::to_string(i) + " has " +
                                  std::to_string(tokens.size()) + " tokens but " +
                                  std::to_string(data[i].tags.size()) + " tags");
    }
    switch (t.config.kind) {
      case ModelKind::recurrent_crf:
        out.push_back({i, 0, static_cast<int>(tokens.size())});
        break;
      case ModelKind::encoder_linear:
      case ModelKind::encoder_recurrent: {
        for (auto [b, e] :
             split_by_piece_budget(tokens, t.subwords, t.config.encoder.max_positions)) {
          out.push_back({i, b, e});
        }
        break;
      }
      case ModelKind::dual_encoder: {
        for (auto [b, e] :
             dual_ranges(tokens, t.subwords, t.second_subwords,
                         t.config.encoder.max_positions, t.config.second_encoder.max_positions)) {
          out.push_back({i, b, e});
        }
        break;
      }
    }
  }
  return out;
}

template <class T>
std::vector<T> slice_range(const std::vector<T>& v, int begin, int end) {
  return std::vector<T>(v.begin() + begin, v.begin() + end);
}

Var window_loss(const Tagger& t, Tape& tape, const LabeledSequence& seq, const Window& w) {
  auto words = slice_range(seq.tokens, w.begin, w.end);
  auto tags = slice_range(seq.tags, w.begin, w.end);
  // ParamStore access is logically const here; the tape only reads values.
  auto& params = const_cast<ParamStore&>(t.params);

  switch (t.config.kind) {
    case ModelKind::recurrent_crf: {
      auto emissions =
          recurrent_emissions(tape, params, "m", t.config.recurrent, t.words, t.chars, words);
      std::vector<int> gold;
      gold.reserve(tags.size());
      for (const auto& tag : tags) gold.push_back(t.word_tags.id(tag));
      return crf_nll(tape, emissions, tape.param(params.get("m.crf.trans")), gold);
    }
    case ModelKind::encoder_linear:
    case ModelKind::encoder_recurrent: {
      auto alignment = tokenize_words(words, t.subwords);
      auto piece_tags = align_labels(tags, alignment);
      std::vector<int> gold;
      gold.reserve(piece_tags.size());
      for (const auto& tag : piece_tags) gold.push_back(t.piece_labels.id(tag));
      auto outs = transformer_forward(tape, params, "enc", t.config.encoder,
                                      alignment.piece_ids(t.subwords));
      Var logits = t.config.kind == ModelKind::encoder_linear
                       ? linear_head(tape, params, "head", outs.back())
                       : bilstm_head(tape, params, "head", concat_last_layers(outs, 4));
      // Only word-initial pieces carry supervision; continuations are padding.
      return token_cross_entropy(tape, logits, gold, alignment.is_first_piece);
    }
    case ModelKind::dual_encoder: {
      auto input = make_dual_input(words, t.subwords, t.second_subwords, t.config.encoder,
                                   t.config.second_encoder);
      Var logits = dual_encoder_forward(tape, params, "dual", t.config.encoder,
                                        t.config.second_encoder, input);
      std::vector<int> gold;
      gold.reserve(tags.size());
      for (const auto& tag : tags) gold.push_back(t.word_tags.id(tag));
      return token_cross_entropy(tape, logits, gold,
                                 std::vector<unsigned char>(tags.size(), 1));
    }
  }
  throw std::logic_error("unreachable model kind");
}

int argmax_row(const Tensor& m, int r) {
  int best = 0;
  for (int c = 1; c < m.cols(); ++c) {
    if (m.at(r, c) > m.at(r, best)) best = c;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

std::vector<std::string> predict_tags(const Tagger& t, const std::vector<std::string>& words) {
  if (words.empty()) return {};
  auto& params = const_cast<ParamStore&>(t.params);
  std::vector<std::string> out;
  out.reserve(words.size());

  switch (t.config.kind) {
    case ModelKind::recurrent_crf: {
      Tape tape;
      auto emissions =
          recurrent_emissions(tape, params, "m", t.config.recurrent, t.words, t.chars, words);
      Tensor emis = Tensor::zeros({static_cast<int>(words.size()),
                                   static_cast<int>(t.word_tags.size())});
      for (int i = 0; i < emis.rows(); ++i) {
        const Tensor& e = tape.val(emissions[i]);
        for (int k = 0; k < emis.cols(); ++k) emis.at(i, k) = e.data[k];
      }
      for (int y : crf_viterbi(emis, params.get("m.crf.trans").value)) {
        out.push_back(t.word_tags.name(y));
      }
      return out;
    }
    case ModelKind::encoder_linear:
    case ModelKind::encoder_recurrent: {
      for (auto [b, e] :
           split_by_piece_budget(words, t.subwords, t.config.encoder.max_positions)) {
        auto window = slice_range(words, b, e);
        auto alignment = tokenize_words(window, t.subwords);
        Tape tape;
        auto outs = transformer_forward(tape, params, "enc", t.config.encoder,
                                        alignment.piece_ids(t.subwords));
        Var logits = t.config.kind == ModelKind::encoder_linear
                         ? linear_head(tape, params, "head", outs.back())
                         : bilstm_head(tape, params, "head", concat_last_layers(outs, 4));
        const Tensor& l = tape.val(logits);
        std::vector<std::string> piece_tags;
        piece_tags.reserve(l.rows());
        for (int r = 0; r < l.rows(); ++r) piece_tags.push_back(t.piece_labels.name(argmax_row(l, r)));
        for (auto& tag : collapse_predictions(piece_tags, alignment)) out.push_back(std::move(tag));
      }
      return out;
    }
    case ModelKind::dual_encoder: {
      for (auto [b, e] :
           dual_ranges(words, t.subwords, t.second_subwords, t.config.encoder.max_positions,
                       t.config.second_encoder.max_positions)) {
        auto window = slice_range(words, b, e);
        auto input = make_dual_input(window, t.subwords, t.second_subwords, t.config.encoder,
                                     t.config.second_encoder);
        Tape tape;
        Var logits = dual_encoder_forward(tape, params, "dual", t.config.encoder,
                                          t.config.second_encoder, input);
        const Tensor& l = tape.val(logits);
        for (int r = 0; r < l.rows(); ++r) out.push_back(t.word_tags.name(argmax_row(l, r)));
      }
      return out;
    }
  }
  throw std::logic_error("unreachable model kind");
}

std::vector<std::vector<std::string>> predict_tags(const Tagger& t,
                                                   const std::vector<LabeledSequence>& data) {
  std::vector<std::vector<std::string>> out;
  out.reserve(data.size());
  for (const auto& seq : data) out.push_back(predict_tags(t, seq.tokens));
  return out;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

std::vector<Batch> make_batches(const std::vector<std::vector<int>>& id_sequences, int batch_size,
                                int pad_id, Rng& rng) {
  if (batch_size <= 0) throw std::invalid_argument("make_batches: batch_size must be positive");
  std::vector<int> order(id_sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    Batch b;
    std::size_t end = std::min(order.size(), at + batch_size);
    for (std::size_t i = at; i < end; ++i) {
      int idx = order[i];
      b.members.push_back(idx);
      b.lengths.push_back(static_cast<int>(id_sequences[idx].size()));
      b.max_len = std::max(b.max_len, b.lengths.back());
    }
    for (std::size_t i = 0; i < b.members.size(); ++i) {
      const auto& ids = id_sequences[b.members[i]];
      std::vector<int> padded(b.max_len, pad_id);
      std::vector<unsigned char> mask(b.max_len, 0);
      std::copy(ids.begin(), ids.end(), padded.begin());
      std::fill(mask.begin(), mask.begin() + ids.size(), 1);
      b.padded_ids.push_back(std::move(padded));
      b.mask.push_back(std::move(mask));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

TrainOptions default_train_options(ModelKind kind) {
  TrainOptions o;
  if (kind == ModelKind::recurrent_crf) {
    o.optim.peak_lr = 0.001;
    o.optim.batch_size = 32;
    o.optim.epochs = 10;
    o.optim.weight_decay = 0.0;
    o.lr_policy = LrPolicy::constant;
    o.clip_norm = 5.0;
  } else {
    o.optim.peak_lr = 3e-5;
    o.optim.batch_size = 32;
    o.optim.epochs = 3;
    o.optim.weight_decay = 0.01;
    o.lr_policy = LrPolicy::warmup_linear;
    o.clip_norm = 0.0;
  }
  return o;
}

namespace {

double global_grad_norm(const ParamStore& params) {
  double acc = 0.0;
  for (const auto* p : params.all()) {
    for (double g : p->grad.data) acc += g * g;
  }
  return std::sqrt(acc);
}

void clip_gradients(ParamStore& params, double clip_norm, double norm) {
  if (clip_norm <= 0.0 || norm <= clip_norm) return;
  double s = clip_norm / norm;
  for (auto* p : params.all()) {
    for (double& g : p->grad.data) g *= s;
  }
}

}  // namespace

double batch_loss_value(const Tagger& tagger, const std::vector<LabeledSequence>& data,
                        const std::vector<int>& members) {
  if (members.empty()) throw std::invalid_argument("batch_loss_value: empty batch");
  Tape tape;
  std::vector<Var> losses;
  for (int m : members) {
    Window w{m, 0, static_cast<int>(data.at(m).tokens.size())};
    losses.push_back(window_loss(tagger, tape, data.at(m), w));
  }
  Var mean = scale(sum(concat(losses)), 1.0 / static_cast<double>(losses.size()));
  return tape.val(mean).data[0];
}

TrainResult train(Tagger& tagger, const std::vector<LabeledSequence>& train_data,
                  const std::vector<LabeledSequence>& dev_data, const TrainOptions& options) {
  options.optim.validate();
  if (options.clip_norm < 0.0) {
    throw std::invalid_argument("train: clip_norm must be non-negative");
  }
  auto windows = make_windows(tagger, train_data);
  if (windows.empty()) throw std::invalid_argument("train: no non-empty training sentences");

  const int N = static_cast<int>(windows.size());
  const int B = options.optim.batch_size;
  const int steps_per_epoch = (N + B - 1) / B;
  const int total_steps = options.optim.epochs * steps_per_epoch;

  std::vector<std::vector<std::string>> dev_gold;
  for (const auto& s : dev_data) dev_gold.push_back(s.tags);

  Rng shuffle_rng(derive_seed(options.seed, "shuffle"));
  Rng dropout_rng(derive_seed(options.seed, "dropout"));
  AdamOptimizer optimizer(options.optim);

  std::ofstream log;
  if (!options.log_path.empty()) {
    log.open(options.log_path);
    if (!log) throw std::runtime_error("cannot open " + options.log_path + " for writing");
  }

  TrainResult result;
  result.total_steps = total_steps;
  int step = 0;
  for (int epoch = 1; epoch <= options.optim.epochs; ++epoch) {
    std::vector<int> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    long long loss_count = 0;
    double last_lr = 0.0;
    for (int at = 0; at < N; at += B) {
      int end = std::min(N, at + B);
      Tape tape(true, &dropout_rng);
      std::vector<Var> losses;
      for (int i = at; i < end; ++i) {
        const Window& w = windows[order[i]];
        losses.push_back(window_loss(tagger, tape, train_data[w.seq], w));
      }
      Var batch_loss = scale(sum(concat(losses)), 1.0 / static_cast<double>(losses.size()));
      double loss_val = tape.val(batch_loss).data[0];
      ++step;
      if (!std::isfinite(loss_val)) {
        throw std::runtime_error("training halted: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", step " + std::to_string(step));
      }
      tagger.params.zero_grads();
      tape.backward(batch_loss);
      clip_gradients(tagger.params, options.clip_norm, global_grad_norm(tagger.params));
      last_lr = options.lr_policy == LrPolicy::constant
                    ? options.optim.peak_lr
                    : lr_schedule(step, total_steps, options.optim.peak_lr,
                                  options.optim.warmup_fraction);
      optimizer.step(tagger.params, last_lr);
      loss_sum += loss_val * static_cast<double>(losses.size());
      loss_count += static_cast<long long>(losses.size());
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(loss_count);
    entry.last_lr = last_lr;
    entry.steps_done = step;
    if (!dev_data.empty()) {
      entry.has_dev = true;
      auto preds = predict_tags(tagger, dev_data);
      auto scores = strict_score(dev_gold, preds);
      entry.dev_precision = scores.overall.precision();
      entry.dev_recall = scores.overall.recall();
      entry.dev_f1 = scores.overall.f1();
      if (result.best_epoch == 0 || entry.dev_f1 > result.best_dev_f1) {
        result.best_epoch = epoch;
        result.best_dev_f1 = entry.dev_f1;
        if (!options.checkpoint_path.empty()) save_checkpoint(tagger, options.checkpoint_path);
      }
    }
    result.epochs.push_back(entry);
    result.final_train_loss = entry.train_loss;

    if (log.is_open()) {
      nlohmann::json line = {{"epoch", entry.epoch},
                             {"train_loss", entry.train_loss},
                             {"lr", entry.last_lr},
                             {"steps", entry.steps_done},
                             {"total_steps", total_steps}};
      if (entry.has_dev) {
        line["dev_precision"] = entry.dev_precision;
        line["dev_recall"] = entry.dev_recall;
        line["dev_f1"] = entry.dev_f1;
      }
      log << line.dump() << '\n' << std::flush;
    }
  }

  if (dev_data.empty() && !options.checkpoint_path.empty()) {
    save_checkpoint(tagger, options.checkpoint_path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

CvResult kfold_cv(const TaggerConfig& config, const LabelScheme& scheme,
                  const std::vector<Document>& documents, const CvOptions& options,
                  SubwordVocab subwords, SubwordVocab second_subwords) {
  if (options.folds < 2) throw std::invalid_argument("kfold_cv: need at least 2 folds");
  if (static_cast<int>(documents.size()) < options.folds) {
    throw std::invalid_argument("kfold_cv: " + std::to_string(documents.size()) +
                                " documents cannot fill " + std::to_string(options.folds) +
                                " folds");
  }
  if (options.max_epochs < 1 || options.batch_sizes.empty() || options.lrs.empty()) {
    throw std::invalid_argument("kfold_cv: empty grid");
  }

  std::vector<int> doc_order(documents.size());
  for (std::size_t i = 0; i < doc_order.size(); ++i) doc_order[i] = static_cast<int>(i);
  Rng fold_rng(derive_seed(options.seed, "folds"));
  fold_rng.shuffle(doc_order);

  CvResult result;
  result.fold_documents.assign(options.folds, {});
  std::vector<int> doc_fold(documents.size());
  for (std::size_t i = 0; i < doc_order.size(); ++i) {
    int f = static_cast<int>(i) % options.folds;
    doc_fold[doc_order[i]] = f;
    result.fold_documents[f].push_back(doc_order[i]);
  }

  std::vector<LabeledSequence> sequences;
  sequences.reserve(documents.size());
  for (const auto& d : documents) sequences.push_back(document_to_sequence(d));

  // One training run per (batch, lr, fold) covers every epoch budget, since
  // held-out F1 is recorded after each epoch.
  struct RunKey {
    int batch;
    double lr;
  };
  std::vector<RunKey> runs;
  for (int b : options.batch_sizes) {
    for (double lr : options.lrs) runs.push_back({b, lr});
  }

  std::vector<std::vector<std::vector<double>>> f1(
      runs.size(), std::vector<std::vector<double>>(options.folds));
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (int fold = 0; fold < options.folds; ++fold) {
      std::vector<LabeledSequence> train_seqs, held_out;
      for (std::size_t d = 0; d < documents.size(); ++d) {
        (doc_fold[d] == fold ? held_out : train_seqs).push_back(sequences[d]);
      }
      TrainOptions to = options.train_template;
      to.optim.batch_size = runs[r].batch;
      to.optim.peak_lr = runs[r].lr;
      to.optim.epochs = options.max_epochs;
      to.log_path.clear();
      to.checkpoint_path.clear();
      to.seed = splitmix64(derive_seed(options.seed, "cv-run") ^
                           (static_cast<std::uint64_t>(r) << 16) ^
                           static_cast<std::uint64_t>(fold));
      Tagger tagger = build_tagger(config, scheme, train_seqs, to.seed, subwords, second_subwords);
      auto res = train(tagger, train_seqs, held_out, to);
      for (const auto& e : res.epochs) f1[r][fold].push_back(e.dev_f1);
    }
  }

  // Cells in preference order: fewer epochs, then smaller lr, then smaller
  // batch. Strictly-greater replacement keeps the preferred cell on ties.
  std::vector<int> batch_sorted = options.batch_sizes;
  std::sort(batch_sorted.begin(), batch_sorted.end());
  std::vector<double> lr_sorted = options.lrs;
  std::sort(lr_sorted.begin(), lr_sorted.end());

  bool first = true;
  for (int epochs = 1; epochs <= options.max_epochs; ++epochs) {
    for (double lr : lr_sorted) {
      for (int batch : batch_sorted) {
        std::size_t r = 0;
        while (r < runs.size() && !(runs[r].batch == batch && runs[r].lr == lr)) ++r;
        CvCell cell;
        cell.point = {batch, lr, epochs};
        double acc = 0.0;
        for (int fold = 0; fold < options.folds; ++fold) {
          double v = f1[r][fold][epochs - 1];
          cell.fold_f1.push_back(v);
          acc += v;
        }
        cell.mean_f1 = acc / options.folds;
        if (first || cell.mean_f1 > result.best_mean_f1) {
          first = false;
          result.best = cell.point;
          result.best_mean_f1 = cell.mean_f1;
        }
        result.table.push_back(std::move(cell));
      }
    }
  }
  return result;
}

}  // namespace medtag
