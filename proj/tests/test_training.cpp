#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "medtag/training.hpp"

using namespace medtag;

namespace {

LabelScheme animal_scheme() { return LabelScheme::from_types({"animal", "place"}); }

LabeledSequence make_seq(std::string id, std::vector<std::string> tokens,
                         std::vector<std::string> tags) {
  LabeledSequence s;
  s.doc_id = std::move(id);
  s.tokens = tokens;
  s.raw_tokens = std::move(tokens);
  s.tags = std::move(tags);
  return s;
}

std::vector<LabeledSequence> animal_data() {
  return {
      make_seq("d1", {"the", "cat", "sat"}, {"O", "B-animal", "O"}),
      make_seq("d2", {"a", "dog", "ran", "home"}, {"O", "B-animal", "O", "B-place"}),
      make_seq("d3", {"the", "dog", "sat", "down"}, {"O", "B-animal", "O", "O"}),
      make_seq("d4", {"a", "cat", "ran"}, {"O", "B-animal", "O"}),
      make_seq("d5", {"the", "park", "was", "big"}, {"O", "B-place", "O", "O"}),
      make_seq("d6", {"a", "park", "was", "near"}, {"O", "B-place", "O", "O"}),
  };
}

TaggerConfig tiny_recurrent() {
  TaggerConfig c;
  c.kind = ModelKind::recurrent_crf;
  c.recurrent.word_dim = 8;
  c.recurrent.char_dim = 4;
  c.recurrent.char_hidden = 3;
  c.recurrent.hidden = 6;
  c.recurrent.layers = 1;
  c.recurrent.dropout = 0.0;
  return c;
}

SubwordVocab toy_subwords() {
  return SubwordVocab::from_pieces({"[PAD]", "[UNK]", "the", "a", "cat", "dog", "sat", "ran",
                                    "park", "was", "big", "near", "home", "down"});
}

SubwordVocab char_subwords() {
  std::vector<std::string> pieces = {"[PAD]", "[UNK]"};
  for (char c = 'a'; c <= 'z'; ++c) {
    pieces.push_back(std::string(1, c));
    pieces.push_back("##" + std::string(1, c));
  }
  return SubwordVocab::from_pieces(std::move(pieces));
}

TransformerConfig tiny_encoder(int max_positions = 16) {
  TransformerConfig c;
  c.layers = 2;
  c.dim = 8;
  c.heads = 2;
  c.ff_dim = 16;
  c.max_positions = max_positions;
  c.dropout = 0.0;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("tag maps cover the scheme plus the padding class") {
  auto scheme = animal_scheme();
  REQUIRE(scheme.types == std::vector<std::string>{kUnknownType, "animal", "place"});

  auto word_tags = TagMap::from_scheme(scheme);
  CHECK(word_tags.size() == 7);
  CHECK(word_tags.tags[0] == "O");
  CHECK(word_tags.id("B-animal") == 3);
  for (std::size_t i = 0; i < word_tags.size(); ++i) {
    CHECK(word_tags.id(word_tags.name(static_cast<int>(i))) == static_cast<int>(i));
  }
  CHECK_THROWS_AS(word_tags.id("B-virus"), std::invalid_argument);
  CHECK_THROWS_AS(word_tags.name(7), std::invalid_argument);

  auto piece = TagMap::piece_space(scheme);
  CHECK(piece.size() == 8);
  CHECK(piece.tags.back() == kPaddingTag);
  CHECK(piece.id(kPaddingTag) == 7);

  CHECK_THROWS_AS(TagMap::from_tags({"O", "O"}), std::invalid_argument);
}

TEST_CASE("model kind names round trip") {
  for (auto k : {ModelKind::recurrent_crf, ModelKind::encoder_linear, ModelKind::encoder_recurrent,
                 ModelKind::dual_encoder}) {
    CHECK(model_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(model_kind_from_string("cnn"), std::invalid_argument);
}

TEST_CASE("batches shuffle, chunk, and pad to the batch maximum") {
  std::vector<std::vector<int>> seqs = {{1}, {2, 2}, {3, 3, 3}, {4}, {5, 5}, {6}, {7, 7, 7, 7}};
  Rng rng(9);
  auto batches = make_batches(seqs, 3, -1, rng);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].members.size() == 3);
  CHECK(batches[1].members.size() == 3);
  CHECK(batches[2].members.size() == 1);

  std::set<int> seen;
  for (const auto& b : batches) {
    int expect_max = 0;
    for (std::size_t i = 0; i < b.members.size(); ++i) {
      int m = b.members[i];
      seen.insert(m);
      CHECK(b.lengths[i] == static_cast<int>(seqs[m].size()));
      expect_max = std::max(expect_max, b.lengths[i]);
      REQUIRE(b.padded_ids[i].size() == static_cast<std::size_t>(b.max_len));
      REQUIRE(b.mask[i].size() == static_cast<std::size_t>(b.max_len));
      for (int pos = 0; pos < b.max_len; ++pos) {
        if (pos < b.lengths[i]) {
          CHECK(b.padded_ids[i][pos] == seqs[m][pos]);
          CHECK(b.mask[i][pos] == 1);
        } else {
          CHECK(b.padded_ids[i][pos] == -1);
          CHECK(b.mask[i][pos] == 0);
        }
      }
    }
    CHECK(b.max_len == expect_max);
  }
  CHECK(seen.size() == seqs.size());

  Rng rng2(9);
  auto again = make_batches(seqs, 3, -1, rng2);
  for (std::size_t i = 0; i < batches.size(); ++i) CHECK(again[i].members == batches[i].members);

  Rng rng3(9);
  CHECK_THROWS_AS(make_batches(seqs, 0, -1, rng3), std::invalid_argument);
}

TEST_CASE("batch loss equals the mean of single-sentence losses") {
  auto data = animal_data();

  SUBCASE("recurrent path") {
    auto tagger = build_tagger(tiny_recurrent(), animal_scheme(), data, 3);
    double batched = batch_loss_value(tagger, data, {0, 1, 2, 3});
    double singles = 0.0;
    for (int m : {0, 1, 2, 3}) singles += batch_loss_value(tagger, data, {m});
    CHECK(batched == doctest::Approx(singles / 4.0).epsilon(1e-10));
  }

  SUBCASE("encoder path") {
    TaggerConfig cfg;
    cfg.kind = ModelKind::encoder_linear;
    cfg.encoder = tiny_encoder();
    auto tagger = build_tagger(cfg, animal_scheme(), data, 3, toy_subwords());
    double batched = batch_loss_value(tagger, data, {0, 4, 5});
    double singles = 0.0;
    for (int m : {0, 4, 5}) singles += batch_loss_value(tagger, data, {m});
    CHECK(batched == doctest::Approx(singles / 3.0).epsilon(1e-10));
  }
}

TEST_CASE("training reduces the loss and reruns are bit-identical") {
  auto data = animal_data();
  TrainOptions opts = default_train_options(ModelKind::recurrent_crf);
  opts.optim.peak_lr = 0.02;
  opts.optim.batch_size = 2;
  opts.optim.epochs = 8;
  opts.seed = 11;

  auto run = [&](Tagger& t) { return train(t, data, {}, opts); };
  auto a = build_tagger(tiny_recurrent(), animal_scheme(), data, 7);
  auto b = build_tagger(tiny_recurrent(), animal_scheme(), data, 7);
  auto ra = run(a);
  auto rb = run(b);

  REQUIRE(ra.epochs.size() == 8);
  CHECK(ra.total_steps == 8 * 3);
  CHECK(ra.epochs.back().steps_done == 24);
  CHECK(ra.epochs.back().train_loss < ra.epochs.front().train_loss);
  CHECK(ra.best_epoch == 0);
  CHECK(ra.final_train_loss == ra.epochs.back().train_loss);

  for (std::size_t i = 0; i < ra.epochs.size(); ++i) {
    CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
  }
  for (const auto& seq : data) {
    CHECK(predict_tags(a, seq.tokens) == predict_tags(b, seq.tokens));
  }
  for (const auto* p : a.params.all()) {
    const auto& other = b.params.get(p->name);
    CHECK(p->value.data == other.value.data);
  }
}

TEST_CASE("dev scoring tracks the best epoch, the log, and the checkpoint") {
  auto data = animal_data();
  std::vector<LabeledSequence> train_set(data.begin(), data.begin() + 4);
  std::vector<LabeledSequence> dev_set(data.begin() + 4, data.end());

  std::string log_path = temp_path("medtag_train_log.jsonl");
  std::string ckpt_path = temp_path("medtag_best.ckpt");
  std::remove(log_path.c_str());
  std::remove(ckpt_path.c_str());

  TrainOptions opts = default_train_options(ModelKind::recurrent_crf);
  opts.optim.peak_lr = 0.05;
  opts.optim.batch_size = 2;
  opts.optim.epochs = 5;
  opts.seed = 3;
  opts.log_path = log_path;
  opts.checkpoint_path = ckpt_path;

  auto tagger = build_tagger(tiny_recurrent(), animal_scheme(), train_set, 5);
  auto res = train(tagger, train_set, dev_set, opts);

  REQUIRE(res.epochs.size() == 5);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& e : res.epochs) {
    REQUIRE(e.has_dev);
    if (e.dev_f1 > best) {
      best = e.dev_f1;
      best_epoch = e.epoch;
    }
  }
  CHECK(res.best_dev_f1 == best);
  CHECK(res.best_epoch == best_epoch);

  std::ifstream log(log_path);
  REQUIRE(log.good());
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    ++lines;
    CHECK(j.at("epoch") == lines);
    CHECK(j.count("train_loss") == 1);
    CHECK(j.count("lr") == 1);
    CHECK(j.count("dev_precision") == 1);
    CHECK(j.count("dev_recall") == 1);
    CHECK(j.count("dev_f1") == 1);
    CHECK(j.at("total_steps") == res.total_steps);
  }
  CHECK(lines == 5);

  auto restored = load_checkpoint(ckpt_path);
  std::vector<std::vector<std::string>> gold, pred;
  for (const auto& s : dev_set) {
    gold.push_back(s.tags);
    pred.push_back(predict_tags(restored, s.tokens));
  }
  CHECK(strict_score(gold, pred).overall.f1() == res.best_dev_f1);
}

TEST_CASE("warmup schedule drives the per-step learning rate") {
  auto data = animal_data();
  TrainOptions opts;
  opts.optim.peak_lr = 0.01;
  opts.optim.batch_size = 2;
  opts.optim.epochs = 5;
  opts.optim.warmup_fraction = 0.2;
  opts.optim.weight_decay = 0.01;
  opts.lr_policy = LrPolicy::warmup_linear;
  opts.clip_norm = 0.0;
  opts.seed = 1;

  auto tagger = build_tagger(tiny_recurrent(), animal_scheme(), data, 2);
  auto res = train(tagger, data, {}, opts);

  const int total = 15;  // 6 sentences, batch 2, 5 epochs
  REQUIRE(res.total_steps == total);
  for (const auto& e : res.epochs) {
    CHECK(e.last_lr == lr_schedule(e.steps_done, total, 0.01, 0.2));
  }
  CHECK(res.epochs.back().last_lr == 0.0);

  SUBCASE("constant policy pins the rate") {
    TrainOptions flat = default_train_options(ModelKind::recurrent_crf);
    flat.optim.epochs = 1;
    flat.optim.peak_lr = 0.004;
    auto t2 = build_tagger(tiny_recurrent(), animal_scheme(), data, 2);
    auto r2 = train(t2, data, {}, flat);
    CHECK(r2.epochs.back().last_lr == 0.004);
  }
}

TEST_CASE("non-finite losses halt training with a located error") {
  auto data = animal_data();
  auto tagger = build_tagger(tiny_recurrent(), animal_scheme(), data, 4);
  tagger.params.get("m.proj.b").value.data[0] = std::numeric_limits<double>::quiet_NaN();
  TrainOptions opts = default_train_options(ModelKind::recurrent_crf);
  opts.optim.epochs = 1;
  CHECK_THROWS_WITH_AS(train(tagger, data, {}, opts),
                       "training halted: non-finite loss at epoch 1, step 1", std::runtime_error);
}

TEST_CASE("checkpoints round trip bitwise") {
  auto data = animal_data();

  SUBCASE("recurrent tagger") {
    auto tagger = build_tagger(tiny_recurrent(), animal_scheme(), data, 21);
    TrainOptions opts = default_train_options(ModelKind::recurrent_crf);
    opts.optim.epochs = 1;
    opts.optim.batch_size = 3;
    train(tagger, data, {}, opts);

    std::string path = temp_path("medtag_rt.ckpt");
    save_checkpoint(tagger, path);
    auto back = load_checkpoint(path);

    CHECK(back.config.kind == ModelKind::recurrent_crf);
    CHECK(back.config.recurrent.hidden == 6);
    CHECK(back.scheme.types == tagger.scheme.types);
    CHECK(back.words.words == tagger.words.words);
    CHECK(back.chars.chars == tagger.chars.chars);
    CHECK(back.seed == 21);
    CHECK(back.params.count() == tagger.params.count());
    for (const auto* p : tagger.params.all()) {
      const auto& q = back.params.get(p->name);
      CHECK(q.value.shape == p->value.shape);
      CHECK(q.value.data == p->value.data);
    }
    for (const auto& s : data) CHECK(predict_tags(back, s.tokens) == predict_tags(tagger, s.tokens));
  }

  SUBCASE("encoder tagger keeps its subword vocabulary") {
    TaggerConfig cfg;
    cfg.kind = ModelKind::encoder_recurrent;
    cfg.encoder = tiny_encoder();
    auto tagger = build_tagger(cfg, animal_scheme(), data, 8, toy_subwords());
    std::string path = temp_path("medtag_enc.ckpt");
    save_checkpoint(tagger, path);
    auto back = load_checkpoint(path);
    CHECK(back.config.kind == ModelKind::encoder_recurrent);
    CHECK(back.subwords.pieces == tagger.subwords.pieces);
    CHECK(back.config.encoder.vocab_size == static_cast<int>(toy_subwords().size()));
    for (const auto& s : data) CHECK(predict_tags(back, s.tokens) == predict_tags(tagger, s.tokens));
  }

  SUBCASE("bad files are rejected") {
    std::string path = temp_path("medtag_bad.ckpt");
    {
      std::ofstream out(path, std::ios::binary);
      out << "NOTCKPT0 and some garbage";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("not a model checkpoint"),
                         std::runtime_error);

    auto tagger = build_tagger(tiny_recurrent(), animal_scheme(), data, 1);
    std::string full = temp_path("medtag_full.ckpt");
    save_checkpoint(tagger, full);
    std::ifstream in(full, std::ios::binary);
    std::vector<char> bytes(400);
    in.read(bytes.data(), bytes.size());
    std::string cut = temp_path("medtag_cut.ckpt");
    {
      std::ofstream out(cut, std::ios::binary);
      out.write(bytes.data(), in.gcount());
    }
    CHECK_THROWS_AS(load_checkpoint(cut), std::runtime_error);
  }
}

TEST_CASE("encoder windows split long sentences and reassemble word tags") {
  auto data = animal_data();
  TaggerConfig cfg;
  cfg.kind = ModelKind::encoder_linear;
  cfg.encoder = tiny_encoder(3);
  auto tagger = build_tagger(cfg, animal_scheme(), data, 9, toy_subwords());

  std::vector<std::string> words = {"the", "cat", "sat", "on", "the", "big", "dog"};
  auto tags = predict_tags(tagger, words);
  REQUIRE(tags.size() == words.size());
  for (const auto& t : tags) CHECK_NOTHROW(tagger.piece_labels.id(t));

  // Sequence lengths 3,4,4,3,4,4 with a 3-piece budget give 1+2+2+1+2+2 windows.
  TrainOptions opts = default_train_options(ModelKind::encoder_linear);
  opts.optim.epochs = 2;
  opts.optim.batch_size = 4;
  opts.optim.peak_lr = 1e-3;
  auto res = train(tagger, data, {}, opts);
  CHECK(res.total_steps == 2 * ((10 + 3) / 4));
  for (const auto& e : res.epochs) CHECK(std::isfinite(e.train_loss));
}

TEST_CASE("dual encoder trains and predicts word-level tags") {
  auto data = animal_data();
  TaggerConfig cfg;
  cfg.kind = ModelKind::dual_encoder;
  cfg.encoder = tiny_encoder();
  cfg.encoder.layers = 1;
  cfg.encoder.dim = 4;
  cfg.encoder.ff_dim = 8;
  cfg.second_encoder = cfg.encoder;
  cfg.second_encoder.max_positions = 32;
  auto tagger = build_tagger(cfg, animal_scheme(), data, 13, toy_subwords(), char_subwords());

  auto tags = predict_tags(tagger, data[1].tokens);
  REQUIRE(tags.size() == data[1].tokens.size());
  for (const auto& t : tags) CHECK_NOTHROW(tagger.word_tags.id(t));

  TrainOptions opts = default_train_options(ModelKind::dual_encoder);
  opts.optim.epochs = 2;
  opts.optim.batch_size = 3;
  opts.optim.peak_lr = 1e-3;
  auto res = train(tagger, data, {}, opts);
  REQUIRE(res.epochs.size() == 2);
  for (const auto& e : res.epochs) CHECK(std::isfinite(e.train_loss));
}

TEST_CASE("cross validation partitions documents and prefers cheaper ties") {
  std::vector<Document> docs;
  auto add_doc = [&](const std::string& id, const std::string& text, int s, int e,
                     const std::string& type) {
    Document d;
    d.doc_id = id;
    d.text = text;
    Mention m;
    m.start_char = s;
    m.end_char = e;
    m.surface = text.substr(s, e - s);
    m.raw_types = {type};
    m.resolved_type = type;
    d.mentions.push_back(m);
    docs.push_back(d);
  };
  add_doc("c1", "the cat sat", 4, 7, "animal");
  add_doc("c2", "a dog ran home", 2, 5, "animal");
  add_doc("c3", "the dog sat down", 4, 7, "animal");
  add_doc("c4", "a cat ran", 2, 5, "animal");
  add_doc("c5", "the park was big", 4, 8, "place");
  add_doc("c6", "a park was near", 2, 6, "place");

  CvOptions options;
  options.folds = 3;
  options.batch_sizes = {2};
  options.lrs = {0.05, 0.01};
  options.max_epochs = 2;
  options.seed = 17;
  options.train_template = default_train_options(ModelKind::recurrent_crf);

  auto result = kfold_cv(tiny_recurrent(), animal_scheme(), docs, options);

  REQUIRE(result.fold_documents.size() == 3);
  std::set<int> all;
  for (const auto& fold : result.fold_documents) {
    CHECK(fold.size() == 2);
    for (int d : fold) CHECK(all.insert(d).second);
  }
  CHECK(all.size() == docs.size());

  REQUIRE(result.table.size() == 4);  // 2 epochs x 2 rates x 1 batch
  for (const auto& cell : result.table) REQUIRE(cell.fold_f1.size() == 3);

  // The table is emitted in preference order; the winner is the first cell
  // attaining the best mean.
  double best = result.table[0].mean_f1;
  GridPoint expect = result.table[0].point;
  for (const auto& cell : result.table) {
    if (cell.mean_f1 > best) {
      best = cell.mean_f1;
      expect = cell.point;
    }
  }
  CHECK(result.best_mean_f1 == best);
  CHECK(result.best.batch_size == expect.batch_size);
  CHECK(result.best.lr == expect.lr);
  CHECK(result.best.epochs == expect.epochs);
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const auto& prev = result.table[i - 1].point;
    const auto& cur = result.table[i].point;
    bool ordered = prev.epochs < cur.epochs ||
                   (prev.epochs == cur.epochs &&
                    (prev.lr < cur.lr || (prev.lr == cur.lr && prev.batch_size < cur.batch_size)));
    CHECK(ordered);
  }

  auto rerun = kfold_cv(tiny_recurrent(), animal_scheme(), docs, options);
  CHECK(rerun.best_mean_f1 == result.best_mean_f1);
  CHECK(rerun.fold_documents == result.fold_documents);
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    CHECK(rerun.table[i].mean_f1 == result.table[i].mean_f1);
  }

  CvOptions bad = options;
  bad.folds = 7;
  CHECK_THROWS_AS(kfold_cv(tiny_recurrent(), animal_scheme(), docs, bad), std::invalid_argument);
}

TEST_CASE("prediction edge cases") {
  auto data = animal_data();
  auto tagger = build_tagger(tiny_recurrent(), animal_scheme(), data, 2);
  CHECK(predict_tags(tagger, std::vector<std::string>{}).empty());

  auto by_dataset = predict_tags(tagger, data);
  REQUIRE(by_dataset.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(by_dataset[i] == predict_tags(tagger, data[i].tokens));
  }
}

TEST_CASE("default options follow the path recipes") {
  auto rec = default_train_options(ModelKind::recurrent_crf);
  CHECK(rec.optim.peak_lr == 0.001);
  CHECK(rec.optim.batch_size == 32);
  CHECK(rec.optim.epochs == 10);
  CHECK(rec.optim.weight_decay == 0.0);
  CHECK(rec.lr_policy == LrPolicy::constant);
  CHECK(rec.clip_norm == 5.0);

  auto enc = default_train_options(ModelKind::encoder_linear);
  CHECK(enc.optim.weight_decay == 0.01);
  CHECK(enc.lr_policy == LrPolicy::warmup_linear);
  CHECK(enc.optim.beta1 == 0.9);
  CHECK(enc.optim.beta2 == 0.999);
}

TEST_CASE("encoder taggers require subword vocabularies") {
  auto data = animal_data();
  TaggerConfig cfg;
  cfg.kind = ModelKind::encoder_linear;
  cfg.encoder = tiny_encoder();
  CHECK_THROWS_AS(build_tagger(cfg, animal_scheme(), data, 1), std::invalid_argument);

  cfg.kind = ModelKind::dual_encoder;
  cfg.second_encoder = tiny_encoder();
  CHECK_THROWS_AS(build_tagger(cfg, animal_scheme(), data, 1, toy_subwords()),
                  std::invalid_argument);
}
