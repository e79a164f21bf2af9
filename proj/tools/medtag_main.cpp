#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "medtag/config.hpp"
#include "medtag/eval.hpp"
#include "medtag/pipeline.hpp"
#include "medtag/training.hpp"

namespace {

using namespace medtag;
namespace fs = std::filesystem;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void report_warnings(const std::vector<std::string>& warnings) {
  const std::size_t shown = 20;
  for (std::size_t i = 0; i < warnings.size() && i < shown; ++i) {
    std::cerr << "warning: " << warnings[i] << "\n";
  }
  if (warnings.size() > shown) {
    std::cerr << "warning: " << warnings.size() - shown << " more suppressed\n";
  }
}

// -- convert / stats --------------------------------------------------------

struct CorpusArgs {
  std::string format = "pubtator";
  std::string in_path;
  std::string concepts;
  std::vector<std::string> ids;
  std::string scheme = "observed";
  std::string types;
  bool zero_based = false;
};

DataConfig data_config_from(const CorpusArgs& args) {
  DataConfig cfg;
  cfg.format = args.format;
  cfg.train_path = args.in_path;
  cfg.train_concepts = args.concepts;
  cfg.train_ids = args.ids;
  cfg.scheme = args.scheme;
  cfg.i2b2_zero_based = args.zero_based;
  if (!args.types.empty()) {
    std::istringstream in(args.types);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) cfg.types.push_back(item);
    }
  }
  if (cfg.scheme == "custom" && cfg.types.empty()) {
    throw ConfigError("--scheme custom needs --types");
  }
  if (cfg.format == "i2b2" && cfg.train_concepts.empty()) {
    throw ConfigError("--format i2b2 needs --concepts");
  }
  return cfg;
}

void add_corpus_flags(CLI::App* cmd, CorpusArgs& args) {
  cmd->add_option("--format", args.format, "Input format")
      ->check(CLI::IsMember({"pubtator", "i2b2", "conll"}))
      ->capture_default_str();
  cmd->add_option("--in", args.in_path, "Corpus file (pubtator, conll) or note directory (i2b2)")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--concepts", args.concepts, "i2b2 concept (.con) directory")
      ->check(CLI::ExistingPath);
  cmd->add_option("--ids", args.ids, "Document id list file(s); keeps only listed ids (pubtator)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--scheme", args.scheme, "Label scheme")
      ->check(CLI::IsMember({"observed", "i2b2", "custom"}))
      ->capture_default_str();
  cmd->add_option("--types", args.types, "Comma-separated type inventory for --scheme custom");
  cmd->add_flag("--zero-based-tokens", args.zero_based,
                "i2b2 concept token indices count from 0 instead of 1");
}

int cmd_convert(const CorpusArgs& args, const std::string& out_path) {
  LoadedData data = load_data(data_config_from(args));
  report_warnings(data.warnings);
  write_conll_file(out_path, sequences_to_conll(data.train.sequences));
  CorpusStats stats = split_stats(data.train);
  write_json_file(out_path + ".stats.json", to_json(stats));
  std::cout << "wrote " << data.train.sequences.size() << " sequences to " << out_path << "\n"
            << render_stats(stats);
  return 0;
}

int cmd_stats(const CorpusArgs& args, const std::string& json_path) {
  LoadedData data = load_data(data_config_from(args));
  report_warnings(data.warnings);
  CorpusStats stats = split_stats(data.train);
  std::cout << render_stats(stats);
  if (!json_path.empty()) write_json_file(json_path, to_json(stats));
  return 0;
}

// -- train / cv -------------------------------------------------------------

struct PreparedRun {
  RunSpec spec;
  LoadedData data;
  SubwordVocab subwords;
  SubwordVocab second_subwords;
  std::string dir;
};

PreparedRun prepare_run(const std::string& config_path) {
  PreparedRun run;
  IniFile file = IniFile::parse_file(config_path);
  run.spec = load_run_spec(file);
  if (run.spec.data.train_path.empty()) throw ConfigError("[data] train is required");

  run.dir = run.spec.run_dir();
  fs::create_directories(run.dir);
  write_text_file((fs::path(run.dir) / "config.canonical.ini").string(), file.canonical());

  run.data = load_data(run.spec.data);
  report_warnings(run.data.warnings);
  if (run.data.train.sequences.empty()) throw std::runtime_error("training split is empty");
  if (run.spec.model.kind != ModelKind::recurrent_crf) {
    run.subwords = SubwordVocab::load_file(run.spec.encoder_vocab);
  }
  if (run.spec.model.kind == ModelKind::dual_encoder) {
    run.second_subwords = SubwordVocab::load_file(run.spec.second_encoder_vocab);
  }
  return run;
}

nlohmann::json epoch_to_json(const EpochLog& e, int total_steps) {
  nlohmann::json j = {{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"lr", e.last_lr},
                      {"steps", e.steps_done},
                      {"total_steps", total_steps}};
  if (e.has_dev) {
    j["dev_precision"] = e.dev_precision;
    j["dev_recall"] = e.dev_recall;
    j["dev_f1"] = e.dev_f1;
  }
  return j;
}

int cmd_train(const std::string& config_path) {
  PreparedRun run = prepare_run(config_path);
  Tagger tagger = build_tagger(run.spec.model, run.data.scheme, run.data.train.sequences,
                               run.spec.seed, run.subwords, run.second_subwords);
  if (!run.spec.data.embeddings.empty()) {
    int filled = load_pretrained_embeddings_file(run.spec.data.embeddings, tagger.words,
                                                 tagger.params.get("m.emb.word"));
    std::cout << "pretrained vectors for " << filled << " of " << tagger.words.size()
              << " words\n";
  }

  TrainOptions opts = run.spec.train;
  opts.log_path = (fs::path(run.dir) / "train_log.jsonl").string();
  opts.checkpoint_path = (fs::path(run.dir) / "model.ckpt").string();
  TrainResult res = train(tagger, run.data.train.sequences, run.data.dev.sequences, opts);

  nlohmann::json summary = {{"final_train_loss", res.final_train_loss},
                            {"total_steps", res.total_steps},
                            {"best_epoch", res.best_epoch},
                            {"best_dev_f1", res.best_dev_f1},
                            {"epochs", nlohmann::json::array()}};
  for (const auto& e : res.epochs) summary["epochs"].push_back(epoch_to_json(e, res.total_steps));
  write_json_file((fs::path(run.dir) / "result.json").string(), summary);

  if (!run.data.dev.sequences.empty()) {
    Tagger best = load_checkpoint(opts.checkpoint_path);
    std::vector<ConllSequence> preds;
    for (const auto& seq : run.data.dev.sequences) {
      preds.push_back({seq.tokens, predict_tags(best, seq.tokens)});
    }
    write_conll_file((fs::path(run.dir) / "dev_predictions.conll").string(), preds);
  }

  std::cout << "run " << run.dir << "\n"
            << "final train loss " << res.final_train_loss << "\n";
  if (res.best_epoch > 0) {
    std::cout << "best dev F1 " << res.best_dev_f1 << " at epoch " << res.best_epoch << "\n";
  }
  return 0;
}

int cmd_cv(const std::string& config_path) {
  IniFile file = IniFile::parse_file(config_path);
  RunSpec spec = load_run_spec(file);
  if (spec.data.format == "conll") {
    throw ConfigError("cross-validation needs document-level input (pubtator or i2b2)");
  }
  if (spec.data.train_path.empty()) throw ConfigError("[data] train is required");

  std::string dir = spec.run_dir();
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "config.canonical.ini").string(), file.canonical());

  LoadedData data = load_data(spec.data);
  report_warnings(data.warnings);
  if (data.train.documents.empty()) throw std::runtime_error("training split is empty");

  SubwordVocab sub, sub2;
  if (spec.model.kind != ModelKind::recurrent_crf) {
    sub = SubwordVocab::load_file(spec.encoder_vocab);
  }
  if (spec.model.kind == ModelKind::dual_encoder) {
    sub2 = SubwordVocab::load_file(spec.second_encoder_vocab);
  }

  CvResult result = kfold_cv(spec.model, data.scheme, data.train.documents, spec.cv, sub, sub2);

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.table) {
    cells.push_back({{"batch_size", cell.point.batch_size},
                     {"lr", cell.point.lr},
                     {"epochs", cell.point.epochs},
                     {"mean_f1", cell.mean_f1},
                     {"fold_f1", cell.fold_f1}});
  }
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& fold : result.fold_documents) {
    nlohmann::json ids = nlohmann::json::array();
    for (int d : fold) ids.push_back(data.train.documents[d].doc_id);
    folds.push_back(ids);
  }
  write_json_file((fs::path(dir) / "cv.json").string(),
                  {{"best",
                    {{"batch_size", result.best.batch_size},
                     {"lr", result.best.lr},
                     {"epochs", result.best.epochs}}},
                   {"best_mean_f1", result.best_mean_f1},
                   {"cells", cells},
                   {"folds", folds}});

  std::cout << "run " << dir << "\n";
  for (const auto& cell : result.table) {
    std::cout << "batch " << cell.point.batch_size << "  lr " << cell.point.lr << "  epochs "
              << cell.point.epochs << "  mean F1 " << cell.mean_f1 << "\n";
  }
  std::cout << "best: batch " << result.best.batch_size << "  lr " << result.best.lr
            << "  epochs " << result.best.epochs << "  mean F1 " << result.best_mean_f1 << "\n";
  return 0;
}

// -- eval / compare / predict -----------------------------------------------

struct ReadConll {
  std::vector<ConllSequence> seqs;
  std::vector<int> start_lines;
  std::vector<std::vector<std::string>> tags;
};

ReadConll read_tagged(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ReadConll r;
  try {
    r.seqs = read_conll(in, &r.start_lines);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  for (const auto& s : r.seqs) r.tags.push_back(s.tags);
  return r;
}

void check_aligned_files(const std::string& gold_path, const ReadConll& gold,
                         const std::string& pred_path, const ReadConll& pred) {
  if (gold.seqs.size() != pred.seqs.size()) {
    throw std::runtime_error(pred_path + " has " + std::to_string(pred.seqs.size()) +
                             " sequences but " + gold_path + " has " +
                             std::to_string(gold.seqs.size()));
  }
  for (std::size_t i = 0; i < gold.seqs.size(); ++i) {
    if (gold.seqs[i].tokens.size() != pred.seqs[i].tokens.size()) {
      throw std::runtime_error("sequence " + std::to_string(i + 1) + " (line " +
                               std::to_string(gold.start_lines[i]) + " of " + gold_path +
                               ", line " + std::to_string(pred.start_lines[i]) + " of " +
                               pred_path + "): " +
                               std::to_string(gold.seqs[i].tokens.size()) + " tokens vs " +
                               std::to_string(pred.seqs[i].tokens.size()));
    }
    for (std::size_t t = 0; t < gold.seqs[i].tokens.size(); ++t) {
      if (gold.seqs[i].tokens[t] != pred.seqs[i].tokens[t]) {
        throw std::runtime_error(
            "token mismatch at line " + std::to_string(gold.start_lines[i] + static_cast<int>(t)) +
            ": '" + gold.seqs[i].tokens[t] + "' in " + gold_path + " vs '" +
            pred.seqs[i].tokens[t] + "' in " + pred_path);
      }
    }
  }
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& json_path) {
  ReadConll gold = read_tagged(gold_path);
  ReadConll pred = read_tagged(pred_path);
  check_aligned_files(gold_path, gold, pred_path, pred);
  Scores scores = strict_score(gold.tags, pred.tags);
  ErrorBreakdown errors = classify_errors(gold.tags, pred.tags);
  std::cout << render_scores(scores) << "\n" << render_errors(errors);
  if (!json_path.empty()) {
    write_json_file(json_path, {{"scores", to_json(scores)}, {"errors", to_json(errors)}});
  }
  return 0;
}

int cmd_compare(const std::string& gold_path, const std::string& first_path,
                const std::string& second_path, const std::string& json_path) {
  ReadConll gold = read_tagged(gold_path);
  ReadConll first = read_tagged(first_path);
  ReadConll second = read_tagged(second_path);
  check_aligned_files(gold_path, gold, first_path, first);
  check_aligned_files(gold_path, gold, second_path, second);
  ModelComparison cmp = compare_models(gold.tags, first.tags, second.tags);
  std::cout << render_comparison(cmp);
  if (!json_path.empty()) write_json_file(json_path, to_json(cmp));
  return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& text_path,
                const std::string& out_path) {
  Tagger tagger = load_checkpoint(checkpoint_path);
  std::ifstream in(text_path);
  if (!in) throw std::runtime_error("cannot open " + text_path);
  std::vector<ConllSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    TokenizedText toks = word_tokenize(line);
    if (toks.tokens.empty()) continue;
    normalize_numbers(toks);
    out.push_back({toks.normalized, predict_tags(tagger, toks.normalized)});
  }
  write_conll_file(out_path, out);
  std::cout << "wrote " << out.size() << " sequences to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Span-based entity tagger for clinical and biomedical text"};
  app.require_subcommand(1);
  int rc = 0;

  CorpusArgs convert_args;
  std::string convert_out;
  auto* convert = app.add_subcommand("convert", "Convert an annotated corpus to CoNLL IOB");
  add_corpus_flags(convert, convert_args);
  convert->add_option("--out", convert_out, "Output CoNLL path")->required();
  convert->callback([&] { rc = cmd_convert(convert_args, convert_out); });

  CorpusArgs stats_args;
  std::string stats_json;
  auto* stats = app.add_subcommand("stats", "Print corpus statistics");
  add_corpus_flags(stats, stats_args);
  stats->add_option("--json", stats_json, "Also write the statistics as JSON to this path");
  stats->callback([&] { rc = cmd_stats(stats_args, stats_json); });

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "Train a tagger from a config file");
  train_cmd->add_option("--config", train_config, "INI configuration")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->callback([&] { rc = cmd_train(train_config); });

  std::string cv_config;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validated hyperparameter grid search");
  cv_cmd->add_option("--config", cv_config, "INI configuration")
      ->required()
      ->check(CLI::ExistingFile);
  cv_cmd->callback([&] { rc = cmd_cv(cv_config); });

  std::string eval_gold, eval_pred, eval_json;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold CoNLL");
  eval_cmd->add_option("--gold", eval_gold, "Gold CoNLL file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", eval_pred, "Predicted CoNLL file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--json", eval_json, "Also write the report as JSON to this path");
  eval_cmd->callback([&] { rc = cmd_eval(eval_gold, eval_pred, eval_json); });

  std::string cmp_gold, cmp_first, cmp_second, cmp_json;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare two prediction files on one gold set");
  cmp_cmd->add_option("--gold", cmp_gold, "Gold CoNLL file")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--first", cmp_first, "First model's CoNLL predictions")
      ->required()
      ->check(CLI::ExistingFile);
  cmp_cmd->add_option("--second", cmp_second, "Second model's CoNLL predictions")
      ->required()
      ->check(CLI::ExistingFile);
  cmp_cmd->add_option("--json", cmp_json, "Also write the report as JSON to this path");
  cmp_cmd->callback([&] { rc = cmd_compare(cmp_gold, cmp_first, cmp_second, cmp_json); });

  std::string pr_ckpt, pr_in, pr_out;
  auto* pr_cmd = app.add_subcommand("predict", "Tag raw text (one sentence per line) as CoNLL");
  pr_cmd->add_option("--checkpoint", pr_ckpt, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  pr_cmd->add_option("--in", pr_in, "Plain-text input")->required()->check(CLI::ExistingFile);
  pr_cmd->add_option("--out", pr_out, "Output CoNLL path")->required();
  pr_cmd->callback([&] { rc = cmd_predict(pr_ckpt, pr_in, pr_out); });

  try {
    app.parse(argc, argv);
    return rc;
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
