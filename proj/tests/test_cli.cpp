#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

const char* cli_binary() {
  const char* bin = std::getenv("MEDTAG_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "MEDTAG_BIN must point at the medtag binary");
  return bin;
}

CliResult run_cli(const std::string& args) {
  std::string out_file = temp_path("medtag_cli_stdout.txt");
  std::string err_file = temp_path("medtag_cli_stderr.txt");
  std::string cmd = std::string(cli_binary()) + " " + args + " >" + out_file + " 2>" + err_file;
  int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string toy_train_config(const std::string& out_dir, int epochs, const std::string& lr) {
  return std::string("[model]\nkind = recurrent_crf\nword_dim = 8\nchar_dim = 4\n"
                     "char_hidden = 4\nhidden = 8\nlayers = 1\n\n[optimizer]\nlr = ") +
         lr + "\nbatch_size = 8\nepochs = " + std::to_string(epochs) +
         "\n\n[data]\nformat = pubtator\ntrain = " TOY_CORPUS_PATH "\ndev = " TOY_CORPUS_PATH
         "\n\n[run]\nseed = 5\nout_dir = " + out_dir + "\n";
}

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("eval --gold /no/such.conll --pred /no/such.conll").code == 2);
  CHECK(run_cli("convert --format pubtator --in " TOY_CORPUS_PATH).code == 2);  // --out missing
}

TEST_CASE("convert reproduces the golden toy conversion byte for byte") {
  std::string out = temp_path("cli_toy.conll");
  auto r = run_cli("convert --format pubtator --in " TOY_CORPUS_PATH " --out " + out);
  REQUIRE(r.code == 0);
  CHECK(slurp(out) == slurp(TOY_GOLDEN_PATH));

  auto stats = nlohmann::json::parse(slurp(out + ".stats.json"));
  CHECK(stats.at("documents") == 40);
  CHECK(stats.at("entities") == 80);
  CHECK(stats.at("types") == 6);
}

TEST_CASE("converting an empty corpus yields an empty file and zero stats") {
  std::string in = temp_path("cli_empty.pubtator");
  std::string out = temp_path("cli_empty.conll");
  write_file(in, "");
  auto r = run_cli("convert --format pubtator --in " + in + " --out " + out);
  REQUIRE(r.code == 0);
  CHECK(slurp(out).empty());
  auto stats = nlohmann::json::parse(slurp(out + ".stats.json"));
  CHECK(stats.at("documents") == 0);
  CHECK(stats.at("entities") == 0);
  CHECK(stats.at("tokens") == 0);
}

TEST_CASE("stats prints counts for the toy corpus") {
  auto r = run_cli("stats --format pubtator --in " TOY_CORPUS_PATH);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("documents 40") != std::string::npos);
  CHECK(r.out.find("entities  80") != std::string::npos);
}

TEST_CASE("eval reports the zero-credit worked example") {
  std::string gold = temp_path("cli_gold.conll");
  std::string pred = temp_path("cli_pred.conll");
  write_file(gold, "He\tO\nhas\tO\nsevere\tB-problem\nchest\tI-problem\npain\tI-problem\n\n");
  write_file(pred, "He\tO\nhas\tO\nsevere\tB-problem\nchest\tI-problem\npain\tO\n\n");
  auto r = run_cli("eval --gold " + gold + " --pred " + pred);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ALL") != std::string::npos);
  CHECK(r.out.find("0.0000") != std::string::npos);

  std::string json_out = temp_path("cli_eval.json");
  r = run_cli("eval --gold " + gold + " --pred " + pred + " --json " + json_out);
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(slurp(json_out));
  CHECK(j.at("scores").at("tp") == 0);
  CHECK(j.at("scores").at("fp") == 1);
  CHECK(j.at("scores").at("fn") == 1);
}

TEST_CASE("eval of a file against itself is perfect") {
  auto r = run_cli("eval --gold " TOY_GOLDEN_PATH " --pred " TOY_GOLDEN_PATH);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("1.0000") != std::string::npos);
  CHECK(r.out.find("total errors:                   0") != std::string::npos);
}

TEST_CASE("misaligned prediction files fail with a located message") {
  std::string gold = temp_path("cli_mis_gold.conll");
  std::string pred = temp_path("cli_mis_pred.conll");
  write_file(gold, "a\tO\nb\tO\n\n");
  write_file(pred, "a\tO\n\n");
  auto r = run_cli("eval --gold " + gold + " --pred " + pred);
  CHECK(r.code == 1);
  CHECK(r.err.find("line 1") != std::string::npos);

  write_file(pred, "a\tO\nc\tO\n\n");
  r = run_cli("eval --gold " + gold + " --pred " + pred);
  CHECK(r.code == 1);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(r.err.find("'b'") != std::string::npos);
}

TEST_CASE("train produces a run directory and reruns bit-identically") {
  std::string out_dir = temp_path("cli_runs");
  fs::remove_all(out_dir);
  std::string config = temp_path("cli_train.ini");
  write_file(config, toy_train_config(out_dir, 3, "0.02"));

  auto r = run_cli("train --config " + config);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("run " + out_dir) != std::string::npos);

  fs::path run_dir;
  for (const auto& entry : fs::directory_iterator(out_dir)) run_dir = entry.path();
  REQUIRE(fs::exists(run_dir / "model.ckpt"));
  REQUIRE(fs::exists(run_dir / "train_log.jsonl"));
  REQUIRE(fs::exists(run_dir / "result.json"));
  REQUIRE(fs::exists(run_dir / "dev_predictions.conll"));

  std::istringstream log(slurp((run_dir / "train_log.jsonl").string()));
  std::string line, last;
  int lines = 0;
  while (std::getline(log, line)) {
    last = line;
    ++lines;
  }
  CHECK(lines == 3);
  auto final_entry = nlohmann::json::parse(last);
  CHECK(final_entry.count("dev_f1") == 1);
  CHECK(final_entry.at("epoch") == 3);

  std::string first_result = slurp((run_dir / "result.json").string());
  std::string first_preds = slurp((run_dir / "dev_predictions.conll").string());
  auto rerun = run_cli("train --config " + config);
  REQUIRE(rerun.code == 0);
  CHECK(slurp((run_dir / "result.json").string()) == first_result);
  CHECK(slurp((run_dir / "dev_predictions.conll").string()) == first_preds);

  SUBCASE("the checkpoint drives prediction") {
    std::string text = temp_path("cli_raw.txt");
    std::string pred_out = temp_path("cli_pred_out.conll");
    write_file(text, "The patient with cystic fibrosis reported chest pain .\n\n");
    auto p = run_cli("predict --checkpoint " + (run_dir / "model.ckpt").string() + " --in " +
                     text + " --out " + pred_out);
    REQUIRE_MESSAGE(p.code == 0, p.err);
    std::string conll = slurp(pred_out);
    CHECK(conll.find("patient\t") != std::string::npos);
    CHECK(conll.find("NUM") == std::string::npos);
  }
}

TEST_CASE("config mistakes exit with 2") {
  std::string config = temp_path("cli_bad.ini");
  write_file(config, toy_train_config(temp_path("cli_runs_bad"), 2, "not-a-rate"));
  auto r = run_cli("train --config " + config);
  CHECK(r.code == 2);
  CHECK(r.err.find("config error") != std::string::npos);
  CHECK(r.err.find("not-a-rate") != std::string::npos);

  write_file(config, "[model]\nkind = recurrent_crf\nhiden = 4\n");
  r = run_cli("train --config " + config);
  CHECK(r.code == 2);
  CHECK(r.err.find("hiden") != std::string::npos);
}

TEST_CASE("cross validation emits its grid table") {
  std::string out_dir = temp_path("cli_cv_runs");
  fs::remove_all(out_dir);
  std::string config = temp_path("cli_cv.ini");
  write_file(config,
             "[model]\nkind = recurrent_crf\nword_dim = 8\nchar_dim = 4\nchar_hidden = 4\n"
             "hidden = 8\nlayers = 1\n\n[optimizer]\nbatch_size = 8\n\n"
             "[data]\nformat = pubtator\ntrain = " TOY_CORPUS_PATH "\n\n"
             "[run]\nseed = 7\nout_dir = " +
                 out_dir + "\n\n[cv]\nfolds = 2\nbatch_sizes = 8\nlrs = 0.02\nmax_epochs = 2\n");
  auto r = run_cli("cv --config " + config);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("best:") != std::string::npos);

  fs::path run_dir;
  for (const auto& entry : fs::directory_iterator(out_dir)) run_dir = entry.path();
  auto j = nlohmann::json::parse(slurp((run_dir / "cv.json").string()));
  CHECK(j.at("cells").size() == 2);
  CHECK(j.at("folds").size() == 2);
  CHECK(j.at("folds").at(0).size() == 20);
}

TEST_CASE("compare renders both models and the deltas") {
  auto r = run_cli("compare --gold " TOY_GOLDEN_PATH " --first " TOY_GOLDEN_PATH " --second " TOY_GOLDEN_PATH);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("== second ==") != std::string::npos);
  CHECK(r.out.find("f1 delta") != std::string::npos);
}
