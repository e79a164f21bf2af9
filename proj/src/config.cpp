#include "medtag/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <climits>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace medtag {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail_at(int line_no, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

std::string spot(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

double parse_double(const std::string& section, const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError(spot(section, key) + ": '" + text + "' is not a number");
  }
  return v;
}

long long parse_integer(const std::string& section, const std::string& key,
                        const std::string& text) {
  const std::string t = trim(text);
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError(spot(section, key) + ": '" + text + "' is not an integer");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

IniFile IniFile::parse(std::istream& in) {
  IniFile file;
  std::string raw;
  int line_no = 0;
  int current = -1;
  while (std::getline(in, raw)) {
    ++line_no;
    if (line_no == 1 && raw.size() >= 3 && raw.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      raw.erase(0, 3);
    }
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_at(line_no, "unterminated section header");
      std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail_at(line_no, "empty section name");
      current = -1;
      for (std::size_t i = 0; i < file.sections.size(); ++i) {
        if (file.sections[i].first == name) current = static_cast<int>(i);
      }
      if (current < 0) {
        file.sections.emplace_back(name, std::vector<std::pair<std::string, std::string>>{});
        current = static_cast<int>(file.sections.size()) - 1;
      }
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail_at(line_no, "expected 'key = value' or '[section]'");
    if (current < 0) fail_at(line_no, "entry before any [section]");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail_at(line_no, "empty key");
    auto& entries = file.sections[current].second;
    for (const auto& [k, v] : entries) {
      if (k == key) {
        fail_at(line_no, "duplicate key '" + key + "' in [" + file.sections[current].first + "]");
      }
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return file;
}

IniFile IniFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in);
}

const std::string* IniFile::find(const std::string& section, const std::string& key) const {
  for (const auto& [name, entries] : sections) {
    if (name != section) continue;
    for (const auto& [k, v] : entries) {
      if (k == key) return &v;
    }
  }
  return nullptr;
}

std::string IniFile::canonical() const {
  std::vector<std::string> lines;
  for (const auto& [name, entries] : sections) {
    for (const auto& [k, v] : entries) lines.push_back(name + "." + k + "=" + v);
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

std::string config_hash(const IniFile& file) {
  std::uint64_t h = fnv1a64(file.canonical());
  static const char* hex = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = hex[h & 0xf];
    h >>= 4;
  }
  return s;
}

// ---------------------------------------------------------------------------
// ConfigReader
// ---------------------------------------------------------------------------

const std::string* ConfigReader::look(const std::string& section, const std::string& key) const {
  used_.insert({section, key});
  return file_.find(section, key);
}

std::string ConfigReader::get_string(const std::string& section, const std::string& key,
                                     const std::string& fallback) const {
  const std::string* v = look(section, key);
  return v ? *v : fallback;
}

std::string ConfigReader::require_string(const std::string& section, const std::string& key) const {
  const std::string* v = look(section, key);
  if (!v || v->empty()) throw ConfigError(spot(section, key) + " is required");
  return *v;
}

double ConfigReader::get_double(const std::string& section, const std::string& key,
                                double fallback) const {
  const std::string* v = look(section, key);
  return v ? parse_double(section, key, *v) : fallback;
}

int ConfigReader::get_int(const std::string& section, const std::string& key, int fallback) const {
  const std::string* v = look(section, key);
  if (!v) return fallback;
  long long n = parse_integer(section, key, *v);
  if (n < INT_MIN || n > INT_MAX) {
    throw ConfigError(spot(section, key) + ": '" + *v + "' out of range");
  }
  return static_cast<int>(n);
}

bool ConfigReader::get_bool(const std::string& section, const std::string& key,
                            bool fallback) const {
  const std::string* v = look(section, key);
  if (!v) return fallback;
  std::string t = trim(*v);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError(spot(section, key) + ": '" + *v + "' is not a boolean");
}

std::uint64_t ConfigReader::get_u64(const std::string& section, const std::string& key,
                                    std::uint64_t fallback) const {
  const std::string* v = look(section, key);
  if (!v) return fallback;
  long long n = parse_integer(section, key, *v);
  if (n < 0) throw ConfigError(spot(section, key) + ": '" + *v + "' must be non-negative");
  return static_cast<std::uint64_t>(n);
}

std::vector<double> ConfigReader::get_doubles(const std::string& section, const std::string& key,
                                              std::vector<double> fallback) const {
  const std::string* v = look(section, key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(parse_double(section, key, item));
  if (out.empty()) throw ConfigError(spot(section, key) + ": empty list");
  return out;
}

std::vector<int> ConfigReader::get_ints(const std::string& section, const std::string& key,
                                        std::vector<int> fallback) const {
  const std::string* v = look(section, key);
  if (!v) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(*v)) {
    out.push_back(static_cast<int>(parse_integer(section, key, item)));
  }
  if (out.empty()) throw ConfigError(spot(section, key) + ": empty list");
  return out;
}

std::vector<std::string> ConfigReader::get_strings(const std::string& section,
                                                   const std::string& key,
                                                   std::vector<std::string> fallback) const {
  const std::string* v = look(section, key);
  if (!v) return fallback;
  auto out = split_list(*v);
  if (out.empty()) throw ConfigError(spot(section, key) + ": empty list");
  return out;
}

void ConfigReader::finish() const {
  std::vector<std::string> unknown;
  for (const auto& [name, entries] : file_.sections) {
    for (const auto& [k, v] : entries) {
      if (!used_.count({name, k})) unknown.push_back(spot(name, k));
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config key";
    if (unknown.size() > 1) msg += 's';
    for (const auto& u : unknown) msg += " " + u;
    throw ConfigError(msg);
  }
}

// ---------------------------------------------------------------------------
// RunSpec
// ---------------------------------------------------------------------------

std::string RunSpec::run_dir() const {
  return (std::filesystem::path(out_root) / (hash + "-seed" + std::to_string(seed))).string();
}

namespace {

void require_file(const std::string& section, const std::string& key, const std::string& path) {
  if (path.empty()) return;
  if (!std::filesystem::exists(path)) {
    throw ConfigError(spot(section, key) + ": path does not exist: " + path);
  }
}

}  // namespace

RunSpec load_run_spec(const IniFile& file) {
  ConfigReader cfg(file);
  RunSpec spec;
  spec.hash = config_hash(file);

  std::string kind_name = cfg.get_string("model", "kind", "recurrent_crf");
  try {
    spec.model.kind = model_kind_from_string(kind_name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[model] kind: ") + e.what());
  }

  auto& rec = spec.model.recurrent;
  rec.word_dim = cfg.get_int("model", "word_dim", rec.word_dim);
  rec.char_dim = cfg.get_int("model", "char_dim", rec.char_dim);
  rec.char_hidden = cfg.get_int("model", "char_hidden", rec.char_hidden);
  rec.hidden = cfg.get_int("model", "hidden", rec.hidden);
  rec.layers = cfg.get_int("model", "layers", rec.layers);
  rec.dropout = cfg.get_double("model", "dropout", rec.dropout);

  auto read_encoder = [&](const std::string& section, TransformerConfig& enc, std::string& vocab) {
    // Desk-scale defaults; bert_base switches to the published dimensions.
    enc.layers = 4;
    enc.dim = 64;
    enc.heads = 4;
    enc.ff_dim = 256;
    enc.max_positions = 128;
    enc.dropout = 0.1;
    if (cfg.get_string(section, "size", "desk") == "bert_base") {
      enc.layers = 12;
      enc.dim = 768;
      enc.heads = 12;
      enc.ff_dim = 3072;
      enc.max_positions = 512;
    }
    enc.layers = cfg.get_int(section, "layers", enc.layers);
    enc.dim = cfg.get_int(section, "dim", enc.dim);
    enc.heads = cfg.get_int(section, "heads", enc.heads);
    enc.ff_dim = cfg.get_int(section, "ff_dim", enc.ff_dim);
    enc.max_positions = cfg.get_int(section, "max_positions", enc.max_positions);
    enc.dropout = cfg.get_double(section, "dropout", enc.dropout);
    vocab = cfg.get_string(section, "vocab", "");
    require_file(section, "vocab", vocab);
  };
  read_encoder("encoder", spec.model.encoder, spec.encoder_vocab);
  read_encoder("second_encoder", spec.model.second_encoder, spec.second_encoder_vocab);

  spec.train = default_train_options(spec.model.kind);
  auto& opt = spec.train.optim;
  opt.peak_lr = cfg.get_double("optimizer", "lr", opt.peak_lr);
  opt.batch_size = cfg.get_int("optimizer", "batch_size", opt.batch_size);
  opt.epochs = cfg.get_int("optimizer", "epochs", opt.epochs);
  opt.beta1 = cfg.get_double("optimizer", "beta1", opt.beta1);
  opt.beta2 = cfg.get_double("optimizer", "beta2", opt.beta2);
  opt.weight_decay = cfg.get_double("optimizer", "weight_decay", opt.weight_decay);
  opt.warmup_fraction = cfg.get_double("optimizer", "warmup_fraction", opt.warmup_fraction);
  opt.epsilon = cfg.get_double("optimizer", "epsilon", opt.epsilon);
  spec.train.clip_norm = cfg.get_double("optimizer", "clip_norm", spec.train.clip_norm);
  std::string schedule = cfg.get_string(
      "optimizer", "schedule",
      spec.train.lr_policy == LrPolicy::constant ? "constant" : "warmup_linear");
  if (schedule == "constant") {
    spec.train.lr_policy = LrPolicy::constant;
  } else if (schedule == "warmup_linear") {
    spec.train.lr_policy = LrPolicy::warmup_linear;
  } else {
    throw ConfigError("[optimizer] schedule: '" + schedule +
                      "' (expected constant or warmup_linear)");
  }

  auto& data = spec.data;
  data.format = cfg.get_string("data", "format", data.format);
  if (data.format != "conll" && data.format != "pubtator" && data.format != "i2b2") {
    throw ConfigError("[data] format: '" + data.format +
                      "' (expected conll, pubtator, or i2b2)");
  }
  data.train_path = cfg.get_string("data", "train", "");
  data.train_concepts = cfg.get_string("data", "train_concepts", "");
  data.train_ids = cfg.get_strings("data", "train_ids", {});
  data.dev_path = cfg.get_string("data", "dev", "");
  data.dev_concepts = cfg.get_string("data", "dev_concepts", "");
  data.dev_ids = cfg.get_strings("data", "dev_ids", {});
  data.scheme = cfg.get_string("data", "scheme", data.scheme);
  if (data.scheme != "observed" && data.scheme != "i2b2" && data.scheme != "custom") {
    throw ConfigError("[data] scheme: '" + data.scheme + "' (expected observed, i2b2, or custom)");
  }
  data.types = cfg.get_strings("data", "types", {});
  if (data.scheme == "custom" && data.types.empty()) {
    throw ConfigError("[data] types is required when scheme = custom");
  }
  data.embeddings = cfg.get_string("data", "embeddings", "");
  data.i2b2_zero_based = cfg.get_bool("data", "i2b2_zero_based", false);
  require_file("data", "train", data.train_path);
  require_file("data", "train_concepts", data.train_concepts);
  require_file("data", "dev", data.dev_path);
  require_file("data", "dev_concepts", data.dev_concepts);
  require_file("data", "embeddings", data.embeddings);
  for (const auto& p : data.train_ids) require_file("data", "train_ids", p);
  for (const auto& p : data.dev_ids) require_file("data", "dev_ids", p);

  spec.seed = cfg.get_u64("run", "seed", spec.seed);
  spec.out_root = cfg.get_string("run", "out_dir", spec.out_root);
  spec.train.seed = spec.seed;

  spec.cv.folds = cfg.get_int("cv", "folds", spec.cv.folds);
  spec.cv.batch_sizes = cfg.get_ints("cv", "batch_sizes", spec.cv.batch_sizes);
  spec.cv.lrs = cfg.get_doubles("cv", "lrs", spec.cv.lrs);
  spec.cv.max_epochs = cfg.get_int("cv", "max_epochs", spec.cv.max_epochs);
  spec.cv.seed = spec.seed;
  spec.cv.train_template = spec.train;

  cfg.finish();

  try {
    opt.validate();
    if (spec.model.kind == ModelKind::recurrent_crf) {
      rec.validate();
    } else {
      spec.model.encoder.vocab_size = 1;  // placeholder until the vocab loads
      spec.model.encoder.validate();
      if (spec.model.kind == ModelKind::dual_encoder) {
        spec.model.second_encoder.vocab_size = 1;
        spec.model.second_encoder.validate();
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  spec.model.encoder.vocab_size = 0;
  spec.model.second_encoder.vocab_size = 0;

  if (spec.model.kind != ModelKind::recurrent_crf && spec.encoder_vocab.empty()) {
    throw ConfigError("[encoder] vocab is required for encoder models");
  }
  if (spec.model.kind == ModelKind::dual_encoder && spec.second_encoder_vocab.empty()) {
    throw ConfigError("[second_encoder] vocab is required for the dual encoder");
  }
  if (!spec.data.embeddings.empty() && spec.model.kind != ModelKind::recurrent_crf) {
    throw ConfigError("[data] embeddings applies to the recurrent_crf model");
  }
  return spec;
}

}  // namespace medtag
