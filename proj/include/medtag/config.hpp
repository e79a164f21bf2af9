#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "medtag/training.hpp"

namespace medtag {

/// Raised for malformed configuration or command usage; the CLI maps it to
/// exit code 2, while runtime failures exit with 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sectioned key/value file. Grammar, line by line after trimming whitespace:
///   blank line                skipped
///   # text   or   ; text      comment, skipped
///   [name]                    opens (or reopens) a section
///   key = value               entry in the current section
/// Keys and values are trimmed; values keep internal whitespace and may be
/// empty. Comments take a full line; '#' inside a value is literal. A key may
/// appear once per section; entries before any [section] are rejected.
struct IniFile {
  // insertion-ordered (section, entries) with per-section key -> value
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;

  static IniFile parse(std::istream& in);
  static IniFile parse_file(const std::string& path);

  const std::string* find(const std::string& section, const std::string& key) const;
  bool has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
  }

  /// Sorted "section.key=value" lines; the hash input for run naming.
  std::string canonical() const;
};

/// 16 hex digits of a 64-bit hash over the canonical form, so files that
/// differ only in ordering or comments name the same run directory.
std::string config_hash(const IniFile& file);

/// Typed access that records which keys were read; finish() rejects leftovers
/// so misspelled keys fail loudly instead of silently using defaults.
class ConfigReader {
 public:
  explicit ConfigReader(const IniFile& file) : file_(file) {}

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  std::vector<double> fallback) const;
  std::vector<int> get_ints(const std::string& section, const std::string& key,
                            std::vector<int> fallback) const;
  std::vector<std::string> get_strings(const std::string& section, const std::string& key,
                                       std::vector<std::string> fallback) const;

  /// Throws ConfigError naming every present key that was never read.
  void finish() const;

 private:
  const std::string* look(const std::string& section, const std::string& key) const;

  const IniFile& file_;
  mutable std::set<std::pair<std::string, std::string>> used_;
};

/// Where and how to read the corpus.
struct DataConfig {
  std::string format = "conll";  // conll | pubtator | i2b2
  std::string train_path;
  std::string train_concepts;  // i2b2: concept dir next to the note dir
  std::vector<std::string> train_ids;  // pubtator: keep only listed doc ids
  std::string dev_path;
  std::string dev_concepts;
  std::vector<std::string> dev_ids;
  std::string scheme = "observed";  // observed | i2b2 | custom
  std::vector<std::string> types;   // custom scheme inventory
  std::string embeddings;           // optional pretrained word vectors
  bool i2b2_zero_based = false;     // concept token indices count from 0
};

/// Everything one training or cross-validation run needs, resolved from an
/// INI file with full-scale hyperparameter defaults filled in.
struct RunSpec {
  TaggerConfig model;
  TrainOptions train;
  DataConfig data;
  std::string encoder_vocab;
  std::string second_encoder_vocab;
  CvOptions cv;
  std::string out_root = "runs";
  std::uint64_t seed = 42;
  std::string hash;  // config_hash of the source file

  /// `<out_root>/<hash>-seed<seed>`
  std::string run_dir() const;
};

/// Assembles and validates a RunSpec. Unknown keys, malformed numbers, and
/// missing referenced files all raise ConfigError.
RunSpec load_run_spec(const IniFile& file);

}  // namespace medtag
