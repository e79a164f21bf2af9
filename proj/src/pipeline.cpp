#include "medtag/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "medtag/eval.hpp"

namespace medtag {

namespace {

std::set<std::string> read_id_files(const std::vector<std::string>& paths) {
  std::set<std::string> ids;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open id list " + path);
    std::string line;
    while (std::getline(in, line)) {
      std::size_t b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      std::size_t e = line.find_last_not_of(" \t\r");
      std::string id = line.substr(b, e - b + 1);
      if (!id.empty() && id[0] != '#') ids.insert(id);
    }
  }
  return ids;
}

std::vector<Document> load_pubtator_split(const std::string& path,
                                          const std::vector<std::string>& id_files) {
  if (path.empty()) return {};
  auto docs = parse_pubtator_file(path);
  if (!id_files.empty()) {
    auto keep = read_id_files(id_files);
    std::vector<Document> filtered;
    for (auto& d : docs) {
      if (keep.count(d.doc_id)) filtered.push_back(std::move(d));
    }
    docs = std::move(filtered);
  }
  return docs;
}

std::vector<Document> load_i2b2_split(const std::string& notes_dir, const std::string& concepts_dir,
                                      const I2b2Options& opts,
                                      std::vector<std::string>* warnings) {
  if (notes_dir.empty()) return {};
  if (concepts_dir.empty()) {
    throw std::runtime_error("i2b2 input needs both a note directory and a concept directory");
  }
  std::vector<std::filesystem::path> notes;
  for (const auto& entry : std::filesystem::directory_iterator(notes_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      notes.push_back(entry.path());
    }
  }
  std::sort(notes.begin(), notes.end());
  if (notes.empty()) throw std::runtime_error("no .txt notes under " + notes_dir);

  std::vector<Document> docs;
  for (const auto& note : notes) {
    auto con = std::filesystem::path(concepts_dir) / (note.stem().string() + ".con");
    if (!std::filesystem::exists(con)) {
      throw std::runtime_error("missing concept file " + con.string() + " for note " +
                               note.string());
    }
    docs.push_back(parse_i2b2_files(note.string(), con.string(), opts, warnings));
  }
  return docs;
}

LabelScheme scheme_for(const DataConfig& cfg, const std::vector<Document>& train_docs,
                       const std::vector<LabeledSequence>& train_seqs) {
  if (cfg.scheme == "i2b2") return LabelScheme::i2b2();
  if (cfg.scheme == "custom") return LabelScheme::from_types(cfg.types);
  if (!train_docs.empty()) return LabelScheme::from_corpus(train_docs);
  std::vector<std::string> types;
  for (const auto& seq : train_seqs) {
    for (const auto& span : decode_entities(seq.tags)) types.push_back(span.type);
  }
  return LabelScheme::from_types(std::move(types));
}

void finish_split(LoadedSplit& split, const LabelScheme& scheme,
                  std::vector<std::string>* warnings) {
  resolve_labels(split.documents, scheme);
  resolve_overlaps(split.documents, warnings);
  split.sequences.reserve(split.documents.size());
  for (const auto& doc : split.documents) {
    split.sequences.push_back(document_to_sequence(doc, warnings));
  }
}

}  // namespace

std::vector<LabeledSequence> sequences_from_conll(const std::vector<ConllSequence>& raw) {
  std::vector<LabeledSequence> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    LabeledSequence seq;
    seq.doc_id = "seq" + std::to_string(i + 1);
    seq.raw_tokens = raw[i].tokens;
    seq.tokens = normalize_numbers(raw[i].tokens);
    seq.tags = raw[i].tags;
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<ConllSequence> sequences_to_conll(const std::vector<LabeledSequence>& seqs) {
  std::vector<ConllSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back({s.tokens, s.tags});
  return out;
}

LoadedData load_data(const DataConfig& cfg) {
  LoadedData data;
  if (cfg.format == "conll") {
    if (!cfg.train_path.empty()) {
      data.train.sequences = sequences_from_conll(read_conll_file(cfg.train_path));
    }
    if (!cfg.dev_path.empty()) {
      data.dev.sequences = sequences_from_conll(read_conll_file(cfg.dev_path));
    }
    data.scheme = scheme_for(cfg, {}, data.train.sequences);
    return data;
  }

  if (cfg.format == "pubtator") {
    data.train.documents = load_pubtator_split(cfg.train_path, cfg.train_ids);
    data.dev.documents = load_pubtator_split(cfg.dev_path, cfg.dev_ids);
  } else {
    I2b2Options opts;
    opts.tokens_zero_based = cfg.i2b2_zero_based;
    data.train.documents = load_i2b2_split(cfg.train_path, cfg.train_concepts, opts, &data.warnings);
    data.dev.documents = load_i2b2_split(cfg.dev_path, cfg.dev_concepts, opts, &data.warnings);
  }
  data.scheme = scheme_for(cfg, data.train.documents, {});
  finish_split(data.train, data.scheme, &data.warnings);
  finish_split(data.dev, data.scheme, &data.warnings);
  return data;
}

CorpusStats split_stats(const LoadedSplit& split) {
  if (!split.documents.empty()) return corpus_stats(split.documents);
  CorpusStats stats;
  stats.num_documents = static_cast<int>(split.sequences.size());
  for (const auto& seq : split.sequences) {
    stats.num_tokens += static_cast<long long>(seq.tokens.size());
    for (const auto& span : decode_entities(seq.tags)) {
      ++stats.num_entities;
      ++stats.entities_per_type[span.type];
    }
  }
  stats.num_types = static_cast<int>(stats.entities_per_type.size());
  return stats;
}

std::string render_stats(const CorpusStats& stats) {
  std::ostringstream out;
  out << "documents " << stats.num_documents << "\n"
      << "tokens    " << stats.num_tokens << "\n"
      << "entities  " << stats.num_entities << "\n"
      << "types     " << stats.num_types << "\n";
  for (const auto& [type, count] : stats.entities_per_type) {
    out << "  " << type << " " << count << "\n";
  }
  return out.str();
}

nlohmann::json to_json(const CorpusStats& stats) {
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& [type, count] : stats.entities_per_type) per_type[type] = count;
  return {{"documents", stats.num_documents},
          {"tokens", stats.num_tokens},
          {"entities", stats.num_entities},
          {"types", stats.num_types},
          {"entities_per_type", per_type}};
}

}  // namespace medtag
