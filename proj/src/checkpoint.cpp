#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "medtag/training.hpp"

namespace medtag {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'C', 'K', 'P', 'T', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated header length");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated parameter data");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

nlohmann::json recurrent_to_json(const RecurrentConfig& c) {
  return {{"word_dim", c.word_dim},     {"char_dim", c.char_dim}, {"char_hidden", c.char_hidden},
          {"hidden", c.hidden},         {"layers", c.layers},     {"dropout", c.dropout}};
}

RecurrentConfig recurrent_from_json(const nlohmann::json& j) {
  RecurrentConfig c;
  c.word_dim = j.at("word_dim");
  c.char_dim = j.at("char_dim");
  c.char_hidden = j.at("char_hidden");
  c.hidden = j.at("hidden");
  c.layers = j.at("layers");
  c.dropout = j.at("dropout");
  return c;
}

nlohmann::json encoder_to_json(const TransformerConfig& c) {
  return {{"layers", c.layers},   {"dim", c.dim},
          {"heads", c.heads},     {"ff_dim", c.ff_dim},
          {"max_positions", c.max_positions}, {"dropout", c.dropout},
          {"vocab_size", c.vocab_size}};
}

TransformerConfig encoder_from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.layers = j.at("layers");
  c.dim = j.at("dim");
  c.heads = j.at("heads");
  c.ff_dim = j.at("ff_dim");
  c.max_positions = j.at("max_positions");
  c.dropout = j.at("dropout");
  c.vocab_size = j.at("vocab_size");
  return c;
}

}  // namespace

void save_checkpoint(const Tagger& tagger, const std::string& path) {
  nlohmann::json header;
  header["kind"] = to_string(tagger.config.kind);
  header["seed"] = tagger.seed;
  header["scheme"] = tagger.scheme.types;
  header["recurrent"] = recurrent_to_json(tagger.config.recurrent);
  header["encoder"] = encoder_to_json(tagger.config.encoder);
  header["second_encoder"] = encoder_to_json(tagger.config.second_encoder);
  header["words"] = tagger.words.words;
  header["chars"] = tagger.chars.chars;
  header["subwords"] = tagger.subwords.pieces;
  header["second_subwords"] = tagger.second_subwords.pieces;
  auto entries = nlohmann::json::array();
  for (const auto* p : tagger.params.all()) {
    entries.push_back({{"name", p->name}, {"shape", p->value.shape}});
  }
  header["params"] = std::move(entries);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  std::string head = header.dump();
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(head.size()));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto* p : tagger.params.all()) {
    for (double v : p->value.data) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Tagger load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + " is not a model checkpoint");
  }
  std::uint32_t head_len = get_u32(in);
  std::string head(head_len, '\0');
  in.read(head.data(), head_len);
  if (!in) throw std::runtime_error("checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad header: ") + e.what());
  }

  Tagger t;
  t.config.kind = model_kind_from_string(header.at("kind"));
  t.seed = header.at("seed");
  t.scheme = LabelScheme::from_types(header.at("scheme").get<std::vector<std::string>>());
  t.config.recurrent = recurrent_from_json(header.at("recurrent"));
  t.config.encoder = encoder_from_json(header.at("encoder"));
  t.config.second_encoder = encoder_from_json(header.at("second_encoder"));
  t.word_tags = TagMap::from_scheme(t.scheme);
  t.piece_labels = TagMap::piece_space(t.scheme);

  auto words = header.at("words").get<std::vector<std::string>>();
  if (!words.empty()) t.words = WordVocab::from_words(std::move(words));
  t.chars = CharVocab::from_chars(header.at("chars").get<std::string>());
  auto pieces = header.at("subwords").get<std::vector<std::string>>();
  if (!pieces.empty()) t.subwords = SubwordVocab::from_pieces(std::move(pieces));
  auto second = header.at("second_subwords").get<std::vector<std::string>>();
  if (!second.empty()) t.second_subwords = SubwordVocab::from_pieces(std::move(second));

  for (const auto& entry : header.at("params")) {
    auto shape = entry.at("shape").get<std::vector<int>>();
    Parameter& p = t.params.create(entry.at("name"), Tensor::zeros(shape));
    for (double& v : p.value.data) v = get_f64(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint: trailing bytes after parameter data");
  }
  return t;
}

}  // namespace medtag
