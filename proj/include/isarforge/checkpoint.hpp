#pragma once

// Versioned binary checkpoint: magic + JSON header (model config, vocab hash,
// dtype, extras) followed by named parameter blobs with shape headers and raw
// little-endian floats.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "isarforge/errors.hpp"
#include "isarforge/model.hpp"

namespace isarforge {

inline constexpr char kCheckpointMagic[4] = {'I', 'S', 'F', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return {
      {"arch", arch_name(cfg.arch)},
      {"model_dim", cfg.model_dim},
      {"ffn_dim", cfg.ffn_dim},
      {"heads", cfg.heads},
      {"enc_layers", cfg.enc_layers},
      {"local_layers", cfg.local_layers},
      {"global_layers", cfg.global_layers},
      {"dec_layers", cfg.dec_layers},
      {"dropout", cfg.dropout},
      {"vocab_size", cfg.vocab_size},
      {"share_embeddings", cfg.share_embeddings},
      {"use_category_embedding", cfg.use_category_embedding},
      {"max_positions", cfg.max_positions},
      {"ln_eps", cfg.ln_eps},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.arch = arch_from_name(j.at("arch").get<std::string>());
  cfg.model_dim = j.at("model_dim").get<std::size_t>();
  cfg.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  cfg.heads = j.at("heads").get<std::size_t>();
  cfg.enc_layers = j.at("enc_layers").get<std::size_t>();
  cfg.local_layers = j.at("local_layers").get<std::size_t>();
  cfg.global_layers = j.at("global_layers").get<std::size_t>();
  cfg.dec_layers = j.at("dec_layers").get<std::size_t>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  cfg.share_embeddings = j.at("share_embeddings").get<bool>();
  cfg.use_category_embedding = j.at("use_category_embedding").get<bool>();
  cfg.max_positions = j.at("max_positions").get<std::size_t>();
  cfg.ln_eps = j.at("ln_eps").get<double>();
  return cfg;
}

namespace detail {

template <class U>
void write_pod(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U read_pod(std::istream& in) {
  U v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!in) throw IoError("truncated checkpoint");
  return v;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, Model<T>& model, std::uint64_t vocab_hash,
                     const nlohmann::json& extra = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCheckpointMagic, 4);
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);

  nlohmann::json header = {
      {"config", model_config_to_json(model.config())},
      {"vocab_hash", vocab_hash},
      {"dtype", sizeof(T) == 4 ? "f32" : "f64"},
  };
  if (!extra.is_null() && !extra.empty()) header["extra"] = extra;
  std::string header_str = header.dump();
  detail::write_pod<std::uint64_t>(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  auto params = model.parameters();
  detail::write_pod<std::uint64_t>(out, params.size());
  for (const auto* p : params) {
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.shape.size()));
    for (std::size_t d : p->value.shape) detail::write_pod<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.data.size() * sizeof(T)));
  }
  if (!out) throw IoError("write failed: " + path);
}

template <class T>
struct LoadedCheckpoint {
  ModelConfig config;
  std::uint64_t vocab_hash = 0;
  nlohmann::json extra;
  // name -> value, in file order
  std::vector<std::pair<std::string, NDArray<T>>> params;
};

template <class T>
LoadedCheckpoint<T> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError(path + ": not a checkpoint (bad magic)");
  auto version = detail::read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));

  auto header_len = detail::read_pod<std::uint64_t>(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("truncated checkpoint header");
  nlohmann::json header = nlohmann::json::parse(header_str);

  std::string dtype = header.at("dtype").get<std::string>();
  std::string expected = sizeof(T) == 4 ? "f32" : "f64";
  if (dtype != expected)
    throw IoError(path + ": dtype is " + dtype + ", expected " + expected);

  LoadedCheckpoint<T> ckpt;
  ckpt.config = model_config_from_json(header.at("config"));
  ckpt.vocab_hash = header.at("vocab_hash").get<std::uint64_t>();
  if (header.contains("extra")) ckpt.extra = header["extra"];

  auto n_params = detail::read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    auto name_len = detail::read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto ndim = detail::read_pod<std::uint32_t>(in);
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<std::size_t>(detail::read_pod<std::uint64_t>(in)));
    NDArray<T> value(shape);
    in.read(reinterpret_cast<char*>(value.data.data()),
            static_cast<std::streamsize>(value.data.size() * sizeof(T)));
    if (!in) throw IoError("truncated checkpoint tensor " + name);
    ckpt.params.emplace_back(std::move(name), std::move(value));
  }
  return ckpt;
}

/// Rebuilds the model from a checkpoint (verifies the vocab hash when given).
template <class T>
Model<T> load_checkpoint(const std::string& path, std::uint64_t expect_vocab_hash = 0) {
  LoadedCheckpoint<T> ckpt = read_checkpoint<T>(path);
  if (expect_vocab_hash != 0 && ckpt.vocab_hash != expect_vocab_hash)
    throw IoError(path + ": checkpoint was trained with a different vocabulary");
  Model<T> model(ckpt.config, /*seed=*/0);
  auto params = model.parameters();
  if (params.size() != ckpt.params.size())
    throw IoError(path + ": parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, value] = ckpt.params[i];
    if (params[i]->name != name || params[i]->value.shape != value.shape)
      throw IoError(path + ": parameter mismatch at " + name);
    params[i]->value = std::move(value);
  }
  return model;
}

}  // namespace isarforge
