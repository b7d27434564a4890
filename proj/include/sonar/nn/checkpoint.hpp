#pragma once

#include <cstring>
#include <fstream>
#include <map>

#include "sonar/features/features.hpp"
#include "sonar/nn/adagrad.hpp"
#include "sonar/nn/models.hpp"

namespace sonar::nn {

// Named-tensor container: magic "HLT1", u32 record count, then records of
// (u32 name_len, name, u32 rank, u32 dims..., float32 data). Little-endian,
// raw float bits, so save/load round-trips exactly.
struct CheckpointRecord {
  Shape shape;
  std::vector<float> data;
};

using Checkpoint = std::map<std::string, CheckpointRecord>;

namespace detail {
inline void put_u32(std::ofstream& out, uint32_t v) {
  char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
  out.write(b, 4);
}
inline uint32_t get_u32(std::ifstream& in, const std::string& path) {
  uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("truncated checkpoint: " + path);
  }
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create checkpoint: " + path);
  out.write("HLT1", 4);
  detail::put_u32(out, static_cast<uint32_t>(ckpt.size()));
  for (const auto& [name, rec] : ckpt) {
    detail::put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(out, static_cast<uint32_t>(rec.shape.size()));
    for (size_t d : rec.shape) detail::put_u32(out, static_cast<uint32_t>(d));
    out.write(reinterpret_cast<const char*>(rec.data.data()),
              static_cast<std::streamsize>(rec.data.size() * 4));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "HLT1", 4) != 0) {
    throw std::runtime_error("not a HLT1 checkpoint: " + path);
  }
  const uint32_t count = detail::get_u32(in, path);
  Checkpoint ckpt;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = detail::get_u32(in, path);
    if (name_len > 4096) {
      throw std::runtime_error("implausible name length in checkpoint: " + path);
    }
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw std::runtime_error("truncated checkpoint: " + path);
    }
    CheckpointRecord rec;
    const uint32_t rank = detail::get_u32(in, path);
    if (rank > 8) {
      throw std::runtime_error("implausible tensor rank in checkpoint: " + path);
    }
    size_t numel = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      rec.shape.push_back(detail::get_u32(in, path));
      numel *= rec.shape.back();
    }
    if (numel > (1u << 28)) {
      throw std::runtime_error("implausible tensor size in checkpoint: " + path);
    }
    rec.data.resize(numel);
    if (!in.read(reinterpret_cast<char*>(rec.data.data()),
                 static_cast<std::streamsize>(numel * 4))) {
      throw std::runtime_error("truncated checkpoint: " + path);
    }
    ckpt.emplace(std::move(name), std::move(rec));
  }
  return ckpt;
}

// ---- model <-> checkpoint ---------------------------------------------------

inline Checkpoint model_to_checkpoint(const Model<float>& model,
                                      const Adagrad<float>* opt,
                                      const features::FeatureStats* stats,
                                      features::FeatureKind feature_kind) {
  Checkpoint ckpt;
  for (size_t i = 0; i < model.params.size(); ++i) {
    ckpt[model.names[i]] = {model.params[i].shape(), model.params[i].values()};
  }
  if (opt && !opt->accumulators().empty()) {
    for (size_t i = 0; i < model.params.size(); ++i) {
      ckpt["optim." + model.names[i]] = {model.params[i].shape(),
                                         opt->accumulators()[i]};
    }
  }
  const auto& c = model.cfg;
  ckpt["meta.config"] = {
      {12},
      {static_cast<float>(c.block_channels[0]),
       static_cast<float>(c.block_channels[1]),
       static_cast<float>(c.block_channels[2]),
       static_cast<float>(c.block_channels[3]), static_cast<float>(c.conv_kernel),
       static_cast<float>(c.pool), static_cast<float>(c.embed_dim),
       static_cast<float>(c.num_classes), static_cast<float>(c.bins),
       static_cast<float>(c.dropout_p), static_cast<float>(c.input_freq),
       static_cast<float>(c.input_time)}};
  ckpt["meta.model"] = {{1}, {static_cast<float>(static_cast<int>(model.kind))}};
  ckpt["meta.feature"] = {{1},
                          {static_cast<float>(static_cast<int>(feature_kind))}};
  if (stats) {
    ckpt["meta.norm"] = {{3},
                         {static_cast<float>(stats->mean),
                          static_cast<float>(stats->std_dev),
                          static_cast<float>(stats->count)}};
  }
  return ckpt;
}

struct LoadedModel {
  Model<float> model;
  features::FeatureKind feature_kind = features::FeatureKind::STFT;
  features::FeatureStats stats;
  bool has_stats = false;
};

inline LoadedModel checkpoint_to_model(const Checkpoint& ckpt) {
  auto need = [&](const std::string& name) -> const CheckpointRecord& {
    auto it = ckpt.find(name);
    if (it == ckpt.end()) {
      throw std::runtime_error("checkpoint is missing record '" + name + "'");
    }
    return it->second;
  };
  const auto& mc = need("meta.config").data;
  if (mc.size() != 12) throw std::runtime_error("bad meta.config in checkpoint");
  ModelConfig cfg;
  cfg.block_channels = {static_cast<size_t>(mc[0]), static_cast<size_t>(mc[1]),
                        static_cast<size_t>(mc[2]), static_cast<size_t>(mc[3])};
  cfg.conv_kernel = static_cast<size_t>(mc[4]);
  cfg.pool = static_cast<size_t>(mc[5]);
  cfg.embed_dim = static_cast<size_t>(mc[6]);
  cfg.num_classes = static_cast<size_t>(mc[7]);
  cfg.bins = static_cast<size_t>(mc[8]);
  cfg.dropout_p = mc[9];
  cfg.input_freq = static_cast<size_t>(mc[10]);
  cfg.input_time = static_cast<size_t>(mc[11]);
  const auto kind =
      static_cast<ModelKind>(static_cast<int>(need("meta.model").data.at(0)));

  LoadedModel out;
  Rng rng(0);  // values are overwritten below
  out.model = build_model<float>(kind, cfg, rng);
  for (size_t i = 0; i < out.model.params.size(); ++i) {
    const auto& rec = need(out.model.names[i]);
    if (rec.data.size() != out.model.params[i].numel()) {
      throw std::runtime_error("checkpoint record '" + out.model.names[i] +
                               "' has wrong size");
    }
    out.model.params[i].values() = rec.data;
  }
  out.feature_kind = static_cast<features::FeatureKind>(
      static_cast<int>(need("meta.feature").data.at(0)));
  if (auto it = ckpt.find("meta.norm"); it != ckpt.end()) {
    out.stats.kind = out.feature_kind;
    out.stats.mean = it->second.data.at(0);
    out.stats.std_dev = it->second.data.at(1);
    out.stats.count = static_cast<size_t>(it->second.data.at(2));
    out.has_stats = true;
  }
  return out;
}

inline void optimizer_from_checkpoint(const Checkpoint& ckpt,
                                      const Model<float>& model,
                                      Adagrad<float>& opt) {
  auto& accum = opt.accumulators();
  accum.clear();
  for (size_t i = 0; i < model.params.size(); ++i) {
    auto it = ckpt.find("optim." + model.names[i]);
    if (it == ckpt.end()) {
      throw std::runtime_error("checkpoint has no optimizer state for '" +
                               model.names[i] + "'");
    }
    accum.push_back(it->second.data);
  }
}

}  // namespace sonar::nn
