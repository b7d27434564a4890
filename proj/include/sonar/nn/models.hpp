#pragma once

#include <optional>

#include "sonar/nn/histogram.hpp"
#include "sonar/nn/init.hpp"
#include "sonar/nn/ops.hpp"

namespace sonar::nn {

enum class ModelKind : uint8_t { TDNN = 0, HLTDNN = 1 };

inline const char* model_name(ModelKind k) {
  return k == ModelKind::TDNN ? "tdnn" : "hltdnn";
}

inline ModelKind model_from_name(const std::string& s) {
  if (s == "tdnn") return ModelKind::TDNN;
  if (s == "hltdnn") return ModelKind::HLTDNN;
  throw ConfigError("unknown model '" + s + "'; expected tdnn or hltdnn");
}

struct ModelConfig {
  std::array<size_t, 4> block_channels = {16, 32, 64, 128};
  size_t conv_kernel = 3;   // square, same padding
  size_t pool = 2;          // time-axis max pool per block
  size_t embed_dim = 128;
  size_t num_classes = 4;
  size_t bins = 16;
  double dropout_p = 0.5;
  size_t input_freq = 48;   // feature rows F
  size_t input_time = 48;   // feature columns T
};

// Four conv blocks (conv -> ReLU -> time max pool), then per-timestep mixing
// to an embedding, sigmoid, time-average; the histogram variant runs a
// parallel soft-binning branch off the last block and concatenates.
template <typename T>
struct Model {
  ModelKind kind = ModelKind::TDNN;
  ModelConfig cfg;
  std::vector<std::string> names;
  std::vector<Tensor<T>> params;
  HistogramLayer<T> hist;  // populated only for HLTDNN

  Tensor<T>& param(const std::string& name) {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return params[i];
    }
    throw std::invalid_argument("model has no parameter named '" + name + "'");
  }

  size_t pooled_time() const {
    size_t t = cfg.input_time;
    for (int i = 0; i < 4; ++i) t /= cfg.pool;
    return t;
  }

  size_t embed_width() const {
    return kind == ModelKind::TDNN
               ? cfg.embed_dim
               : cfg.embed_dim + cfg.bins * cfg.block_channels[3];
  }
};

namespace detail {

template <typename T>
void add_param(Model<T>& m, const std::string& name, Tensor<T> t) {
  t.set_requires_grad(true);
  m.names.push_back(name);
  m.params.push_back(std::move(t));
}

template <typename T>
Model<T> build_model(ModelKind kind, const ModelConfig& cfg, Rng& rng) {
  if (cfg.input_time / (cfg.pool * cfg.pool * cfg.pool * cfg.pool) < 1) {
    throw std::invalid_argument(
        "model config pools the time axis away: input_time " +
        std::to_string(cfg.input_time));
  }
  Model<T> m;
  m.kind = kind;
  m.cfg = cfg;
  const size_t kk = cfg.conv_kernel;
  size_t c_in = 1;
  for (int i = 0; i < 4; ++i) {
    const size_t c_out = cfg.block_channels[i];
    const std::string base = "block" + std::to_string(i + 1) + ".conv.";
    add_param(m, base + "weight",
              kaiming_uniform<T>({c_out, c_in, kk, kk}, c_in * kk * kk, rng));
    add_param(m, base + "bias", Tensor<T>::zeros({c_out}));
    c_in = c_out;
  }
  const size_t flat = cfg.block_channels[3] * cfg.input_freq;
  add_param(m, "head.conv1d.weight",
            kaiming_uniform<T>({cfg.embed_dim, flat, 1}, flat, rng));
  add_param(m, "head.conv1d.bias", Tensor<T>::zeros({cfg.embed_dim}));
  if (kind == ModelKind::HLTDNN) {
    m.hist = init_histogram<T>(cfg.bins, cfg.block_channels[3]);
    add_param(m, "hist.centers", m.hist.centers);
    add_param(m, "hist.widths", m.hist.widths);
  }
  const size_t cls_in = m.embed_width();
  add_param(m, "classifier.weight",
            kaiming_uniform<T>({cfg.num_classes, cls_in}, cls_in, rng));
  add_param(m, "classifier.bias", Tensor<T>::zeros({cfg.num_classes}));
  return m;
}

// Shared trunk + branches up to the pre-dropout embedding vector.
template <typename T>
Tensor<T> penultimate(Model<T>& m, const Tensor<T>& batch) {
  if (batch.rank() != 4 || batch.dim(1) != 1 ||
      batch.dim(2) != m.cfg.input_freq || batch.dim(3) != m.cfg.input_time) {
    throw std::invalid_argument("model expects (N,1," +
                                std::to_string(m.cfg.input_freq) + "," +
                                std::to_string(m.cfg.input_time) + "), got " +
                                shape_str(batch.shape()));
  }
  Tensor<T> x = batch;
  for (int i = 0; i < 4; ++i) {
    const std::string base = "block" + std::to_string(i + 1) + ".conv.";
    x = conv2d(x, m.param(base + "weight"), m.param(base + "bias"));
    x = relu(x);
    x = maxpool_time(x, m.cfg.pool);
  }
  // x: (N, C4, F, T'). Fold channels and frequency into one axis over time.
  const size_t n = x.dim(0), c4 = x.dim(1), f = x.dim(2), tp = x.dim(3);
  Tensor<T> seq = reshape(x, {n, c4 * f, tp});
  Tensor<T> mixed =
      conv1d(seq, m.param("head.conv1d.weight"), m.param("head.conv1d.bias"));
  Tensor<T> embed = global_avg_pool_time(sigmoid(mixed));
  if (m.kind == ModelKind::TDNN) return embed;
  Tensor<T> votes = hist_forward_direct(x, m.hist);
  Tensor<T> desc = reshape(votes, {n, m.cfg.bins * c4});
  return concat(embed, desc);
}

}  // namespace detail

template <typename T>
Model<T> build_tdnn(const ModelConfig& cfg, Rng& rng) {
  return detail::build_model<T>(ModelKind::TDNN, cfg, rng);
}

template <typename T>
Model<T> build_hltdnn(const ModelConfig& cfg, Rng& rng) {
  return detail::build_model<T>(ModelKind::HLTDNN, cfg, rng);
}

template <typename T>
Model<T> build_model(ModelKind kind, const ModelConfig& cfg, Rng& rng) {
  return detail::build_model<T>(kind, cfg, rng);
}

// Logits (N, num_classes). Training mode applies dropout draws from rng.
template <typename T>
Tensor<T> forward(Model<T>& m, const Tensor<T>& batch, bool training, Rng& rng) {
  Tensor<T> emb = detail::penultimate(m, batch);
  Tensor<T> dropped = dropout(emb, m.cfg.dropout_p, training, rng);
  return linear(dropped, m.param("classifier.weight"),
                m.param("classifier.bias"));
}

// Pre-dropout embedding used for separability metrics and export.
template <typename T>
Tensor<T> embed(Model<T>& m, const Tensor<T>& batch) {
  return detail::penultimate(m, batch);
}

template <typename T>
size_t parameter_count(const Model<T>& m) {
  size_t n = 0;
  for (const auto& p : m.params) n += p.numel();
  return n;
}

}  // namespace sonar::nn
