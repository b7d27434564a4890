#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "sonar/nn/adagrad.hpp"
#include "sonar/nn/checkpoint.hpp"
#include "sonar/train/train.hpp"

namespace sonar::train {

namespace fs = std::filesystem;

namespace {

std::vector<std::vector<size_t>> fixed_batches(size_t n, int batch) {
  std::vector<std::vector<size_t>> out;
  for (size_t start = 0; start < n; start += size_t(batch)) {
    size_t end = std::min(n, start + size_t(batch));
    std::vector<size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    out.push_back(std::move(idx));
  }
  return out;
}

// Eval-mode logits without bothering the tape; dropout is identity here.
nn::Tensor<float> eval_logits(nn::Model<float>& model,
                              const nn::Tensor<float>& x) {
  auto emb = nn::embed(model, x);
  return nn::linear(emb, model.param("classifier.weight"),
                    model.param("classifier.bias"));
}

void write_curves(const std::string& path, const RunResult& r) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "epoch,train_loss,val_loss\n";
  char buf[80];
  for (size_t i = 0; i < r.train_curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", i + 1, r.train_curve[i],
                  r.val_curve[i]);
    out << buf;
  }
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace

RunResult train_run(nn::ModelKind model_kind, const DataBundle& data,
                    const HyperParams& hp, uint32_t seed,
                    const std::string& run_dir) {
  hp.validate();
  if (data.train.size() == 0) throw ConfigError("train split is empty");
  if (data.val.size() == 0) throw ConfigError("val split is empty");

  nn::ModelConfig cfg;
  cfg.bins = size_t(hp.bins);
  cfg.dropout_p = hp.dropout;
  cfg.input_freq = data.train.freq_bins;
  cfg.input_time = data.train.time_frames;

  Rng init_rng(seed);
  auto model = nn::build_model<float>(model_kind, cfg, init_rng);
  nn::Adagrad<float> opt(hp.lr);
  Rng order_rng(seed ^ 0x9e3779b9u);
  Rng dropout_rng(seed ^ 0x7f4a7c15u);

  RunResult result;
  result.seed = seed;

  const size_t n_train = data.train.size();
  std::vector<size_t> order(n_train);
  std::iota(order.begin(), order.end(), size_t(0));

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_params;
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    shuffle_inplace(order, order_rng);
    double loss_sum = 0.0;
    std::vector<int> labels;
    for (size_t start = 0; start < n_train; start += size_t(hp.batch)) {
      size_t end = std::min(n_train, start + size_t(hp.batch));
      std::vector<size_t> idx(order.begin() + long(start),
                              order.begin() + long(end));
      auto x = make_batch(data.train, idx, labels);

      nn::Tape<float> tape;
      nn::TapeGuard<float> guard(tape);
      for (auto& p : model.params) p.zero_grad();
      auto logits = nn::forward(model, x, true, dropout_rng);
      auto loss = nn::softmax_cross_entropy(logits, labels);
      double lv = double(loss.item());
      if (!std::isfinite(lv))
        throw std::runtime_error(
            "training aborted: non-finite loss at seed " +
            std::to_string(seed) + ", epoch " + std::to_string(epoch) +
            ", batch starting at sample " + std::to_string(start));
      loss_sum += lv * double(idx.size());
      nn::backward(loss, tape);
      opt.step(model.params);
    }
    result.train_curve.push_back(loss_sum / double(n_train));

    double val = split_loss(model, data.val, hp.batch);
    if (!std::isfinite(val))
      throw std::runtime_error(
          "training aborted: non-finite validation loss at seed " +
          std::to_string(seed) + ", epoch " + std::to_string(epoch));
    result.val_curve.push_back(val);
    result.stopped_epoch = epoch;

    if (val < best_val - 1e-6) {
      best_val = val;
      result.best_epoch = epoch;
      epochs_since_best = 0;
      best_params.clear();
      for (const auto& p : model.params) best_params.push_back(p.values());
    } else {
      ++epochs_since_best;
    }
    if (epochs_since_best >= hp.patience) break;
  }

  for (size_t i = 0; i < model.params.size(); ++i)
    model.params[i].data()->v = best_params[i];

  if (data.test.size() == 0) throw ConfigError("test split is empty");
  result.test_metrics = evaluate(model, data.test, hp.batch);

  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    result.checkpoint_path = (fs::path(run_dir) / "checkpoint.bin").string();
    auto ckpt = nn::model_to_checkpoint(model, &opt, &data.stats, data.kind);
    nn::save_checkpoint(result.checkpoint_path, ckpt);
    write_curves((fs::path(run_dir) / "curves.csv").string(), result);
    result.test_metrics.save((fs::path(run_dir) / "metrics.json").string());
  }
  return result;
}

metrics::MetricsReport evaluate(nn::Model<float>& model,
                                const LoadedSplit& split, int batch) {
  if (split.size() == 0) throw ConfigError("evaluate: empty split");
  if (batch < 1) throw std::invalid_argument("evaluate: bad batch size");

  const size_t d = model.embed_width();
  std::vector<float> embeddings;
  embeddings.reserve(split.size() * d);
  std::vector<int> preds(split.size());
  std::vector<int> labels;

  for (const auto& idx : fixed_batches(split.size(), batch)) {
    auto x = make_batch(split, idx, labels);
    auto emb = nn::embed(model, x);
    auto logits = nn::linear(emb, model.param("classifier.weight"),
                             model.param("classifier.bias"));
    const auto& ev = emb.data()->v;
    embeddings.insert(embeddings.end(), ev.begin(), ev.end());
    const auto& lv = logits.data()->v;
    const size_t c = model.cfg.num_classes;
    for (size_t r = 0; r < idx.size(); ++r) {
      size_t best = 0;
      for (size_t j = 1; j < c; ++j)
        if (lv[r * c + j] > lv[r * c + best]) best = j;
      preds[idx[r]] = int(best);
    }
  }

  metrics::MetricsReport rep;
  rep.confusion =
      metrics::confusion(preds, split.labels, model.cfg.num_classes);
  rep.cls = metrics::classification_metrics(rep.confusion);
  rep.mcc = metrics::mcc(rep.confusion);
  rep.fdr = metrics::fdr(embeddings, d, split.labels, model.cfg.num_classes);
  return rep;
}

double split_loss(nn::Model<float>& model, const LoadedSplit& split,
                  int batch) {
  if (split.size() == 0) throw ConfigError("split_loss: empty split");
  double total = 0.0;
  std::vector<int> labels;
  Rng unused(0);
  for (const auto& idx : fixed_batches(split.size(), batch)) {
    auto x = make_batch(split, idx, labels);
    auto logits = nn::forward(model, x, false, unused);
    auto loss = nn::softmax_cross_entropy(logits, labels);
    total += double(loss.item()) * double(idx.size());
  }
  return total / double(split.size());
}

std::vector<float> split_embeddings(nn::Model<float>& model,
                                    const LoadedSplit& split, int batch) {
  std::vector<float> out;
  out.reserve(split.size() * model.embed_width());
  std::vector<int> labels;
  for (const auto& idx : fixed_batches(split.size(), batch)) {
    auto x = make_batch(split, idx, labels);
    auto emb = nn::embed(model, x);
    const auto& ev = emb.data()->v;
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

}  // namespace sonar::train
