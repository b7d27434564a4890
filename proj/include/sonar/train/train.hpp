#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sonar/features/features.hpp"
#include "sonar/metrics/metrics.hpp"
#include "sonar/nn/models.hpp"

namespace sonar::train {

struct HyperParams {
  double lr = 0.001;
  int batch = 128;
  int epochs = 100;
  int patience = 10;
  double dropout = 0.5;
  int bins = 16;
  std::vector<uint32_t> seeds = {0, 1, 2};

  void validate() const;
};

// One partition's features for one kind, already normalized with train
// statistics. `reads` counts tensor materializations so tests can assert the
// test split stays untouched until the final evaluation.
struct LoadedSplit {
  std::vector<std::vector<float>> data;  // per sample, F*T padded canvas
  std::vector<int> labels;
  std::vector<std::string> segment_ids;
  size_t freq_bins = 0;
  size_t time_frames = 0;
  mutable uint64_t reads = 0;

  size_t size() const { return labels.size(); }
};

struct DataBundle {
  features::FeatureKind kind = features::FeatureKind::STFT;
  features::FeatureStats stats;  // train-split statistics
  LoadedSplit train, val, test;
};

// Reads every cached feature of `kind` listed in <cache_dir>/index.csv,
// computes train statistics, and normalizes all three splits with them.
DataBundle load_cached(const std::string& cache_dir, features::FeatureKind kind);

// One partition only, normalized with caller-provided statistics (for
// evaluating a checkpoint on data it was not fitted to).
LoadedSplit load_split(const std::string& cache_dir, features::FeatureKind kind,
                       const std::string& partition,
                       const features::FeatureStats& stats);

// (n, 1, F, T) batch tensor for the given sample indices.
nn::Tensor<float> make_batch(const LoadedSplit& split,
                             const std::vector<size_t>& idx,
                             std::vector<int>& labels_out);

struct RunResult {
  uint32_t seed = 0;
  int best_epoch = 0;     // 1-indexed epoch with the lowest validation loss
  int stopped_epoch = 0;  // last epoch actually run
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  metrics::MetricsReport test_metrics;
  std::string checkpoint_path;
};

// Full training protocol for one seed: seeded shuffling, Adagrad, early
// stopping on validation loss, best-snapshot restore, test evaluation.
// Writes checkpoint.bin, curves.csv and metrics.json into run_dir unless
// run_dir is empty. Throws on NaN loss with a diagnostic.
RunResult train_run(nn::ModelKind model_kind, const DataBundle& data,
                    const HyperParams& hp, uint32_t seed,
                    const std::string& run_dir);

// Single eval-mode pass; per-sample computations, so results do not depend
// on how the split is batched.
metrics::MetricsReport evaluate(nn::Model<float>& model,
                                const LoadedSplit& split, int batch);

double split_loss(nn::Model<float>& model, const LoadedSplit& split, int batch);

// Eval-mode penultimate embeddings for the whole split, row-major N x d.
std::vector<float> split_embeddings(nn::Model<float>& model,
                                    const LoadedSplit& split, int batch);

struct MetricStat {
  double mean = 0.0;
  double sigma = 0.0;  // population standard deviation across seeds
  std::vector<double> values;
};

struct ExperimentSummary {
  std::string model;
  std::string feature;
  std::vector<uint32_t> seeds;
  std::vector<uint32_t> aborted_seeds;
  std::vector<std::string> abort_reasons;
  std::vector<int> best_epochs;
  std::vector<std::pair<std::string, MetricStat>> stats;

  const MetricStat& stat(const std::string& name) const;
  std::string to_json() const;
  static ExperimentSummary from_json(const std::string& text);
  void save(const std::string& path) const;
  static ExperimentSummary load(const std::string& path);
};

MetricStat aggregate(const std::vector<double>& values);

// Trains one run per seed and aggregates mean and 1-sigma over the runs that
// completed. Writes run_<seed>/ subdirectories plus summary.json in out_dir.
ExperimentSummary run_experiment(nn::ModelKind model_kind,
                                 features::FeatureKind feature_kind,
                                 const HyperParams& hp,
                                 const std::string& cache_dir,
                                 const std::string& out_dir);

}  // namespace sonar::train
