#include <algorithm>
#include <filesystem>

#include "sonar/train/train.hpp"

namespace sonar::train {

namespace fs = std::filesystem;

void HyperParams::validate() const {
  if (lr <= 0) throw ConfigError("hyperparams: lr must be positive");
  if (batch < 1) throw ConfigError("hyperparams: batch must be positive");
  if (epochs < 1) throw ConfigError("hyperparams: epochs must be positive");
  if (patience < 1) throw ConfigError("hyperparams: patience must be positive");
  if (patience > epochs)
    throw ConfigError("hyperparams: patience must not exceed epochs");
  if (dropout < 0 || dropout >= 1)
    throw ConfigError("hyperparams: dropout must be in [0, 1)");
  if (bins < 1) throw ConfigError("hyperparams: bins must be positive");
  if (seeds.empty()) throw ConfigError("hyperparams: seeds must be non-empty");
}

namespace {

struct RawSplit {
  std::vector<features::TimeFrequencyFeature> feats;
  std::vector<std::string> ids;
};

RawSplit read_rows(const std::string& cache_dir, features::FeatureKind kind,
                   const std::string& partition) {
  auto rows = features::read_cache_index(
      (fs::path(cache_dir) / "index.csv").string());
  RawSplit out;
  for (const auto& row : rows) {
    if (row.kind != kind || row.partition != partition) continue;
    fs::path p(row.path);
    if (!p.is_absolute()) p = fs::path(cache_dir) / p;
    auto f = features::read_feature(p.string());
    if (f.kind != kind)
      throw ConfigError("cache mismatch: " + row.path +
                        " holds a different feature kind than the index");
    if (f.label != row.label)
      throw ConfigError("cache mismatch: " + row.path +
                        " label disagrees with the index");
    out.feats.push_back(std::move(f));
    out.ids.push_back(row.segment_id);
  }
  return out;
}

LoadedSplit normalize_split(RawSplit raw, const features::FeatureStats& stats) {
  LoadedSplit split;
  split.segment_ids = std::move(raw.ids);
  for (auto& f : raw.feats) {
    auto norm = features::normalize(f, stats);
    if (split.freq_bins == 0) {
      split.freq_bins = norm.freq_bins;
      split.time_frames = norm.time_frames;
    } else if (split.freq_bins != norm.freq_bins ||
               split.time_frames != norm.time_frames) {
      throw ConfigError("cache mismatch: inconsistent feature shapes");
    }
    split.labels.push_back(norm.label);
    split.data.push_back(std::move(norm.data));
  }
  return split;
}

}  // namespace

DataBundle load_cached(const std::string& cache_dir,
                       features::FeatureKind kind) {
  RawSplit raw_train = read_rows(cache_dir, kind, "train");
  if (raw_train.feats.empty())
    throw ConfigError("no cached '" + std::string(features::kind_name(kind)) +
                      "' features found in " + cache_dir +
                      "; run the extract step first");

  std::vector<const features::TimeFrequencyFeature*> train_ptrs;
  for (const auto& f : raw_train.feats) train_ptrs.push_back(&f);

  DataBundle bundle;
  bundle.kind = kind;
  bundle.stats = features::compute_stats(train_ptrs);
  bundle.train = normalize_split(std::move(raw_train), bundle.stats);
  bundle.val =
      normalize_split(read_rows(cache_dir, kind, "val"), bundle.stats);
  bundle.test =
      normalize_split(read_rows(cache_dir, kind, "test"), bundle.stats);
  return bundle;
}

LoadedSplit load_split(const std::string& cache_dir, features::FeatureKind kind,
                       const std::string& partition,
                       const features::FeatureStats& stats) {
  if (partition != "train" && partition != "val" && partition != "test")
    throw ConfigError("unknown partition '" + partition +
                      "' (expected train, val or test)");
  auto raw = read_rows(cache_dir, kind, partition);
  if (raw.feats.empty())
    throw ConfigError("no cached '" + std::string(features::kind_name(kind)) +
                      "' features for partition '" + partition + "' in " +
                      cache_dir + "; run the extract step first");
  return normalize_split(std::move(raw), stats);
}

nn::Tensor<float> make_batch(const LoadedSplit& split,
                             const std::vector<size_t>& idx,
                             std::vector<int>& labels_out) {
  if (idx.empty()) throw std::invalid_argument("make_batch: empty index list");
  const size_t plane = split.freq_bins * split.time_frames;
  auto out = nn::Tensor<float>::zeros(
      {idx.size(), 1, split.freq_bins, split.time_frames});
  auto& v = out.data()->v;
  labels_out.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& sample = split.data.at(idx[i]);
    std::copy(sample.begin(), sample.end(), v.begin() + long(i * plane));
    labels_out[i] = split.labels[idx[i]];
  }
  split.reads += idx.size();
  return out;
}

}  // namespace sonar::train
