#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "sonar/audio/audio.hpp"

namespace sonar::audio {

const char* split_name(PartitionSpec::Split s) {
  switch (s) {
    case PartitionSpec::Split::Train: return "train";
    case PartitionSpec::Split::Val: return "val";
    default: return "test";
  }
}

PartitionSpec::Split PartitionSpec::split_of(const std::string& record_id) const {
  if (train.count(record_id)) return Split::Train;
  if (val.count(record_id)) return Split::Val;
  if (test.count(record_id)) return Split::Test;
  throw std::runtime_error("record '" + record_id + "' is not in the partition");
}

PartitionSpec partition(const DatasetManifest& manifest,
                        const std::array<double, 3>& ratios, uint32_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("partition ratios must be positive and sum to 1");
  }

  std::array<std::vector<std::string>, kNumClasses> by_class;
  for (const auto& e : manifest.entries) {
    if (e.label < 0 || e.label >= kNumClasses) {
      throw ConfigError("manifest entry '" + e.record_id +
                        "' has label outside 0.." +
                        std::to_string(kNumClasses - 1));
    }
    by_class[e.label].push_back(e.record_id);
  }

  PartitionSpec spec;
  spec.seed = seed;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& ids = by_class[c];
    if (ids.size() < 3) {
      throw ConfigError("class '" + manifest.class_names[c] + "' has only " +
                        std::to_string(ids.size()) +
                        " signals; need at least one per split");
    }
    // Shuffle order must not depend on manifest row order, only on content.
    std::sort(ids.begin(), ids.end());
    Rng rng(seed + static_cast<uint32_t>(c) * 0x9e3779b9u);
    shuffle_inplace(ids, rng);

    const double n = static_cast<double>(ids.size());
    // Snap quotas that land within 1e-9 of an integer before rounding, so
    // 0.15*240 == 36 despite the product evaluating to 35.999999....
    const size_t n_train =
        static_cast<size_t>(std::ceil(ratios[0] * n - 1e-9));
    const size_t n_val = static_cast<size_t>(std::floor(ratios[1] * n + 1e-9));
    if (n_train + n_val >= ids.size()) {
      throw ConfigError("class '" + manifest.class_names[c] +
                        "' leaves no signals for the test split");
    }
    size_t i = 0;
    for (; i < n_train; ++i) spec.train.insert(ids[i]);
    for (; i < n_train + n_val; ++i) spec.val.insert(ids[i]);
    for (; i < ids.size(); ++i) spec.test.insert(ids[i]);
  }
  return spec;
}

PartitionSpec read_partition(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open partition file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("partition file " + path + " is not valid JSON: " +
                      e.what());
  }
  PartitionSpec spec;
  try {
    spec.seed = j.at("seed").get<uint32_t>();
    for (const auto& id : j.at("train")) spec.train.insert(id.get<std::string>());
    for (const auto& id : j.at("val")) spec.val.insert(id.get<std::string>());
    for (const auto& id : j.at("test")) spec.test.insert(id.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError("partition file " + path + " has bad structure: " +
                      e.what());
  }
  return spec;
}

void write_partition(const std::string& path, const PartitionSpec& spec) {
  nlohmann::json j;
  j["seed"] = spec.seed;
  j["train"] = spec.train;
  j["val"] = spec.val;
  j["test"] = spec.test;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot create partition file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing partition file: " + path);
}

}  // namespace sonar::audio
