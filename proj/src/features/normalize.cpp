#include "sonar/features/features.hpp"

namespace sonar::features {

FeatureStats compute_stats(const std::vector<const TimeFrequencyFeature*>& fs) {
  if (fs.empty()) throw std::invalid_argument("compute_stats: no features");
  FeatureStats st;
  st.kind = fs.front()->kind;
  double sum = 0.0, sumsq = 0.0;
  size_t n = 0;
  for (const auto* f : fs) {
    if (f->kind != st.kind) {
      throw std::invalid_argument("compute_stats: mixed feature kinds");
    }
    for (size_t r = 0; r < f->raw_freq; ++r) {
      for (size_t t = 0; t < f->raw_time; ++t) {
        const double v = f->at(r, t);
        sum += v;
        sumsq += v * v;
        ++n;
      }
    }
  }
  st.count = n;
  st.mean = sum / n;
  const double var = sumsq / n - st.mean * st.mean;
  st.std_dev = std::sqrt(var > 0.0 ? var : 0.0);
  if (st.std_dev < 1e-6) st.std_dev = 1e-6;
  return st;
}

TimeFrequencyFeature normalize(const TimeFrequencyFeature& f,
                               const FeatureStats& stats) {
  if (f.kind != stats.kind) {
    throw std::invalid_argument("normalize: stats are for a different feature kind");
  }
  TimeFrequencyFeature out = f;
  for (size_t r = 0; r < out.freq_bins; ++r) {
    for (size_t t = 0; t < out.time_frames; ++t) {
      if (r < out.raw_freq && t < out.raw_time) {
        out.at(r, t) = static_cast<float>((f.at(r, t) - stats.mean) / stats.std_dev);
      } else {
        out.at(r, t) = 0.0f;  // padded cells stay statistically neutral
      }
    }
  }
  out.normalized = true;
  return out;
}

}  // namespace sonar::features
