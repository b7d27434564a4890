#include <numbers>

#include "sonar/features/features.hpp"

namespace sonar::features {

const char* kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::MS: return "ms";
    case FeatureKind::MFCC: return "mfcc";
    case FeatureKind::STFT: return "stft";
    case FeatureKind::GFCC: return "gfcc";
    case FeatureKind::CQT: return "cqt";
    default: return "vqt";
  }
}

FeatureKind kind_from_name(const std::string& name) {
  for (FeatureKind k : kAllKinds) {
    if (name == kind_name(k)) return k;
  }
  throw ConfigError("unknown feature kind '" + name +
                    "'; expected one of ms, mfcc, stft, gfcc, cqt, vqt");
}

std::array<size_t, 2> padded_shape(FeatureKind k, const FeatureConfig& cfg) {
  const size_t t = static_cast<size_t>(cfg.pad_time);
  switch (k) {
    case FeatureKind::MS: return {static_cast<size_t>(cfg.stft_bins), t};
    case FeatureKind::STFT: return {static_cast<size_t>(cfg.stft_bins), t};
    case FeatureKind::MFCC: return {static_cast<size_t>(cfg.n_mfcc), t};
    case FeatureKind::GFCC: return {static_cast<size_t>(cfg.gfcc_bins), t};
    case FeatureKind::CQT: return {static_cast<size_t>(cfg.cqt_bins), t};
    default: return {static_cast<size_t>(cfg.vqt_bins), t};
  }
}

std::array<size_t, 2> raw_shape(FeatureKind k, const FeatureConfig& cfg) {
  const size_t t = frame_count(audio::kSegmentSamples, cfg);
  switch (k) {
    case FeatureKind::MS: return {static_cast<size_t>(cfg.n_mels), t};
    case FeatureKind::STFT: return {static_cast<size_t>(cfg.stft_bins), t};
    case FeatureKind::MFCC: return {static_cast<size_t>(cfg.n_mfcc), t};
    case FeatureKind::GFCC: return {static_cast<size_t>(cfg.gfcc_bins), t};
    case FeatureKind::CQT: return {static_cast<size_t>(cfg.cqt_bins), t};
    default: return {static_cast<size_t>(cfg.vqt_bins), t};
  }
}

size_t frame_count(size_t n_samples, const FeatureConfig& cfg) {
  return n_samples / static_cast<size_t>(cfg.hop_samples()) + 1;
}

namespace {

// Reflect indexing without repeating the edge sample: x[-i] = x[i].
inline double reflect_at(const std::vector<double>& x, long i) {
  const long n = static_cast<long>(x.size());
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return x[static_cast<size_t>(i)];
}

}  // namespace

std::vector<std::vector<double>> frame_signal(const std::vector<double>& x,
                                              const FeatureConfig& cfg) {
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  if (x.empty()) throw std::invalid_argument("frame_signal: empty input");

  std::vector<double> hann(win);
  for (int i = 0; i < win; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
  }

  const size_t t_frames = frame_count(x.size(), cfg);
  std::vector<std::vector<double>> frames(t_frames, std::vector<double>(win));
  for (size_t t = 0; t < t_frames; ++t) {
    const long start = static_cast<long>(t) * hop - win / 2;
    for (int i = 0; i < win; ++i) {
      frames[t][i] = hann[i] * reflect_at(x, start + i);
    }
  }
  return frames;
}

}  // namespace sonar::features
