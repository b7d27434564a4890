#include <cmath>
#include <numbers>

#include "sonar/features/features.hpp"

namespace sonar::features {

std::vector<double> cq_center_freqs(const FeatureConfig& cfg) {
  std::vector<double> fc(cfg.cqt_bins);
  for (int k = 0; k < cfg.cqt_bins; ++k) {
    fc[k] = cfg.cqt_fmin *
            std::pow(2.0, static_cast<double>(k) / cfg.bins_per_octave);
  }
  return fc;
}

Matrix cq_magnitudes(const std::vector<double>& x, const FeatureConfig& cfg,
                     double gamma) {
  const auto fc = cq_center_freqs(cfg);
  const double q = 1.0 / (std::pow(2.0, 1.0 / cfg.bins_per_octave) - 1.0);
  const double nyquist = cfg.sample_rate / 2.0;
  if (fc.back() >= nyquist) {
    throw std::invalid_argument("cq_magnitudes: top bin reaches Nyquist");
  }

  // Per-bin analysis window length from the effective bandwidth f/Q + gamma.
  std::vector<int> lens(fc.size());
  int max_len = 0;
  for (size_t k = 0; k < fc.size(); ++k) {
    const double bw = fc[k] / q + gamma;
    int len = static_cast<int>(std::lround(cfg.sample_rate / bw));
    if (len < 2) len = 2;
    lens[k] = len;
    max_len = std::max(max_len, len);
  }

  const long n = static_cast<long>(x.size());
  if (n < 2) throw std::invalid_argument("cq_magnitudes: input too short");
  auto sample_at = [&](long i) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return x[static_cast<size_t>(i)];
  };

  const int hop = cfg.hop_samples();
  const size_t t_frames = frame_count(x.size(), cfg);
  Matrix mag(fc.size(), t_frames);
  for (size_t k = 0; k < fc.size(); ++k) {
    const int len = lens[k];
    std::vector<double> wc(len), ws(len);
    double wsum = 0.0;
    for (int i = 0; i < len; ++i) {
      const double w =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / len);
      const double ph =
          2.0 * std::numbers::pi * fc[k] * (i - len / 2) / cfg.sample_rate;
      wc[i] = w * std::cos(ph);
      ws[i] = w * std::sin(ph);
      wsum += w;
    }
    // 2/wsum makes a full-scale sine at fc produce magnitude ~1.
    const double scale = 2.0 / wsum;
    for (size_t t = 0; t < t_frames; ++t) {
      const long center = static_cast<long>(t) * hop;
      double re = 0.0, im = 0.0;
      for (int i = 0; i < len; ++i) {
        const double v = sample_at(center - len / 2 + i);
        re += wc[i] * v;
        im += ws[i] * v;
      }
      mag.at(k, t) = scale * std::hypot(re, im);
    }
  }
  return mag;
}

}  // namespace sonar::features
