#include <cmath>
#include <numbers>

#include "sonar/features/features.hpp"
#include "sonar/features/fft.hpp"

namespace sonar::features {

namespace {
// Glasberg & Moore ERB-rate scale.
inline double hz_to_erb_rate(double f) {
  return 21.4 * std::log10(1.0 + 0.00437 * f);
}
inline double erb_rate_to_hz(double e) {
  return (std::pow(10.0, e / 21.4) - 1.0) / 0.00437;
}
inline double erb_bandwidth(double f) { return 24.7 * (0.00437 * f + 1.0); }
}  // namespace

std::vector<double> gammatone_center_freqs(int n_channels, double fmin,
                                           double fmax) {
  if (n_channels < 1) throw std::invalid_argument("need at least one channel");
  std::vector<double> fc(n_channels);
  const double lo = hz_to_erb_rate(fmin);
  const double hi = hz_to_erb_rate(fmax);
  for (int i = 0; i < n_channels; ++i) {
    fc[i] = n_channels == 1
                ? erb_rate_to_hz((lo + hi) / 2)
                : erb_rate_to_hz(lo + (hi - lo) * i / (n_channels - 1));
  }
  return fc;
}

std::vector<std::vector<double>> gammatone_filterbank(
    const std::vector<double>& center_freqs, int sample_rate, int ir_len) {
  const int order = 4;
  const double b_factor = 1.019;
  std::vector<std::vector<double>> bank;
  bank.reserve(center_freqs.size());
  for (double fc : center_freqs) {
    std::vector<double> ir(ir_len);
    const double b = b_factor * erb_bandwidth(fc);
    for (int n = 0; n < ir_len; ++n) {
      const double t = static_cast<double>(n) / sample_rate;
      ir[n] = std::pow(t, order - 1) * std::exp(-2.0 * std::numbers::pi * b * t) *
              std::cos(2.0 * std::numbers::pi * fc * t);
    }
    // Unit gain at the center frequency so channel responses are comparable.
    double re = 0.0, im = 0.0;
    for (int n = 0; n < ir_len; ++n) {
      const double ph = 2.0 * std::numbers::pi * fc * n / sample_rate;
      re += ir[n] * std::cos(ph);
      im -= ir[n] * std::sin(ph);
    }
    const double gain = std::hypot(re, im);
    for (double& v : ir) v /= gain;
    bank.push_back(std::move(ir));
  }
  return bank;
}

Matrix gammatone_energies(const std::vector<double>& x,
                          const FeatureConfig& cfg) {
  const int ir_len = 2048;
  const auto fc = gammatone_center_freqs(cfg.gfcc_bins, 50.0,
                                         cfg.sample_rate / 2.0);
  const auto bank = gammatone_filterbank(fc, cfg.sample_rate, ir_len);

  const size_t t_frames = frame_count(x.size(), cfg);
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  const long n = static_cast<long>(x.size());

  const size_t full = x.size() + ir_len - 1;
  size_t nfft = 1;
  while (nfft < full) nfft <<= 1;
  RealFft fft(nfft);
  const auto X = fft.forward(x);

  Matrix energies(bank.size(), t_frames);
  for (size_t ch = 0; ch < bank.size(); ++ch) {
    auto K = fft.forward(bank[ch]);
    for (size_t i = 0; i < K.size(); ++i) K[i] *= X[i];
    const auto y = fft.inverse(K);
    // Group delay of the filter roughly centers its envelope; aligning the
    // filtered stream on the envelope peak keeps frame energies frame-local.
    size_t peak = 0;
    for (size_t i = 1; i < bank[ch].size(); ++i) {
      if (std::abs(bank[ch][i]) > std::abs(bank[ch][peak])) peak = i;
    }
    for (size_t t = 0; t < t_frames; ++t) {
      const long start = static_cast<long>(t) * hop - win / 2;
      const long stop = start + win;
      double acc = 0.0;
      for (long i = std::max(0L, start); i < std::min(n, stop); ++i) {
        const double v = y[static_cast<size_t>(i + static_cast<long>(peak))];
        acc += v * v;
      }
      energies.at(ch, t) = acc;
    }
  }
  return energies;
}

}  // namespace sonar::features
