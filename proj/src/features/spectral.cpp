#include <algorithm>
#include <cmath>

#include "sonar/features/features.hpp"
#include "sonar/features/fft.hpp"

namespace sonar::features {

Matrix magnitude_spectrogram(const std::vector<double>& x,
                             const FeatureConfig& cfg) {
  const auto frames = frame_signal(x, cfg);
  const size_t win = static_cast<size_t>(cfg.window_samples());
  const size_t n_bins = win / 2 + 1;
  RealFft fft(win);
  Matrix mag(n_bins, frames.size());
  for (size_t t = 0; t < frames.size(); ++t) {
    const auto spec = fft.forward(frames[t]);
    for (size_t b = 0; b < n_bins; ++b) mag.at(b, t) = std::abs(spec[b]);
  }
  return mag;
}

Matrix band_reduce(const Matrix& mag, int bands) {
  if (bands <= 0 || static_cast<size_t>(bands) > mag.rows) {
    throw std::invalid_argument("band_reduce: bad band count");
  }
  // Bands are centered on multiples of Nyquist/bands rather than edge-aligned,
  // so tones at round frequencies (1 kHz at 48 bands over 8 kHz) fall mid-band
  // instead of exactly on a boundary. The outermost bands absorb the ends.
  Matrix out(static_cast<size_t>(bands), mag.cols);
  std::vector<size_t> counts(bands, 0);
  std::vector<int> band_of(mag.rows);
  for (size_t b = 0; b < mag.rows; ++b) {
    int j = static_cast<int>(std::lround(static_cast<double>(b) * bands /
                                         static_cast<double>(mag.rows)));
    if (j > bands - 1) j = bands - 1;
    band_of[b] = j;
    ++counts[j];
  }
  for (size_t t = 0; t < mag.cols; ++t) {
    for (size_t b = 0; b < mag.rows; ++b) {
      out.at(band_of[b], t) += mag.at(b, t);
    }
    for (int j = 0; j < bands; ++j) {
      out.at(j, t) /= static_cast<double>(counts[j]);
    }
  }
  return out;
}

namespace {
inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

std::vector<double> mel_center_freqs(const FeatureConfig& cfg) {
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> pts(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    pts[i] = mel_to_hz(mel_max * i / (cfg.n_mels + 1));
  }
  return pts;  // pts[j+1] is filter j's peak; pts[j], pts[j+2] its feet
}

Matrix mel_filterbank(const FeatureConfig& cfg, int n_fft_bins) {
  const auto pts = mel_center_freqs(cfg);
  const double nyquist = cfg.sample_rate / 2.0;
  Matrix fb(static_cast<size_t>(cfg.n_mels), static_cast<size_t>(n_fft_bins));
  for (int j = 0; j < cfg.n_mels; ++j) {
    const double lo = pts[j], mid = pts[j + 1], hi = pts[j + 2];
    for (int b = 0; b < n_fft_bins; ++b) {
      const double f = nyquist * b / (n_fft_bins - 1);
      double w = 0.0;
      if (f > lo && f < hi) {
        w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
      fb.at(j, b) = w;
    }
  }
  return fb;
}

void amplitude_to_db(Matrix& m, double db_floor) {
  const double eps = std::pow(10.0, db_floor / 20.0);
  double peak = -HUGE_VAL;
  for (double& v : m.v) {
    v = 20.0 * std::log10(std::max(std::abs(v), eps));
    peak = std::max(peak, v);
  }
  const double lo = peak - std::abs(db_floor);
  for (double& v : m.v) v = std::max(v, lo);
}

}  // namespace sonar::features
