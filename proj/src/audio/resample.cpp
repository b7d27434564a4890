#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>

#include "sonar/audio/audio.hpp"

namespace sonar::audio {

namespace {

// Blackman-windowed sinc lowpass, cutoff as a fraction of the input Nyquist.
std::vector<double> design_lowpass(double cutoff, int half_taps) {
  const int n = 2 * half_taps + 1;
  std::vector<double> h(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = i - half_taps;
    const double x = std::numbers::pi * cutoff * m;
    double s = m == 0 ? cutoff : cutoff * std::sin(x) / x;
    const double w = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1)) +
                     0.08 * std::cos(4.0 * std::numbers::pi * i / (n - 1));
    h[i] = s * w;
    sum += h[i];
  }
  for (double& v : h) v /= sum;  // unity gain at DC
  return h;
}

}  // namespace

std::vector<double> resample(const std::vector<double>& x, int from_rate,
                             int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) {
    throw std::runtime_error("resample: sample rates must be positive");
  }
  if (from_rate == to_rate) return x;
  if (x.empty()) return {};

  const int g = std::gcd(from_rate, to_rate);
  const int64_t L = to_rate / g;   // upsample factor
  const int64_t M = from_rate / g; // downsample factor

  // Anti-alias / anti-image filter at the upsampled rate. Cutoff sits at the
  // narrower of the two Nyquist frequencies; 24 zero crossings per side gives
  // ~74 dB stopband from the Blackman window.
  const double cutoff = 1.0 / static_cast<double>(std::max(L, M));
  const int zeros_per_side = 24;
  const int half = static_cast<int>(zeros_per_side * std::max(L, M));
  std::vector<double> h = design_lowpass(cutoff, half);
  // Interpolation loses a factor of L in passband gain without compensation.
  for (double& v : h) v *= static_cast<double>(L);

  const int64_t n_in = static_cast<int64_t>(x.size());
  const int64_t n_out = (n_in * L + M / 2) / M;
  std::vector<double> y(static_cast<size_t>(n_out));

  // Polyphase evaluation: output sample t taps the upsampled stream at
  // position t*M, so only every L-th filter coefficient touches real input.
  for (int64_t t = 0; t < n_out; ++t) {
    const int64_t up_pos = t * M;  // center in upsampled coordinates
    double acc = 0.0;
    // h index k pairs with upsampled position (up_pos - (k - half)).
    // That position carries input only when divisible by L.
    const int64_t lo = up_pos - half;
    int64_t first_k = 0;
    int64_t rem = lo % L;
    if (rem != 0) first_k = (rem < 0) ? -rem : L - rem;
    for (int64_t k = first_k; k < 2 * half + 1; k += L) {
      const int64_t src = (lo + k) / L;
      if (src < 0 || src >= n_in) continue;
      acc += h[static_cast<size_t>(2 * half - k)] * x[static_cast<size_t>(src)];
    }
    y[static_cast<size_t>(t)] = acc;
  }
  return y;
}

AudioSignal resample(const AudioSignal& sig, int target_rate) {
  AudioSignal out = sig;
  out.samples = resample(sig.samples, sig.sample_rate, target_rate);
  out.sample_rate = target_rate;
  return out;
}

}  // namespace sonar::audio
