#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sonar {

// Thrown for bad user input (CLI flags, config files, malformed manifests).
// Everything else uses std::runtime_error / std::invalid_argument.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

using Rng = std::mt19937;

// The std:: distributions are implementation-defined, so all random draws go
// through these helpers to keep outputs reproducible across standard libraries.

inline uint32_t rand_below(Rng& rng, uint32_t n) {
  if (n == 0) throw std::invalid_argument("rand_below: n must be positive");
  const uint32_t limit = UINT32_MAX - UINT32_MAX % n;
  uint32_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// 53-bit uniform double in [0, 1).
inline double rand_unit(Rng& rng) {
  const uint64_t a = rng() >> 5;  // 27 bits
  const uint64_t b = rng() >> 6;  // 26 bits
  return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) *
         (1.0 / 9007199254740992.0);
}

inline double rand_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * rand_unit(rng);
}

inline double rand_normal(Rng& rng) {
  double u1 = rand_unit(rng);
  while (u1 <= 0.0) u1 = rand_unit(rng);
  const double u2 = rand_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Laplace(0, b) via inverse CDF; variance is 2*b^2.
inline double rand_laplace(Rng& rng, double b) {
  const double u = rand_unit(rng) - 0.5;
  const double a = 1.0 - 2.0 * std::abs(u);
  return -b * (u < 0 ? -1.0 : 1.0) * std::log(a > 0 ? a : 5e-324);
}

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const uint32_t j = rand_below(rng, static_cast<uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

size_t worker_count();

}  // namespace sonar
