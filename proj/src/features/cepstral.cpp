#include <cmath>
#include <numbers>

#include "sonar/features/features.hpp"

namespace sonar::features {

std::vector<double> dct2(const std::vector<double>& x, size_t keep) {
  const size_t n = x.size();
  if (n == 0 || keep == 0 || keep > n) {
    throw std::invalid_argument("dct2: bad sizes");
  }
  std::vector<double> c(keep, 0.0);
  const double s0 = std::sqrt(1.0 / n);
  const double sk = std::sqrt(2.0 / n);
  for (size_t k = 0; k < keep; ++k) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      acc += x[i] * std::cos(std::numbers::pi * (i + 0.5) * k / n);
    }
    c[k] = (k == 0 ? s0 : sk) * acc;
  }
  return c;
}

std::vector<double> idct2(const std::vector<double>& coeffs, size_t n) {
  if (n == 0 || coeffs.empty() || coeffs.size() > n) {
    throw std::invalid_argument("idct2: bad sizes");
  }
  std::vector<double> x(n, 0.0);
  const double s0 = std::sqrt(1.0 / n);
  const double sk = std::sqrt(2.0 / n);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (size_t k = 0; k < coeffs.size(); ++k) {
      acc += (k == 0 ? s0 : sk) * coeffs[k] *
             std::cos(std::numbers::pi * (i + 0.5) * k / n);
    }
    x[i] = acc;
  }
  return x;
}

}  // namespace sonar::features
