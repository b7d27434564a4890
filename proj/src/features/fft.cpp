#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

#include "sonar/features/fft.hpp"

namespace sonar::features {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("RealFft: size must be positive");
  std::lock_guard<std::mutex> lock(plan_mutex());
  real_buf_ = fftw_alloc_real(n);
  cplx_buf_ = fftw_alloc_complex(n / 2 + 1);
  // FFTW_ESTIMATE keeps planning deterministic and leaves buffers untouched.
  fwd_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_buf_,
                                   static_cast<fftw_complex*>(cplx_buf_),
                                   FFTW_ESTIMATE);
  inv_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                   static_cast<fftw_complex*>(cplx_buf_),
                                   real_buf_, FFTW_ESTIMATE);
  if (!fwd_plan_ || !inv_plan_) throw std::runtime_error("FFTW planning failed");
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_plan_));
  fftw_free(real_buf_);
  fftw_free(cplx_buf_);
}

std::vector<std::complex<double>> RealFft::forward(
    const std::vector<double>& x) const {
  const size_t m = x.size() < n_ ? x.size() : n_;
  std::memcpy(real_buf_, x.data(), m * sizeof(double));
  if (m < n_) std::memset(real_buf_ + m, 0, (n_ - m) * sizeof(double));
  fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_plan_), real_buf_,
                       static_cast<fftw_complex*>(cplx_buf_));
  std::vector<std::complex<double>> out(n_ / 2 + 1);
  std::memcpy(out.data(), cplx_buf_, out.size() * sizeof(std::complex<double>));
  return out;
}

std::vector<double> RealFft::inverse(
    const std::vector<std::complex<double>>& spec) const {
  if (spec.size() != n_ / 2 + 1) {
    throw std::invalid_argument("RealFft::inverse: wrong spectrum size");
  }
  std::memcpy(cplx_buf_, spec.data(), spec.size() * sizeof(std::complex<double>));
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inv_plan_),
                       static_cast<fftw_complex*>(cplx_buf_), real_buf_);
  std::vector<double> out(n_);
  for (size_t i = 0; i < n_; ++i) out[i] = real_buf_[i] / static_cast<double>(n_);
  return out;
}

std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& kernel) {
  if (x.empty() || kernel.empty()) return {};
  const size_t full = x.size() + kernel.size() - 1;
  size_t n = 1;
  while (n < full) n <<= 1;
  RealFft fft(n);
  auto X = fft.forward(x);
  auto K = fft.forward(kernel);
  for (size_t i = 0; i < X.size(); ++i) X[i] *= K[i];
  auto y = fft.inverse(X);
  y.resize(full);
  return y;
}

}  // namespace sonar::features
