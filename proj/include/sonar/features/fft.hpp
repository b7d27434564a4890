#pragma once

#include <complex>
#include <vector>

namespace sonar::features {

// Real-input FFT of a fixed size, wrapping FFTW double-precision plans.
// Plan creation is serialized internally; execution is const and reentrant.
class RealFft {
 public:
  explicit RealFft(size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  size_t size() const { return n_; }

  // x is zero-padded or truncated to n; returns n/2+1 one-sided bins.
  std::vector<std::complex<double>> forward(const std::vector<double>& x) const;

  // Inverse of forward including the 1/n scaling, returning n real samples.
  std::vector<double> inverse(const std::vector<std::complex<double>>& spec) const;

 private:
  size_t n_;
  void* fwd_plan_;
  void* inv_plan_;
  double* real_buf_;
  void* cplx_buf_;
};

// Linear convolution of x with kernel via FFT, output length |x|+|k|-1.
std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& kernel);

}  // namespace sonar::features
