#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <vector>

namespace qamcs::detail {

// Real/complex transforms of a fixed length. Plans are shared process-wide and
// created under a lock; execution uses the new-array interface on buffers owned
// by each instance, so instances may run concurrently.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// Unnormalised real-to-half-complex transform; `in` is zero-padded to n.
  std::vector<std::complex<double>> forward(const std::vector<double>& in);
  /// Unnormalised inverse of forward(); returns n real samples.
  std::vector<double> inverse(const std::vector<std::complex<double>>& half);
  /// Unnormalised complex inverse of a full n-point spectrum.
  std::vector<std::complex<double>> inverse_complex(const std::vector<std::complex<double>>& full);

 private:
  std::size_t n_;
  double* real_;
  fftw_complex* half_;
  fftw_complex* full_in_;
  fftw_complex* full_out_;
  fftw_plan r2c_;
  fftw_plan c2r_;
  fftw_plan c2c_inv_;
};

}  // namespace qamcs::detail
