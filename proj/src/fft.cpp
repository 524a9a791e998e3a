#include "fft.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include "qamcs/error.hpp"

namespace qamcs::detail {

namespace {

struct Plans {
  fftw_plan r2c;
  fftw_plan c2r;
  fftw_plan c2c_inv;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Plans live until exit; the planner itself is not thread-safe.
Plans plans_for(std::size_t n) {
  static std::map<std::size_t, Plans> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const int len = static_cast<int>(n);
  auto* r = fftw_alloc_real(n);
  auto* h = fftw_alloc_complex(n / 2 + 1);
  auto* a = fftw_alloc_complex(n);
  auto* b = fftw_alloc_complex(n);
  Plans p{fftw_plan_dft_r2c_1d(len, r, h, FFTW_ESTIMATE), fftw_plan_dft_c2r_1d(len, h, r, FFTW_ESTIMATE),
          fftw_plan_dft_1d(len, a, b, FFTW_BACKWARD, FFTW_ESTIMATE)};
  fftw_free(r);
  fftw_free(h);
  fftw_free(a);
  fftw_free(b);
  if (!p.r2c || !p.c2r || !p.c2c_inv) throw Error("FFTW planning failed");
  cache.emplace(n, p);
  return p;
}

}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  if (n < 2) throw Error("FFT length must be >= 2");
  const Plans p = plans_for(n);
  r2c_ = p.r2c;
  c2r_ = p.c2r;
  c2c_inv_ = p.c2c_inv;
  real_ = fftw_alloc_real(n);
  half_ = fftw_alloc_complex(n / 2 + 1);
  full_in_ = fftw_alloc_complex(n);
  full_out_ = fftw_alloc_complex(n);
}

Fft::~Fft() {
  fftw_free(real_);
  fftw_free(half_);
  fftw_free(full_in_);
  fftw_free(full_out_);
}

std::vector<std::complex<double>> Fft::forward(const std::vector<double>& in) {
  if (in.size() > n_) throw Error("FFT input longer than the transform");
  std::copy(in.begin(), in.end(), real_);
  std::fill(real_ + in.size(), real_ + n_, 0.0);
  fftw_execute_dft_r2c(r2c_, real_, half_);
  std::vector<std::complex<double>> out(bins());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {half_[k][0], half_[k][1]};
  return out;
}

std::vector<double> Fft::inverse(const std::vector<std::complex<double>>& half) {
  if (half.size() != bins()) throw Error("half spectrum has the wrong length");
  for (std::size_t k = 0; k < half.size(); ++k) {
    half_[k][0] = half[k].real();
    half_[k][1] = half[k].imag();
  }
  fftw_execute_dft_c2r(c2r_, half_, real_);
  return {real_, real_ + n_};
}

std::vector<std::complex<double>> Fft::inverse_complex(const std::vector<std::complex<double>>& full) {
  if (full.size() != n_) throw Error("spectrum has the wrong length");
  for (std::size_t k = 0; k < n_; ++k) {
    full_in_[k][0] = full[k].real();
    full_in_[k][1] = full[k].imag();
  }
  fftw_execute_dft(c2c_inv_, full_in_, full_out_);
  std::vector<std::complex<double>> out(n_);
  for (std::size_t k = 0; k < n_; ++k) out[k] = {full_out_[k][0], full_out_[k][1]};
  return out;
}

}  // namespace qamcs::detail
