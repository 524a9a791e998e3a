#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qamcs {

/// Rectangle of a coefficient array.
struct Subband {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Orthonormal 2-D Haar transform in place, Mallat layout: after each level
/// the approximation sits top-left, then horizontal detail top-right,
/// vertical detail bottom-left, diagonal detail bottom-right. Both sides must
/// be divisible by 2^levels.
void haar_forward(std::span<double> image, std::size_t rows, std::size_t cols, std::size_t levels);
void haar_inverse(std::span<double> coeffs, std::size_t rows, std::size_t cols, std::size_t levels);

/// Detail subbands of a `levels`-deep decomposition, finest level first.
std::vector<Subband> detail_subbands(std::size_t rows, std::size_t cols, std::size_t levels);

/// eta(c) = sign(c) * max(|c| - lambda, 0)
inline double soft_threshold(double c, double lambda) {
  if (c > lambda) return c - lambda;
  if (c < -lambda) return c + lambda;
  return 0.0;
}

/// Haar analysis, soft threshold on the detail coefficients only, synthesis.
/// With levels == 0 there is no transform and every sample is thresholded,
/// which is the canonical-basis shrinkage used for spike-sparse signals.
std::vector<double> soft_threshold_denoise(std::span<const double> image, std::size_t rows,
                                           std::size_t cols, double lambda, std::size_t levels);

/// MAP estimate of x from y = x + N(0, sigma^2) under a Cauchy(0, gamma)
/// prior: the real root of x^3 - y x^2 + (gamma^2 + 2 sigma^2) x - gamma^2 y
/// minimising (y - x)^2 / (2 sigma^2) + log(gamma^2 + x^2).
double cauchy_map_shrink(double y, double gamma, double sigma);

/// Objective minimised by cauchy_map_shrink (sigma > 0).
double cauchy_map_objective(double x, double y, double gamma, double sigma);

/// Elementwise cauchy_map_shrink.
std::vector<double> cauchy_map_denoise(std::span<const double> v, double gamma, double sigma);

/// Haar analysis, Cauchy-MAP shrinkage of each detail subband with
/// gamma = median(|c|) of that subband, synthesis.
std::vector<double> cauchy_wavelet_denoise(std::span<const double> image, std::size_t rows,
                                           std::size_t cols, double sigma, std::size_t levels);

/// Largest usable decomposition depth for an image, capped at `wanted`.
std::size_t max_haar_levels(std::size_t rows, std::size_t cols, std::size_t wanted);

}  // namespace qamcs
