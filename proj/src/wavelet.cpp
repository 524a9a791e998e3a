#include "qamcs/wavelet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "qamcs/error.hpp"

namespace qamcs {

namespace {

void check_divisible(std::size_t rows, std::size_t cols, std::size_t levels) {
  if (levels >= 8 * sizeof(std::size_t)) throw Error("too many wavelet levels");
  const std::size_t q = std::size_t{1} << levels;
  if (rows == 0 || cols == 0 || rows % q != 0 || cols % q != 0) {
    throw Error("image side not divisible by 2^levels (" + std::to_string(rows) + "x" +
                std::to_string(cols) + ", levels " + std::to_string(levels) + ")");
  }
}

}  // namespace

void haar_forward(std::span<double> image, std::size_t rows, std::size_t cols, std::size_t levels) {
  check_divisible(rows, cols, levels);
  if (image.size() != rows * cols) throw Error("image length does not match its shape");
  std::vector<double> tmp(rows * cols);
  std::size_t h = rows, w = cols;
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t h2 = h / 2, w2 = w / 2;
    for (std::size_t i = 0; i < h2; ++i) {
      for (std::size_t j = 0; j < w2; ++j) {
        const double a = image[(2 * i) * cols + 2 * j];
        const double b = image[(2 * i) * cols + 2 * j + 1];
        const double c = image[(2 * i + 1) * cols + 2 * j];
        const double d = image[(2 * i + 1) * cols + 2 * j + 1];
        tmp[i * cols + j] = 0.5 * (a + b + c + d);
        tmp[i * cols + w2 + j] = 0.5 * (a - b + c - d);
        tmp[(h2 + i) * cols + j] = 0.5 * (a + b - c - d);
        tmp[(h2 + i) * cols + w2 + j] = 0.5 * (a - b - c + d);
      }
    }
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(tmp.begin() + static_cast<std::ptrdiff_t>(i * cols), w,
                  image.begin() + static_cast<std::ptrdiff_t>(i * cols));
    h = h2;
    w = w2;
  }
}

void haar_inverse(std::span<double> coeffs, std::size_t rows, std::size_t cols, std::size_t levels) {
  check_divisible(rows, cols, levels);
  if (coeffs.size() != rows * cols) throw Error("image length does not match its shape");
  std::vector<double> tmp(rows * cols);
  for (std::size_t l = levels; l-- > 0;) {
    const std::size_t h = rows >> l, w = cols >> l;
    const std::size_t h2 = h / 2, w2 = w / 2;
    for (std::size_t i = 0; i < h2; ++i) {
      for (std::size_t j = 0; j < w2; ++j) {
        const double A = coeffs[i * cols + j];
        const double H = coeffs[i * cols + w2 + j];
        const double V = coeffs[(h2 + i) * cols + j];
        const double D = coeffs[(h2 + i) * cols + w2 + j];
        tmp[(2 * i) * cols + 2 * j] = 0.5 * (A + H + V + D);
        tmp[(2 * i) * cols + 2 * j + 1] = 0.5 * (A - H + V - D);
        tmp[(2 * i + 1) * cols + 2 * j] = 0.5 * (A + H - V - D);
        tmp[(2 * i + 1) * cols + 2 * j + 1] = 0.5 * (A - H - V + D);
      }
    }
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(tmp.begin() + static_cast<std::ptrdiff_t>(i * cols), w,
                  coeffs.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
}

std::vector<Subband> detail_subbands(std::size_t rows, std::size_t cols, std::size_t levels) {
  check_divisible(rows, cols, levels);
  std::vector<Subband> bands;
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t h2 = (rows >> l) / 2, w2 = (cols >> l) / 2;
    bands.push_back({0, w2, h2, w2});
    bands.push_back({h2, 0, h2, w2});
    bands.push_back({h2, w2, h2, w2});
  }
  return bands;
}

std::size_t max_haar_levels(std::size_t rows, std::size_t cols, std::size_t wanted) {
  std::size_t l = 0;
  while (l < wanted && rows % (std::size_t{2} << l) == 0 && cols % (std::size_t{2} << l) == 0) ++l;
  return l;
}

std::vector<double> soft_threshold_denoise(std::span<const double> image, std::size_t rows,
                                           std::size_t cols, double lambda, std::size_t levels) {
  if (!(lambda >= 0.0)) throw Error("threshold must be >= 0");
  std::vector<double> c(image.begin(), image.end());
  if (levels == 0) {
    if (c.size() != rows * cols) throw Error("image length does not match its shape");
    for (auto& v : c) v = soft_threshold(v, lambda);
    return c;
  }
  haar_forward(c, rows, cols, levels);
  // exact identity rather than a rounded round trip
  if (lambda == 0.0) return std::vector<double>(image.begin(), image.end());
  for (const auto& b : detail_subbands(rows, cols, levels))
    for (std::size_t i = 0; i < b.rows; ++i)
      for (std::size_t j = 0; j < b.cols; ++j) {
        double& v = c[(b.row0 + i) * cols + b.col0 + j];
        v = soft_threshold(v, lambda);
      }
  haar_inverse(c, rows, cols, levels);
  return c;
}

double cauchy_map_objective(double x, double y, double gamma, double sigma) {
  const double r = y - x;
  return r * r / (2.0 * sigma * sigma) + std::log(gamma * gamma + x * x);
}

double cauchy_map_shrink(double y, double gamma, double sigma) {
  if (!(gamma > 0.0)) throw Error("cauchy scale gamma must be > 0");
  if (!(sigma >= 0.0)) throw Error("noise level sigma must be >= 0");
  if (y == 0.0) return 0.0;
  if (sigma == 0.0) return y;

  const double g2 = gamma * gamma;
  const double b = g2 + 2.0 * sigma * sigma;
  const double c = -g2 * y;
  // x^3 + a x^2 + b x + c with a = -y; substitute x = t + y/3
  const double a = -y;
  const double shift = -a / 3.0;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;

  std::array<double, 3> roots{};
  int n_roots = 0;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  if (disc > 0.0) {
    const double s = std::sqrt(disc);
    roots[n_roots++] = std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s) + shift;
  } else {
    // three real roots (p < 0 here)
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    constexpr double two_pi_3 = 2.0943951023931954923;
    for (int k = 0; k < 3; ++k) roots[n_roots++] = m * std::cos(theta - two_pi_3 * k) + shift;
  }

  const double lo = std::min(0.0, y), hi = std::max(0.0, y);
  double best = 0.0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_roots; ++i) {
    double x = roots[i];
    // Newton polish against cancellation in the closed form
    for (int it = 0; it < 4; ++it) {
      const double f = ((x - y) * x + b) * x + c;
      const double fp = (3.0 * x - 2.0 * y) * x + b;
      if (fp == 0.0) break;
      const double step = f / fp;
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    // every stationary point of the objective lies between 0 and y
    x = std::clamp(x, lo, hi);
    const double obj = cauchy_map_objective(x, y, gamma, sigma);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

std::vector<double> cauchy_map_denoise(std::span<const double> v, double gamma, double sigma) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = cauchy_map_shrink(v[i], gamma, sigma);
  return out;
}

std::vector<double> cauchy_wavelet_denoise(std::span<const double> image, std::size_t rows,
                                           std::size_t cols, double sigma, std::size_t levels) {
  if (!(sigma >= 0.0)) throw Error("noise level sigma must be >= 0");
  std::vector<double> c(image.begin(), image.end());
  if (levels == 0) {
    if (c.size() != rows * cols) throw Error("image length does not match its shape");
    std::vector<double> mag(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) mag[i] = std::abs(c[i]);
    std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2), mag.end());
    const double gamma = std::max(mag[mag.size() / 2], std::numeric_limits<double>::min());
    for (auto& v : c) v = cauchy_map_shrink(v, gamma, sigma);
    return c;
  }
  haar_forward(c, rows, cols, levels);
  std::vector<double> mag;
  for (const auto& b : detail_subbands(rows, cols, levels)) {
    mag.clear();
    for (std::size_t i = 0; i < b.rows; ++i)
      for (std::size_t j = 0; j < b.cols; ++j) mag.push_back(std::abs(c[(b.row0 + i) * cols + b.col0 + j]));
    std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2), mag.end());
    const double gamma = std::max(mag[mag.size() / 2], std::numeric_limits<double>::min());
    for (std::size_t i = 0; i < b.rows; ++i)
      for (std::size_t j = 0; j < b.cols; ++j) {
        double& v = c[(b.row0 + i) * cols + b.col0 + j];
        v = cauchy_map_shrink(v, gamma, sigma);
      }
  }
  haar_inverse(c, rows, cols, levels);
  return c;
}

}  // namespace qamcs
