#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qamcs/map.hpp"

namespace qamcs::test {

inline ParametricMap random_map(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  ParametricMap m(rows, cols, "m/s");
  for (auto& v : m.values()) v = dist(gen);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                         double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// out[o][i][j] = sum over c, a, b of w[o][c][a][b] * in[c][i+a-1][j+b-1], zero outside.
inline std::vector<double> naive_conv3x3(const std::vector<double>& in, std::size_t cin, std::size_t rows,
                                         std::size_t cols, const std::vector<double>& w, std::size_t cout) {
  std::vector<double> out(cout * rows * cols, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t c = 0; c < cin; ++c)
          for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b) {
              const long ii = static_cast<long>(i) + a, jj = static_cast<long>(j) + b;
              if (ii < 0 || jj < 0 || ii >= static_cast<long>(rows) || jj >= static_cast<long>(cols)) continue;
              out[(o * rows + i) * cols + j] +=
                  w[((o * cin + c) * 3 + static_cast<std::size_t>(a + 1)) * 3 + static_cast<std::size_t>(b + 1)] *
                  in[(c * rows + static_cast<std::size_t>(ii)) * cols + static_cast<std::size_t>(jj)];
            }
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace qamcs::test
