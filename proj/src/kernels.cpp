#include "qamcs/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "qamcs/error.hpp"

namespace qamcs {

namespace {

void check_sizes(std::size_t in_size, PlaneShape in_shape, std::size_t w_size, std::size_t out_channels,
                 std::size_t out_size) {
  if (in_shape.rows == 0 || in_shape.cols == 0 || in_shape.channels == 0 || out_channels == 0)
    throw Error("conv3x3: empty shape");
  if (in_size != in_shape.size()) throw Error("conv3x3: input length does not match its shape");
  if (w_size != out_channels * in_shape.channels * 9)
    throw Error("conv3x3: expected " + std::to_string(out_channels * in_shape.channels * 9) + " weights");
  if (out_size != out_channels * in_shape.plane()) throw Error("conv3x3: output length does not match");
}

// out_row[j] += sum_b k[b] * in_row[j+b-1] over one row, borders zero.
inline void row_taps(const double* in_row, const double* k, std::size_t cols, double* out_row) {
  if (cols == 1) {
    out_row[0] += k[1] * in_row[0];
    return;
  }
  out_row[0] += k[1] * in_row[0] + k[2] * in_row[1];
  for (std::size_t j = 1; j + 1 < cols; ++j)
    out_row[j] += k[0] * in_row[j - 1] + k[1] * in_row[j] + k[2] * in_row[j + 1];
  out_row[cols - 1] += k[0] * in_row[cols - 2] + k[1] * in_row[cols - 1];
}

}  // namespace

void conv3x3(std::span<const double> in, PlaneShape s, std::span<const double> w,
             std::size_t out_channels, std::span<double> out, Exec exec) {
  check_sizes(in.size(), s, w.size(), out_channels, out.size());
  const std::size_t rows = s.rows, cols = s.cols, plane = s.plane(), cin = s.channels;
  const auto work = static_cast<std::ptrdiff_t>(out_channels * rows);

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t t = 0; t < work; ++t) {
    const std::size_t o = static_cast<std::size_t>(t) / rows;
    const std::size_t i = static_cast<std::size_t>(t) % rows;
    double* out_row = out.data() + o * plane + i * cols;
    std::fill_n(out_row, cols, 0.0);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* k = w.data() + (o * cin + c) * 9;
      const double* base = in.data() + c * plane;
      for (std::size_t a = 0; a < 3; ++a) {
        if ((i == 0 && a == 0) || (i + 1 == rows && a == 2)) continue;
        row_taps(base + (i + a - 1) * cols, k + 3 * a, cols, out_row);
      }
    }
  }
}

void conv3x3_adjoint(std::span<const double> gout, PlaneShape out_shape, std::span<const double> w,
                     std::size_t in_channels, std::span<double> gin, Exec exec) {
  // correlation with the spatially flipped, channel-transposed kernel
  const std::size_t cout = out_shape.channels;
  if (w.size() != cout * in_channels * 9) throw Error("conv3x3_adjoint: weight count mismatch");
  std::vector<double> flipped(w.size());
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t c = 0; c < in_channels; ++c)
      for (std::size_t t = 0; t < 9; ++t) flipped[(c * cout + o) * 9 + (8 - t)] = w[(o * in_channels + c) * 9 + t];
  conv3x3(gout, out_shape, flipped, in_channels, gin, exec);
}

void conv3x3_weight_grad(std::span<const double> in, PlaneShape s, std::span<const double> gout,
                         std::size_t out_channels, std::span<double> gw, Exec exec) {
  check_sizes(in.size(), s, gw.size(), out_channels, gout.size());
  const std::size_t rows = s.rows, cols = s.cols, plane = s.plane(), cin = s.channels;
  const auto work = static_cast<std::ptrdiff_t>(out_channels * cin * 9);

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t t = 0; t < work; ++t) {
    const auto idx = static_cast<std::size_t>(t);
    const std::size_t o = idx / (cin * 9), c = (idx / 9) % cin, a = (idx % 9) / 3, b = idx % 3;
    const double* g = gout.data() + o * plane;
    const double* x = in.data() + c * plane;
    // rows/cols of the output for which the tapped input is inside the image
    const std::size_t i0 = a == 0 ? 1 : 0, i1 = a == 2 ? rows - 1 : rows;
    const std::size_t j0 = b == 0 ? 1 : 0, j1 = b == 2 ? cols - 1 : cols;
    double acc = 0.0;
    for (std::size_t i = i0; i < i1; ++i) {
      const double* grow = g + i * cols;
      const double* xrow = x + (i + a - 1) * cols;
      for (std::size_t j = j0; j < j1; ++j) acc += grow[j] * xrow[j + b - 1];
    }
    gw[idx] += acc;
  }
}

namespace reference {

void conv3x3(std::span<const double> in, PlaneShape s, std::span<const double> w,
             std::size_t out_channels, std::span<double> out) {
  check_sizes(in.size(), s, w.size(), out_channels, out.size());
  const auto rows = static_cast<std::ptrdiff_t>(s.rows), cols = static_cast<std::ptrdiff_t>(s.cols);
  for (std::size_t o = 0; o < out_channels; ++o)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
      for (std::ptrdiff_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s.channels; ++c)
          for (std::ptrdiff_t a = 0; a < 3; ++a)
            for (std::ptrdiff_t b = 0; b < 3; ++b) {
              const std::ptrdiff_t ii = i + a - 1, jj = j + b - 1;
              if (ii < 0 || jj < 0 || ii >= rows || jj >= cols) continue;
              acc += w[(o * s.channels + c) * 9 + static_cast<std::size_t>(3 * a + b)] *
                     in[c * s.plane() + static_cast<std::size_t>(ii * cols + jj)];
            }
        out[o * s.plane() + static_cast<std::size_t>(i * cols + j)] = acc;
      }
}

}  // namespace reference

}  // namespace qamcs
