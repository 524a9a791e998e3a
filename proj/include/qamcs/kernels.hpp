#pragma once

#include <cstddef>
#include <span>

#include "qamcs/exec.hpp"

namespace qamcs {

/// Shape of a stack of equally sized planes, row-major, plane after plane.
struct PlaneShape {
  std::size_t channels = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t plane() const noexcept { return rows * cols; }
  std::size_t size() const noexcept { return channels * rows * cols; }
};

/// 3x3 "same" cross-correlation with zero padding and no bias:
///   out[o][i][j] = sum_{c,a,b} w[o][c][a][b] * in[c][i+a-1][j+b-1]
/// `w` holds out_channels * in.channels * 9 weights. `out` is overwritten.
void conv3x3(std::span<const double> in, PlaneShape in_shape, std::span<const double> w,
             std::size_t out_channels, std::span<double> out, Exec exec = Exec::parallel);

/// Adjoint of conv3x3 with respect to its input: gin = conv3x3^T(gout).
/// `gin` is overwritten.
void conv3x3_adjoint(std::span<const double> gout, PlaneShape out_shape, std::span<const double> w,
                     std::size_t in_channels, std::span<double> gin, Exec exec = Exec::parallel);

/// Accumulates the weight gradient
///   gw[o][c][a][b] += sum_{i,j} gout[o][i][j] * in[c][i+a-1][j+b-1]
void conv3x3_weight_grad(std::span<const double> in, PlaneShape in_shape,
                         std::span<const double> gout, std::size_t out_channels,
                         std::span<double> gw, Exec exec = Exec::parallel);

namespace reference {

/// Direct loop over every output, tap and channel with explicit bounds tests.
void conv3x3(std::span<const double> in, PlaneShape in_shape, std::span<const double> w,
             std::size_t out_channels, std::span<double> out);

}  // namespace reference

}  // namespace qamcs
