#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qamcs/map.hpp"

namespace qamcs {

/// Dense M x N measurement matrix, row-major.
struct MeasurementMatrix {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> entries;
  std::uint64_t seed = 0;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries[i * n + j]; }

  /// y = A x
  void apply(std::span<const double> x, std::span<double> y) const;
  /// x = A^T z
  void apply_transpose(std::span<const double> z, std::span<double> x) const;

  bool operator==(const MeasurementMatrix&) const = default;
};

enum class MaskPattern : std::uint8_t { spiral, random, raster };

std::string_view to_string(MaskPattern p);
MaskPattern mask_pattern_from_string(std::string_view s);

/// Full-image binary sampling mask; cells are 0 or 1, row-major.
struct BinaryMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> cells;
  MaskPattern pattern = MaskPattern::random;

  std::size_t ones() const;
  double coverage() const;
  /// Row-major indices of the sampled cells.
  std::vector<std::size_t> sampled_indices() const;

  bool operator==(const BinaryMask&) const = default;
};

/// i.i.d. N(0, 1/m) entries, so that E||A e_j||^2 = 1. Deterministic in `seed`.
MeasurementMatrix gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed);

/// The first m rows of the n x n identity.
MeasurementMatrix identity_rows(std::size_t m, std::size_t n);

/// Archimedean spiral r = a*theta centred on the image. The pitch 2*pi*a is
/// bisected so the covered fraction lands within 2 percentage points of
/// `target_ratio`; the stroke is one pixel wide.
BinaryMask spiral_mask(std::size_t rows, std::size_t cols, double target_ratio);

/// Exactly round(ratio * rows * cols) cells (at least one), chosen uniformly.
BinaryMask random_mask(std::size_t rows, std::size_t cols, double ratio, std::uint64_t seed);

/// Every k-th scan line, k = round(1 / ratio).
BinaryMask raster_mask(std::size_t rows, std::size_t cols, double ratio);

double compression_ratio(const MeasurementMatrix& a);
double compression_ratio(const BinaryMask& mask);

/// y = A x for one vectorised block.
std::vector<double> apply_sampling(std::span<const double> x, const MeasurementMatrix& a);
/// Values of `x` at the mask's one-cells in row-major order.
std::vector<double> apply_sampling(const ParametricMap& x, const BinaryMask& mask);

/// Adds white Gaussian noise of standard deviation `noise_std`. The stream is
/// a pure function of (seed, stream).
void add_noise(std::span<double> y, double noise_std, std::uint64_t seed, std::uint64_t stream = 0);

/// Linear operator seen by the reconstruction algorithms.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;
  virtual void apply_transpose(std::span<const double> z, std::span<double> x) const = 0;
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(const MeasurementMatrix& a) : a_(&a) {}
  std::size_t rows() const override { return a_->m; }
  std::size_t cols() const override { return a_->n; }
  void apply(std::span<const double> x, std::span<double> y) const override { a_->apply(x, y); }
  void apply_transpose(std::span<const double> z, std::span<double> x) const override {
    a_->apply_transpose(z, x);
  }

 private:
  const MeasurementMatrix* a_;
};

/// Row-selection operator equivalent to a binary mask on the vectorised image.
class SelectionOperator final : public LinearOperator {
 public:
  explicit SelectionOperator(const BinaryMask& mask);
  std::size_t rows() const override { return index_.size(); }
  std::size_t cols() const override { return n_; }
  void apply(std::span<const double> x, std::span<double> y) const override;
  void apply_transpose(std::span<const double> z, std::span<double> x) const override;

 private:
  std::size_t n_;
  std::vector<std::size_t> index_;
};

/// A sampled scene: the operator, the measurements and the geometry needed to
/// map them back to an image. In the matrix case `y` holds one vector per
/// block; in the mask case a single vector.
struct CsProblem {
  std::variant<MeasurementMatrix, BinaryMask> op;
  BlockGrid grid;
  std::vector<std::vector<double>> y;
  double noise_std = 0.0;

  bool is_matrix() const { return std::holds_alternative<MeasurementMatrix>(op); }
  double ratio() const;
};

CsProblem make_problem(const ParametricMap& x, MeasurementMatrix a, double noise_std = 0.0,
                       std::uint64_t noise_seed = 0);
CsProblem make_problem(const ParametricMap& x, BinaryMask mask, double noise_std = 0.0,
                       std::uint64_t noise_seed = 0);

/// Side of the square block a matrix with n columns acts on; throws if n is not a square.
std::size_t block_side_for(const MeasurementMatrix& a);

}  // namespace qamcs
