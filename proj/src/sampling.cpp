#include "qamcs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "qamcs/error.hpp"
#include "rng.hpp"

namespace qamcs {

void MeasurementMatrix::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n || y.size() != m) throw Error("dimension mismatch in A x");
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = entries.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void MeasurementMatrix::apply_transpose(std::span<const double> z, std::span<double> x) const {
  if (z.size() != m || x.size() != n) throw Error("dimension mismatch in A^T z");
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = entries.data() + i * n;
    const double zi = z[i];
    for (std::size_t j = 0; j < n; ++j) x[j] += row[j] * zi;
  }
}

std::string_view to_string(MaskPattern p) {
  switch (p) {
    case MaskPattern::spiral: return "spiral";
    case MaskPattern::random: return "random";
    case MaskPattern::raster: return "raster";
  }
  return "unknown";
}

MaskPattern mask_pattern_from_string(std::string_view s) {
  if (s == "spiral") return MaskPattern::spiral;
  if (s == "random") return MaskPattern::random;
  if (s == "raster") return MaskPattern::raster;
  throw Error("unknown mask pattern '" + std::string(s) + "'");
}

std::size_t BinaryMask::ones() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

double BinaryMask::coverage() const {
  if (cells.empty()) return 0.0;
  return static_cast<double>(ones()) / static_cast<double>(cells.size());
}

std::vector<std::size_t> BinaryMask::sampled_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i]) idx.push_back(i);
  return idx;
}

MeasurementMatrix gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw Error("matrix dimensions must be positive");
  if (m > n) throw Error("not a compression operator (m > n)");
  MeasurementMatrix a{m, n, std::vector<double>(m * n), seed};
  auto gen = detail::make_engine(seed, 0);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  for (auto& e : a.entries) e = dist(gen);
  return a;
}

MeasurementMatrix identity_rows(std::size_t m, std::size_t n) {
  if (m == 0 || m > n) throw Error("not a compression operator (m > n)");
  MeasurementMatrix a{m, n, std::vector<double>(m * n, 0.0), 0};
  for (std::size_t i = 0; i < m; ++i) a(i, i) = 1.0;
  return a;
}

namespace {

// Rasterises a one-pixel-wide Archimedean spiral of the given pitch (radial
// distance between successive arms).
std::vector<std::uint8_t> rasterise_spiral(std::size_t rows, std::size_t cols, double pitch,
                                           double stroke) {
  std::vector<std::uint8_t> cells(rows * cols, 0);
  const double cy = (static_cast<double>(rows) - 1.0) / 2.0;
  const double cx = (static_cast<double>(cols) - 1.0) / 2.0;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double dy = static_cast<double>(r) - cy;
      const double dx = static_cast<double>(c) - cx;
      const double rho = std::hypot(dx, dy);
      double phi = std::atan2(dy, dx);
      if (phi < 0.0) phi += two_pi;
      // arms cross this bearing at rho_j = pitch * (phi / 2pi + j), j >= 0
      const double t = rho / pitch - phi / two_pi;
      const double j = std::max(0.0, std::round(t));
      const double dist = std::abs(t - j) * pitch;
      if (dist <= stroke / 2.0) cells[r * cols + c] = 1;
    }
  }
  return cells;
}

double coverage_of(const std::vector<std::uint8_t>& cells) {
  return static_cast<double>(std::count(cells.begin(), cells.end(), std::uint8_t{1})) /
         static_cast<double>(cells.size());
}

void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error("sampling ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
}

}  // namespace

BinaryMask spiral_mask(std::size_t rows, std::size_t cols, double target_ratio) {
  check_ratio(target_ratio);
  if (rows == 0 || cols == 0) throw Error("empty input");
  BinaryMask mask{rows, cols, {}, MaskPattern::spiral};
  if (target_ratio == 1.0) {
    mask.cells.assign(rows * cols, 1);
    return mask;
  }

  constexpr double stroke = 1.0;
  constexpr double tolerance = 0.02;
  double lo = stroke;  // every pixel within half a pitch of an arm: full coverage
  double hi = 4.0 * static_cast<double>(std::max(rows, cols));
  std::vector<std::uint8_t> best;
  double best_err = 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto cells = rasterise_spiral(rows, cols, mid, stroke);
    const double cov = coverage_of(cells);
    const double err = std::abs(cov - target_ratio);
    if (err < best_err && cov > 0.0) {
      best_err = err;
      best = std::move(cells);
    }
    if (cov > target_ratio) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (best.empty() || best_err > tolerance) {
    const double achieved = best.empty() ? 0.0 : coverage_of(best);
    throw Error("spiral mask cannot reach ratio " + std::to_string(target_ratio) +
                " (achieved " + std::to_string(achieved) + ")");
  }
  mask.cells = std::move(best);
  return mask;
}

BinaryMask random_mask(std::size_t rows, std::size_t cols, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  if (rows == 0 || cols == 0) throw Error("empty input");
  const std::size_t total = rows * cols;
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total))), 1, total);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto gen = detail::make_engine(seed, 1);
  // Fisher-Yates with our own index draw so the result does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = total - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(gen() % (i + 1));
    std::swap(order[i], order[j]);
  }
  BinaryMask mask{rows, cols, std::vector<std::uint8_t>(total, 0), MaskPattern::random};
  for (std::size_t k = 0; k < count; ++k) mask.cells[order[k]] = 1;
  return mask;
}

BinaryMask raster_mask(std::size_t rows, std::size_t cols, double ratio) {
  check_ratio(ratio);
  if (rows == 0 || cols == 0) throw Error("empty input");
  const auto stride = std::max<long long>(1, std::llround(1.0 / ratio));
  BinaryMask mask{rows, cols, std::vector<std::uint8_t>(rows * cols, 0), MaskPattern::raster};
  for (std::size_t r = 0; r < rows; r += static_cast<std::size_t>(stride))
    std::fill_n(mask.cells.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, std::uint8_t{1});
  return mask;
}

double compression_ratio(const MeasurementMatrix& a) {
  return static_cast<double>(a.m) / static_cast<double>(a.n);
}

double compression_ratio(const BinaryMask& mask) { return mask.coverage(); }

std::vector<double> apply_sampling(std::span<const double> x, const MeasurementMatrix& a) {
  std::vector<double> y(a.m);
  a.apply(x, y);
  return y;
}

std::vector<double> apply_sampling(const ParametricMap& x, const BinaryMask& mask) {
  if (x.rows() != mask.rows || x.cols() != mask.cols) throw Error("mask/map dimension mismatch");
  std::vector<double> y;
  y.reserve(mask.ones());
  const auto v = x.values();
  for (std::size_t i = 0; i < mask.cells.size(); ++i)
    if (mask.cells[i]) y.push_back(v[i]);
  return y;
}

void add_noise(std::span<double> y, double noise_std, std::uint64_t seed, std::uint64_t stream) {
  if (noise_std < 0.0) throw Error("noise_std must be >= 0");
  if (noise_std == 0.0) return;
  auto gen = detail::make_engine(seed, stream + 2);
  std::normal_distribution<double> dist(0.0, noise_std);
  for (auto& v : y) v += dist(gen);
}

SelectionOperator::SelectionOperator(const BinaryMask& mask)
    : n_(mask.rows * mask.cols), index_(mask.sampled_indices()) {}

void SelectionOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_ || y.size() != index_.size()) throw Error("dimension mismatch in S x");
  for (std::size_t i = 0; i < index_.size(); ++i) y[i] = x[index_[i]];
}

void SelectionOperator::apply_transpose(std::span<const double> z, std::span<double> x) const {
  if (z.size() != index_.size() || x.size() != n_) throw Error("dimension mismatch in S^T z");
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t i = 0; i < index_.size(); ++i) x[index_[i]] = z[i];
}

double CsProblem::ratio() const {
  return std::visit([](const auto& o) { return compression_ratio(o); }, op);
}

std::size_t block_side_for(const MeasurementMatrix& a) {
  const auto b = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(a.n))));
  if (b * b != a.n) throw Error("matrix column count " + std::to_string(a.n) + " is not a square");
  return b;
}

CsProblem make_problem(const ParametricMap& x, MeasurementMatrix a, double noise_std,
                       std::uint64_t noise_seed) {
  const std::size_t b = block_side_for(a);
  CsProblem p;
  p.grid = BlockGrid::for_map(x.rows(), x.cols(), b);
  p.noise_std = noise_std;
  const auto blocks = partition_vectors(x, p.grid);
  p.y.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto y = apply_sampling(blocks[i], a);
    add_noise(y, noise_std, noise_seed, i);
    p.y.push_back(std::move(y));
  }
  p.op = std::move(a);
  return p;
}

CsProblem make_problem(const ParametricMap& x, BinaryMask mask, double noise_std,
                       std::uint64_t noise_seed) {
  CsProblem p;
  if (x.empty()) throw Error("empty input");
  // the mask spans the whole image; the grid only records its extent
  p.grid.n_block_rows = 1;
  p.grid.n_block_cols = 1;
  p.grid.source_rows = x.rows();
  p.grid.source_cols = x.cols();
  p.noise_std = noise_std;
  auto y = apply_sampling(x, mask);
  add_noise(y, noise_std, noise_seed, 0);
  p.y.push_back(std::move(y));
  p.op = std::move(mask);
  return p;
}

}  // namespace qamcs
