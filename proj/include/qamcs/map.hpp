#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qamcs {

/// 2-D grid of physical values, row-major.
class ParametricMap {
 public:
  ParametricMap() = default;
  ParametricMap(std::size_t rows, std::size_t cols, std::string unit = {});
  ParametricMap(std::size_t rows, std::size_t cols, std::vector<double> data, std::string unit = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  const std::string& unit() const noexcept { return unit_; }
  void set_unit(std::string unit) { unit_ = std::move(unit); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  /// Throws qamcs::Error if any value is NaN or infinite.
  void check_finite() const;

  bool operator==(const ParametricMap&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::string unit_;
};

/// Geometry of a partition into square blocks with bottom/right zero padding.
struct BlockGrid {
  std::size_t block_size = 0;
  std::size_t n_block_rows = 0;
  std::size_t n_block_cols = 0;
  std::size_t pad_rows = 0;
  std::size_t pad_cols = 0;
  std::size_t source_rows = 0;
  std::size_t source_cols = 0;

  static BlockGrid for_map(std::size_t rows, std::size_t cols, std::size_t block_size);

  std::size_t block_count() const noexcept { return n_block_rows * n_block_cols; }
  std::size_t block_length() const noexcept { return block_size * block_size; }

  bool operator==(const BlockGrid&) const = default;
};

/// One B x B block. `values` is the row-major vectorisation of the block.
struct Block {
  std::size_t size = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * size + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * size + c]; }
};

struct Partition {
  std::vector<Block> blocks;
  BlockGrid grid;
};

/// Splits a map into B x B blocks in row-major block order. Cells beyond the
/// source extent are zero.
Partition block_partition(const ParametricMap& map, std::size_t block_size);

/// Inverse of block_partition; padding is cropped.
ParametricMap block_reassemble(std::span<const Block> blocks, const BlockGrid& grid,
                               std::string unit = {});

/// Overloads working on bare vectorised blocks (length B^2 each), which is how
/// the solvers carry them around.
std::vector<std::vector<double>> partition_vectors(const ParametricMap& map, const BlockGrid& grid);
ParametricMap reassemble_vectors(std::span<const std::vector<double>> blocks, const BlockGrid& grid,
                                 std::string unit = {});

}  // namespace qamcs
