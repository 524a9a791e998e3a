#include "qamcs/map.hpp"

#include <cmath>

#include "qamcs/error.hpp"

namespace qamcs {

ParametricMap::ParametricMap(std::size_t rows, std::size_t cols, std::string unit)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0), unit_(std::move(unit)) {}

ParametricMap::ParametricMap(std::size_t rows, std::size_t cols, std::vector<double> data,
                             std::string unit)
    : rows_(rows), cols_(cols), data_(std::move(data)), unit_(std::move(unit)) {
  if (data_.size() != rows_ * cols_) {
    throw Error("map data length " + std::to_string(data_.size()) + " does not match " +
                std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

void ParametricMap::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error("non-finite map value at index " + std::to_string(i));
    }
  }
}

BlockGrid BlockGrid::for_map(std::size_t rows, std::size_t cols, std::size_t block_size) {
  if (rows == 0 || cols == 0) throw Error("empty input");
  if (block_size == 0) throw Error("block size must be >= 1");
  BlockGrid g;
  g.block_size = block_size;
  g.source_rows = rows;
  g.source_cols = cols;
  g.n_block_rows = (rows + block_size - 1) / block_size;
  g.n_block_cols = (cols + block_size - 1) / block_size;
  g.pad_rows = g.n_block_rows * block_size - rows;
  g.pad_cols = g.n_block_cols * block_size - cols;
  return g;
}

std::vector<std::vector<double>> partition_vectors(const ParametricMap& map, const BlockGrid& grid) {
  if (map.empty()) throw Error("empty input");
  if (map.rows() != grid.source_rows || map.cols() != grid.source_cols) {
    throw Error("map dimensions do not match block grid");
  }
  const std::size_t b = grid.block_size;
  std::vector<std::vector<double>> out(grid.block_count(), std::vector<double>(b * b, 0.0));
  for (std::size_t br = 0; br < grid.n_block_rows; ++br) {
    for (std::size_t bc = 0; bc < grid.n_block_cols; ++bc) {
      auto& blk = out[br * grid.n_block_cols + bc];
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t sr = br * b + r;
        if (sr >= map.rows()) break;
        for (std::size_t c = 0; c < b; ++c) {
          const std::size_t sc = bc * b + c;
          if (sc >= map.cols()) break;
          blk[r * b + c] = map(sr, sc);
        }
      }
    }
  }
  return out;
}

ParametricMap reassemble_vectors(std::span<const std::vector<double>> blocks, const BlockGrid& grid,
                                 std::string unit) {
  if (blocks.size() != grid.block_count()) {
    throw Error("block count " + std::to_string(blocks.size()) + " does not match grid (" +
                std::to_string(grid.block_count()) + ")");
  }
  const std::size_t b = grid.block_size;
  ParametricMap map(grid.source_rows, grid.source_cols, std::move(unit));
  for (std::size_t br = 0; br < grid.n_block_rows; ++br) {
    for (std::size_t bc = 0; bc < grid.n_block_cols; ++bc) {
      const auto& blk = blocks[br * grid.n_block_cols + bc];
      if (blk.size() != b * b) throw Error("block size does not match grid");
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t sr = br * b + r;
        if (sr >= map.rows()) break;
        for (std::size_t c = 0; c < b; ++c) {
          const std::size_t sc = bc * b + c;
          if (sc >= map.cols()) break;
          map(sr, sc) = blk[r * b + c];
        }
      }
    }
  }
  return map;
}

Partition block_partition(const ParametricMap& map, std::size_t block_size) {
  if (map.empty()) throw Error("empty input");
  Partition p;
  p.grid = BlockGrid::for_map(map.rows(), map.cols(), block_size);
  auto vecs = partition_vectors(map, p.grid);
  p.blocks.reserve(vecs.size());
  for (auto& v : vecs) p.blocks.push_back(Block{block_size, std::move(v)});
  return p;
}

ParametricMap block_reassemble(std::span<const Block> blocks, const BlockGrid& grid,
                               std::string unit) {
  std::vector<std::vector<double>> vecs;
  vecs.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (b.size != grid.block_size) throw Error("block size does not match grid");
    vecs.push_back(b.values);
  }
  return reassemble_vectors(vecs, grid, std::move(unit));
}

}  // namespace qamcs
