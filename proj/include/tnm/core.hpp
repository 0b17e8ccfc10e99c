#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnm/types.hpp"

namespace tnm {

struct BlockOrigin {
  std::int64_t block_row = 0;
  std::int64_t block_col = 0;
};

// A batch of b independent m x m magnitude tiles cut out of one source matrix.
// magnitudes are |W_ij| >= 0, row-major inside each tile.
struct BlockBatch {
  std::int64_t b = 0;
  std::int64_t m = 0;
  std::int64_t src_rows = 0;
  std::int64_t src_cols = 0;
  std::vector<double> magnitudes;    // b*m*m
  std::vector<BlockOrigin> origins;  // one per tile

  std::span<const double> block(std::int64_t bi) const {
    return {magnitudes.data() + bi * m * m, static_cast<std::size_t>(m * m)};
  }
  double at(std::int64_t bi, std::int64_t i, std::int64_t j) const {
    return magnitudes[(bi * m + i) * m + j];
  }
};

// 0/1 masks, same layout as BlockBatch.
struct BinaryMaskBatch {
  std::int64_t b = 0;
  std::int64_t m = 0;
  std::vector<std::uint8_t> bits;  // b*m*m, each 0 or 1

  static BinaryMaskBatch zeros(std::int64_t b, std::int64_t m) {
    BinaryMaskBatch out;
    out.b = b;
    out.m = m;
    out.bits.assign(static_cast<std::size_t>(b) * m * m, 0);
    return out;
  }
  std::span<const std::uint8_t> block(std::int64_t bi) const {
    return {bits.data() + bi * m * m, static_cast<std::size_t>(m * m)};
  }
  std::span<std::uint8_t> block(std::int64_t bi) {
    return {bits.data() + bi * m * m, static_cast<std::size_t>(m * m)};
  }
  std::uint8_t at(std::int64_t bi, std::int64_t i, std::int64_t j) const {
    return bits[(bi * m + i) * m + j];
  }
};

struct MaskObjectiveReport {
  double objective = 0.0;           // sum of per_block, accumulated in block order
  std::vector<double> per_block;    // sum_ij mask_ij * |W_ij| per tile
};

enum class Axis { kRow, kCol };

struct FeasibilityViolation {
  std::int64_t block = 0;
  Axis axis = Axis::kRow;
  std::int64_t index = 0;  // row or column inside the tile
  std::int64_t sum = 0;    // offending line sum
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<FeasibilityViolation> violations;
};

// Cuts |matrix| into (rows/m)*(cols/m) tiles, row-major over tiles.
// Throws DimensionError unless both dims are divisible by pattern.m.
BlockBatch partition_blocks(const DenseMatrix& matrix, const SparsityPattern& pattern);

// Writes mask tiles back into a full-size 0/1 matrix. Inverse of the
// partition layout: assemble(partition(X)) reproduces positions exactly.
DenseMatrix assemble_mask(const BinaryMaskBatch& batch, const std::vector<BlockOrigin>& origins,
                          std::int64_t rows, std::int64_t cols);

// sum_ij S_ij * |W_ij|, reported per tile and reduced in ascending block
// order so the total is identical across runs and worker counts.
MaskObjectiveReport mask_objective(const BlockBatch& batch, const BinaryMaskBatch& mask);

// Checks that every tile has exactly n ones in each row and each column.
FeasibilityReport check_feasible(const BinaryMaskBatch& mask, const SparsityPattern& pattern);

}  // namespace tnm
