#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnm/core.hpp"

namespace tnm {

// Magnitude greedy with row/column counters, then completion to exact sums.
BinaryMaskBatch two_approximation(const BlockBatch& batch, const SparsityPattern& pattern,
                                  int threads = 1);

// Per row, per group of m consecutive columns: keep the top n by |values|
// (ties by ascending index). Requires cols divisible by m.
DenseMatrix rowwise_topn_mask(const DenseMatrix& scores, const SparsityPattern& pattern);

// Same along columns; requires rows divisible by m.
DenseMatrix colwise_topn_mask(const DenseMatrix& scores, const SparsityPattern& pattern);

// Row-wise top-n mask S1 on |W|, then column-wise top-n mask S2 on |W| ⊙ S1;
// returns S1 ⊙ S2. Each tile line ends up with at most n ones (often fewer,
// which is this baseline's known weakness); never more.
DenseMatrix bi_nm(const DenseMatrix& matrix, const SparsityPattern& pattern);

// Best of k uniformly sampled feasible masks. Rows are filled top to bottom
// with a uniform n-subset of the columns that still have demand; dead ends
// restart the tile (bounded retries, then a forced-column fill that cannot
// fail). Deterministic for a given seed; tile index bi uses the derived
// stream mix_seed(seed, bi).
std::vector<std::uint8_t> random_best(std::span<const double> block, std::int64_t m,
                                      const SparsityPattern& pattern, int k, std::uint64_t seed);

BinaryMaskBatch random_best_batch(const BlockBatch& batch, const SparsityPattern& pattern, int k,
                                  std::uint64_t seed, int threads = 1);

}  // namespace tnm
