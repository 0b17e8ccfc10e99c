#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnm/core.hpp"

namespace tnm {

struct ExactResult {
  std::vector<std::uint8_t> mask;  // m*m
  double objective = 0.0;          // sum of selected |W|, in doubles
};

// Optimal transposable mask for one tile via min-cost flow: source -> row
// (cap n), row -> col (cap 1, cost -round(|W|*1e9)), col -> sink (cap n);
// successive shortest augmenting paths with Johnson potentials, all arithmetic
// in int64. Optimal for the scaled integer costs, hence within the rounding
// quantum of the true optimum. An all-zero tile returns the first feasible
// mask in row-major order. Throws SizeError for m > 512 and ScaleError when
// |W| is too large for the integer scaling.
ExactResult exact_solve(std::span<const double> block, std::int64_t m,
                        const SparsityPattern& pattern);

struct ExactBatchResult {
  BinaryMaskBatch mask;
  std::vector<double> objectives;
};

ExactBatchResult exact_solve_batch(const BlockBatch& batch, const SparsityPattern& pattern,
                                   int threads = 1);

enum class BruteForceMode {
  kBranchAndBound,  // exact optimum; prunes by an optimistic per-row bound
  kExhaustive,      // exact optimum; visits every feasible mask (exact count)
};

struct BruteForceResult {
  std::vector<std::uint8_t> mask;
  double objective = 0.0;
  // Complete feasible masks visited. Exact total count of feasible masks in
  // exhaustive mode; just the visited subset under branch and bound.
  std::uint64_t feasible_visited = 0;
};

// Row-wise DFS over n-subsets with column-count pruning; independent of
// exact_solve by construction (no flow machinery, double arithmetic).
// Guarded to m <= 8 (SizeError).
BruteForceResult brute_force(std::span<const double> block, std::int64_t m,
                             const SparsityPattern& pattern,
                             BruteForceMode mode = BruteForceMode::kBranchAndBound);

// (optimal - candidate) / optimal. Zero optimal (all-zero tile) reports 0 by
// convention; a negative optimal is DegenerateError.
double relative_error(double candidate_objective, double optimal_objective);

}  // namespace tnm
