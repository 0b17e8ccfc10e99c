#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnm/core.hpp"
#include "tnm/dykstra.hpp"

namespace tnm {

struct RoundingConfig {
  int local_search_steps = 10;  // max swaps attempted per tile
};

// Row/column fill counters for one tile; counts stay <= n throughout.
struct GreedyState {
  std::vector<int> row_counts;
  std::vector<int> col_counts;
};

struct GreedyResult {
  BinaryMaskBatch mask;  // possibly under-filled
  std::vector<GreedyState> states;
};

// Visits cells in strictly descending score order (ties by ascending flat
// index i*m+j) and keeps a cell iff both its row and column counters are
// still below n. Scores must be finite.
GreedyResult greedy_round(std::span<const double> scores, std::int64_t b, std::int64_t m,
                          const SparsityPattern& pattern, int threads = 1);

struct SwapScores {
  std::vector<double> values;  // m*m; candidates that break feasibility hold `sentinel`
  double sentinel = 0.0;       // -(1 + 3*max|W|), strictly below any real swap gain
};

// Gain matrix for repairing the deficit pair (deficit_row, deficit_col):
// entry (i', j') scores removing (i', j') and inserting (deficit_row, j') and
// (i', deficit_col), i.e. |W[dr,j']| + |W[i',dc]| - |W[i',j']|. Entries whose
// removal/insertions are not available, plus the deficit row/column
// themselves, hold the sentinel. Throws PreconditionError unless both
// counters of the pair are < n.
SwapScores swap_score(std::span<const double> weights, std::span<const std::uint8_t> mask,
                      std::int64_t m, const SparsityPattern& pattern, std::int64_t deficit_row,
                      std::int64_t deficit_col);

struct LocalSearchResult {
  BinaryMaskBatch mask;
  std::int64_t swaps_applied = 0;          // total over tiles
  std::vector<int> swaps_per_block;
};

// Up to local_search_steps repair swaps per tile. Each step picks the
// lowest-index deficit row and lowest-index deficit column, takes the best
// strictly positive swap (ties by ascending flat index) and stops early when
// the tile is full or no positive swap exists. Swap gains are evaluated on
// |W| even when the greedy ranking came from fractional values.
LocalSearchResult local_search(const BlockBatch& weights, BinaryMaskBatch mask,
                               const SparsityPattern& pattern, const RoundingConfig& config,
                               int threads = 1);

struct CompletionResult {
  BinaryMaskBatch mask;
  std::int64_t completion_ops = 0;  // forced swaps + direct insertions
};

// Drives every tile to exact row/column sums n. While a deficit pair
// remains: force-insert the most valuable cells for it via the swap whose
// two insertions maximize |W[di,j']| + |W[i',dj]| (removal cost ignored —
// re-optimizing removals is local search's job, and doing it here would make
// the local-search step redundant); if no swap is available, directly insert
// the largest-|W| cell whose row and column both still have room. One of the
// two always exists (see the note in the implementation), so failure throws
// InfeasibleInternalError.
CompletionResult complete_mask(const BlockBatch& weights, BinaryMaskBatch mask,
                               const SparsityPattern& pattern, int threads = 1);

struct MaskSolveResult {
  BinaryMaskBatch mask;
  std::vector<BlockOrigin> origins;
  std::int64_t src_rows = 0;
  std::int64_t src_cols = 0;
  MaskObjectiveReport report;        // objective on |W|
  std::int64_t swaps_applied = 0;
  std::int64_t completion_ops = 0;
};

// Full pipeline: partition -> entropy-regularized plan -> greedy on the
// fractional values -> local search on |W| -> completion. The returned mask
// always passes check_feasible.
MaskSolveResult solve_mask(const DenseMatrix& matrix, const SparsityPattern& pattern,
                           const DykstraConfig& dykstra_config, const RoundingConfig& rounding_config,
                           int threads = 1);

}  // namespace tnm
