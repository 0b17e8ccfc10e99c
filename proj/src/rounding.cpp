#include "tnm/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tnm/errors.hpp"
#include "tnm/parallel.hpp"

namespace tnm {
namespace {

void fill_counts(const std::uint8_t* s, std::int64_t m, std::vector<int>& rows,
                 std::vector<int>& cols) {
  rows.assign(static_cast<std::size_t>(m), 0);
  cols.assign(static_cast<std::size_t>(m), 0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < m; ++j)
      if (s[i * m + j]) {
        ++rows[i];
        ++cols[j];
      }
}

double block_max(const double* w, std::int64_t count) {
  double hi = 0.0;
  for (std::int64_t k = 0; k < count; ++k) hi = std::max(hi, w[k]);
  return hi;
}

// Lowest-index deficit row/column, or {-1,-1} when the tile is full.
std::pair<std::int64_t, std::int64_t> first_deficit(const std::vector<int>& rows,
                                                    const std::vector<int>& cols, int n) {
  std::int64_t di = -1, dj = -1;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i] < n) {
      di = static_cast<std::int64_t>(i);
      break;
    }
  for (std::size_t j = 0; j < cols.size(); ++j)
    if (cols[j] < n) {
      dj = static_cast<std::int64_t>(j);
      break;
    }
  return {di, dj};
}

// Best swap for the deficit pair (di, dj): returns flat index of the removal
// candidate or -1 when every candidate holds the sentinel. require_positive
// demands a strictly positive gain. Ties resolve to the lowest flat index.
std::int64_t best_swap(const double* w, const std::uint8_t* s, std::int64_t m, std::int64_t di,
                       std::int64_t dj, bool require_positive, double sentinel) {
  double best = sentinel;
  std::int64_t best_k = -1;
  for (std::int64_t i = 0; i < m; ++i) {
    if (i == di) continue;
    for (std::int64_t j = 0; j < m; ++j) {
      if (j == dj) continue;
      if (!s[i * m + j] || s[di * m + j] || s[i * m + dj]) continue;
      const double gain = w[di * m + j] + w[i * m + dj] - w[i * m + j];
      if (gain > best) {
        best = gain;
        best_k = i * m + j;
      }
    }
  }
  if (best_k < 0) return -1;
  if (require_positive && !(best > 0.0)) return -1;
  return best_k;
}

// Completion variant of best_swap: ranks candidates by the value of the two
// inserted cells |W[di,j']| + |W[i',dj]| alone, ignoring the removal cost.
// Completion repairs feasibility by force-inserting the biggest cells; it
// deliberately does not re-optimize removals, which is local search's job.
std::int64_t best_forced_swap(const double* w, const std::uint8_t* s, std::int64_t m,
                              std::int64_t di, std::int64_t dj) {
  double best = -1.0;
  std::int64_t best_k = -1;
  for (std::int64_t i = 0; i < m; ++i) {
    if (i == di) continue;
    for (std::int64_t j = 0; j < m; ++j) {
      if (j == dj) continue;
      if (!s[i * m + j] || s[di * m + j] || s[i * m + dj]) continue;
      const double inserted = w[di * m + j] + w[i * m + dj];
      if (inserted > best) {
        best = inserted;
        best_k = i * m + j;
      }
    }
  }
  return best_k;
}

void apply_swap(std::uint8_t* s, std::int64_t m, std::int64_t di, std::int64_t dj, std::int64_t k,
                std::vector<int>& rows, std::vector<int>& cols) {
  const std::int64_t i = k / m;
  const std::int64_t j = k % m;
  s[i * m + j] = 0;
  s[di * m + j] = 1;
  s[i * m + dj] = 1;
  // Row i and column j lose one and gain one; only the deficit pair grows.
  ++rows[di];
  ++cols[dj];
}

void greedy_tile(const double* scores, std::uint8_t* s, std::int64_t m, int n,
                 std::vector<std::int64_t>& order, std::vector<int>& rows, std::vector<int>& cols) {
  const std::int64_t mm = m * m;
  for (std::int64_t k = 0; k < mm; ++k)
    if (!std::isfinite(scores[k])) throw NumericalError("greedy: non-finite score");
  order.resize(static_cast<std::size_t>(mm));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [scores](std::int64_t a, std::int64_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  rows.assign(static_cast<std::size_t>(m), 0);
  cols.assign(static_cast<std::size_t>(m), 0);
  for (std::int64_t k : order) {
    const std::int64_t i = k / m;
    const std::int64_t j = k % m;
    if (rows[i] < n && cols[j] < n) {
      s[k] = 1;
      ++rows[i];
      ++cols[j];
    }
  }
}

}  // namespace

GreedyResult greedy_round(std::span<const double> scores, std::int64_t b, std::int64_t m,
                          const SparsityPattern& pattern, int threads) {
  if (m != pattern.m) throw ShapeError("greedy: tile size != pattern m");
  if (scores.size() != static_cast<std::size_t>(b) * m * m)
    throw ShapeError("greedy: score count does not match b*m*m");

  GreedyResult out;
  out.mask = BinaryMaskBatch::zeros(b, m);
  out.states.resize(static_cast<std::size_t>(b));
  parallel_for(b, threads, [&](std::int64_t bi) {
    std::vector<std::int64_t> order;
    greedy_tile(scores.data() + bi * m * m, out.mask.bits.data() + bi * m * m, m, pattern.n, order,
                out.states[bi].row_counts, out.states[bi].col_counts);
  });
  return out;
}

SwapScores swap_score(std::span<const double> weights, std::span<const std::uint8_t> mask,
                      std::int64_t m, const SparsityPattern& pattern, std::int64_t deficit_row,
                      std::int64_t deficit_col) {
  if (m != pattern.m) throw ShapeError("swap: tile size != pattern m");
  if (weights.size() != static_cast<std::size_t>(m) * m || mask.size() != weights.size())
    throw ShapeError("swap: weights/mask size mismatch");
  if (deficit_row < 0 || deficit_row >= m || deficit_col < 0 || deficit_col >= m)
    throw PreconditionError("swap: deficit indices out of range");

  std::vector<int> rows, cols;
  fill_counts(mask.data(), m, rows, cols);
  if (rows[deficit_row] >= pattern.n || cols[deficit_col] >= pattern.n)
    throw PreconditionError("swap: (" + std::to_string(deficit_row) + "," +
                            std::to_string(deficit_col) + ") is not a deficit pair");

  SwapScores out;
  out.sentinel = -(1.0 + 3.0 * block_max(weights.data(), m * m));
  out.values.assign(static_cast<std::size_t>(m) * m, out.sentinel);
  for (std::int64_t i = 0; i < m; ++i) {
    if (i == deficit_row) continue;
    for (std::int64_t j = 0; j < m; ++j) {
      if (j == deficit_col) continue;
      if (!mask[i * m + j] || mask[deficit_row * m + j] || mask[i * m + deficit_col]) continue;
      out.values[i * m + j] =
          weights[deficit_row * m + j] + weights[i * m + deficit_col] - weights[i * m + j];
    }
  }
  return out;
}

LocalSearchResult local_search(const BlockBatch& weights, BinaryMaskBatch mask,
                               const SparsityPattern& pattern, const RoundingConfig& config,
                               int threads) {
  if (weights.b != mask.b || weights.m != mask.m)
    throw ShapeError("local search: weights/mask shape mismatch");
  if (weights.m != pattern.m) throw ShapeError("local search: tile size != pattern m");
  if (config.local_search_steps < 0)
    throw PreconditionError("local search: steps must be >= 0");

  LocalSearchResult out;
  out.mask = std::move(mask);
  out.swaps_per_block.assign(static_cast<std::size_t>(weights.b), 0);
  const std::int64_t m = weights.m;

  parallel_for(weights.b, threads, [&](std::int64_t bi) {
    const double* w = weights.magnitudes.data() + bi * m * m;
    std::uint8_t* s = out.mask.bits.data() + bi * m * m;
    std::vector<int> rows, cols;
    fill_counts(s, m, rows, cols);
    const double sentinel = -(1.0 + 3.0 * block_max(w, m * m));
    for (int t = 0; t < config.local_search_steps; ++t) {
      const auto [di, dj] = first_deficit(rows, cols, pattern.n);
      if (di < 0 || dj < 0) break;  // tile already full
      const std::int64_t k = best_swap(w, s, m, di, dj, /*require_positive=*/true, sentinel);
      if (k < 0) break;  // no strictly improving swap left
      apply_swap(s, m, di, dj, k, rows, cols);
      ++out.swaps_per_block[bi];
    }
  });
  for (int v : out.swaps_per_block) out.swaps_applied += v;
  return out;
}

// While any deficit pair remains, either a swap for the lowest deficit pair
// or a direct insertion exists: if no insertable cell (a,b) with room in both
// lines exists, every column j' missing from the deficit row is full, and any
// such column holds n cells whose rows cannot all appear in the deficit
// column (it has fewer than n), which yields a removable cell, i.e. a swap.
CompletionResult complete_mask(const BlockBatch& weights, BinaryMaskBatch mask,
                               const SparsityPattern& pattern, int threads) {
  if (weights.b != mask.b || weights.m != mask.m)
    throw ShapeError("completion: weights/mask shape mismatch");
  if (weights.m != pattern.m) throw ShapeError("completion: tile size != pattern m");

  CompletionResult out;
  out.mask = std::move(mask);
  const std::int64_t m = weights.m;
  const int n = pattern.n;
  std::vector<std::int64_t> ops_per_block(static_cast<std::size_t>(weights.b), 0);

  parallel_for(weights.b, threads, [&](std::int64_t bi) {
    const double* w = weights.magnitudes.data() + bi * m * m;
    std::uint8_t* s = out.mask.bits.data() + bi * m * m;
    std::vector<int> rows, cols;
    fill_counts(s, m, rows, cols);
    const std::int64_t step_limit = static_cast<std::int64_t>(n) * m + 1;
    for (std::int64_t step = 0; step <= step_limit; ++step) {
      const auto [di, dj] = first_deficit(rows, cols, n);
      if (di < 0 || dj < 0) return;  // full
      const std::int64_t k = best_forced_swap(w, s, m, di, dj);
      if (k >= 0) {
        apply_swap(s, m, di, dj, k, rows, cols);
        ++ops_per_block[bi];
        continue;
      }
      // No swap available; take the largest insertable cell.
      std::int64_t ins = -1;
      double best = -1.0;
      for (std::int64_t i = 0; i < m; ++i) {
        if (rows[i] >= n) continue;
        for (std::int64_t j = 0; j < m; ++j) {
          if (cols[j] >= n || s[i * m + j]) continue;
          if (w[i * m + j] > best) {
            best = w[i * m + j];
            ins = i * m + j;
          }
        }
      }
      if (ins < 0)
        throw InfeasibleInternalError("completion: stuck with deficits in tile " +
                                      std::to_string(bi));
      s[ins] = 1;
      ++rows[ins / m];
      ++cols[ins % m];
      ++ops_per_block[bi];
    }
    throw InfeasibleInternalError("completion: step limit exceeded in tile " + std::to_string(bi));
  });
  for (std::int64_t v : ops_per_block) out.completion_ops += v;
  return out;
}

MaskSolveResult solve_mask(const DenseMatrix& matrix, const SparsityPattern& pattern,
                           const DykstraConfig& dykstra_config, const RoundingConfig& rounding_config,
                           int threads) {
  const BlockBatch batch = partition_blocks(matrix, pattern);
  const FractionalMask plan = dykstra_solve(batch, pattern, dykstra_config, threads);
  const std::vector<double> frac = plan.values();

  GreedyResult greedy = greedy_round(frac, batch.b, batch.m, pattern, threads);
  LocalSearchResult searched =
      local_search(batch, std::move(greedy.mask), pattern, rounding_config, threads);
  CompletionResult completed = complete_mask(batch, std::move(searched.mask), pattern, threads);

  const FeasibilityReport feas = check_feasible(completed.mask, pattern);
  if (!feas.feasible)
    throw InfeasibleInternalError("solve: mask failed the final feasibility check");

  MaskSolveResult out;
  out.report = mask_objective(batch, completed.mask);
  out.mask = std::move(completed.mask);
  out.origins = batch.origins;
  out.src_rows = batch.src_rows;
  out.src_cols = batch.src_cols;
  out.swaps_applied = searched.swaps_applied;
  out.completion_ops = completed.completion_ops;
  return out;
}

}  // namespace tnm
