#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tnm/core.hpp"

namespace tnm {

struct DykstraConfig {
  // Scale-invariant temperature: per tile, tau = tau_scale / max|W|. The
  // default trades a little plan sharpness for marginal convergence well
  // inside max_iters sweeps; larger values approximate the integral optimum
  // more tightly but converge slowly (see the bench sweep).
  double tau_scale = 20.0;
  // Alternative absolute mode: tau = 0.005 * max|W| (not scale invariant).
  bool tau_absolute = false;
  int max_iters = 300;
  // Early stop once both row and column marginal violations drop below this
  // (strict compare, so 0 disables the early exit).
  double marginal_tol = 1e-4;
};

// Fractional transportation plans, one per tile. Values live in log space so
// exp(tau*|W|) never overflows; value = exp(log_values) is always in [0, 1]
// right after the capacity projection. log_dual is the accumulated correction
// for the capacity constraint (the only constraint whose dual survives).
struct FractionalMask {
  std::int64_t b = 0;
  std::int64_t m = 0;
  std::vector<double> log_values;  // b*m*m, <= 0 on return
  std::vector<double> log_dual;    // b*m*m, >= 0
  std::vector<int> iterations;     // sweeps executed per tile

  double value(std::int64_t bi, std::int64_t i, std::int64_t j) const;
  std::vector<double> values() const;  // exp'd copy, b*m*m
  std::span<const double> log_block(std::int64_t bi) const {
    return {log_values.data() + bi * m * m, static_cast<std::size_t>(m * m)};
  }

  // Builds a plan directly from probabilities (diagnostics / tests).
  static FractionalMask from_values(std::int64_t b, std::int64_t m, std::span<const double> values);
};

// Per-tile temperature. max_abs == 0 collapses to tau = 0, which makes the
// plan uniform regardless of mode.
double effective_tau(const DykstraConfig& config, double max_abs);

enum class DykstraPhase { kRowProjected, kColProjected, kCapacityProjected };

// Observer for trajectory tests; receives the tile's log values after each
// projection. Forces single-threaded execution when set.
using DykstraObserver =
    std::function<void(std::int64_t block, int sweep, DykstraPhase, std::span<const double>)>;

// Alternating Bregman projections onto {row sums = n}, {col sums = n} and
// {values <= 1}, run independently per tile. Each sweep is: row scaling,
// column scaling, capacity clamp with dual carry. Stops after max_iters
// sweeps or when both marginal violations fall below marginal_tol.
FractionalMask dykstra_solve(const BlockBatch& batch, const SparsityPattern& pattern,
                             const DykstraConfig& config, int threads = 1,
                             const DykstraObserver& observer = nullptr);

struct MarginalViolation {
  double row = 0.0;  // max_i |sum_j S_ij - n|
  double col = 0.0;  // max_j |sum_i S_ij - n|
};

// Violations per tile for the current plan.
std::vector<MarginalViolation> marginal_violation(const FractionalMask& plan,
                                                  const SparsityPattern& pattern);

// sum_ij S_ij * |W_ij| per tile plus the block-order total.
MaskObjectiveReport fractional_objective(const BlockBatch& batch, const FractionalMask& plan);

}  // namespace tnm
