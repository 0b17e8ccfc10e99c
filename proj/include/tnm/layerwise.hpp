#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnm/dykstra.hpp"
#include "tnm/rounding.hpp"
#include "tnm/types.hpp"

namespace tnm {

// One linear layer: dense weights w_hat (d_in x d_out) plus the ridge-shifted
// activation Gramian gram = X^T X + lambda*I (d_in x d_in). Construction
// checks symmetry and rejects Gramians that are indefinite beyond roundoff.
struct LayerProblem {
  DenseMatrix w_hat;
  DenseMatrix gram;
  double lambda = 0.0;
  std::int64_t n_samples = 0;  // provenance only; 0 when gram came from a file

  static LayerProblem create(DenseMatrix w_hat, DenseMatrix gram, double lambda,
                             std::int64_t n_samples = 0);

  // Builds gram = X^T X + lambda*I from raw activations X (n_samples x d_in).
  static LayerProblem from_activations(DenseMatrix w_hat, const DenseMatrix& activations,
                                       double lambda);
};

// Which family of masks the pruner projects onto each iteration.
enum class MaskKind {
  kTransposable,   // n per group along rows and columns of every m x m tile
  kRowwiseNm,      // n per group of m consecutive weights along rows only
  kUnstructured,   // global top-k, k = n/m of all cells
};

struct AdmmConfig {
  double rho0 = -1.0;       // <= 0 means 0.1 * mean(diag(gram))
  double growth = 1.03;     // rho multiplier per iteration; must be > 1
  int max_iters = 300;
  double primal_tol = 1e-4; // stop when ||W - D||_F / ||w_hat||_F drops below
  MaskKind mask_kind = MaskKind::kTransposable;
  DykstraConfig dykstra;
  RoundingConfig rounding;
  int threads = 1;
};

struct AdmmIterRecord {
  double rho = 0.0;
  double primal_residual = 0.0;
  double score_prev = 0.0;      // previous mask evaluated at this iterate
  double score_new = 0.0;       // freshly solved mask at this iterate
  double score_used = 0.0;      // max of the two; the mask actually kept
  bool safeguard_triggered = false;
  double reconstruction_error = 0.0;  // of the masked iterate D
};

struct AdmmTrace {
  std::vector<AdmmIterRecord> iters;
  int safeguard_count = 0;
  bool converged = false;
};

struct AdmmResult {
  DenseMatrix weights;  // masked weights D; nonzeros fit the mask family
  DenseMatrix mask;     // final 0/1 mask
  AdmmTrace trace;
};

// Scales row i of w_hat by x_col_norms[i] (the activation norm of input i).
DenseMatrix wanda_transform(const DenseMatrix& w_hat, std::span<const double> x_col_norms);

// Column norms ||X_:,i|| recovered from the Gramian diagonal.
std::vector<double> gram_col_norms(const LayerProblem& layer);

// 0/1 mask maximizing sum(mask * scores) over the given family; scores must
// be non-negative. The transposable family goes through the full
// entropy/rounding pipeline; the other two are exact projections.
DenseMatrix select_mask(const DenseMatrix& scores, const SparsityPattern& pattern, MaskKind kind,
                        const DykstraConfig& dykstra_config, const RoundingConfig& rounding_config,
                        int threads = 1);

DenseMatrix apply_mask(const DenseMatrix& weights, const DenseMatrix& mask01);

// Alternating pruner: W-step solves (gram + rho*I) W = gram*w_hat - V + rho*D
// with one Cholesky per rho shared across columns; D-step re-selects the mask
// on (W + V/rho)^2 and keeps the previous mask instead whenever it scores
// higher at the current point (monotonicity safeguard); V accumulates the
// scaled residual. rho grows geometrically.
AdmmResult admm_prune(const LayerProblem& layer, const SparsityPattern& pattern,
                      const AdmmConfig& config);

// ||X(W - w_hat)||_F^2 / ||X w_hat||_F^2 computed through the Gramian
// (gram - lambda*I). DegenerateError when the denominator vanishes.
double reconstruction_error(const LayerProblem& layer, const DenseMatrix& w);

}  // namespace tnm
