#include "tnm/dykstra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tnm/errors.hpp"
#include "tnm/parallel.hpp"

namespace tnm {
namespace {

// log(sum_k exp(x_k)) with max subtraction; stride lets one routine walk rows
// (stride 1) and columns (stride m).
double logsumexp(const double* x, std::int64_t count, std::int64_t stride) {
  double hi = x[0];
  for (std::int64_t k = 1; k < count; ++k) hi = std::max(hi, x[k * stride]);
  double acc = 0.0;
  for (std::int64_t k = 0; k < count; ++k) acc += std::exp(x[k * stride] - hi);
  return hi + std::log(acc);
}

void solve_tile(std::int64_t bi, const BlockBatch& batch, const SparsityPattern& pattern,
                const DykstraConfig& config, FractionalMask& out, const DykstraObserver& observer) {
  const std::int64_t m = batch.m;
  const std::int64_t mm = m * m;
  const int n = pattern.n;
  const double log_n = std::log(static_cast<double>(n));

  double* log_s = out.log_values.data() + bi * mm;
  double* log_q = out.log_dual.data() + bi * mm;
  const double* w = batch.magnitudes.data() + bi * mm;

  double max_abs = 0.0;
  for (std::int64_t k = 0; k < mm; ++k) max_abs = std::max(max_abs, w[k]);
  const double tau = effective_tau(config, max_abs);

  for (std::int64_t k = 0; k < mm; ++k) {
    log_s[k] = tau * w[k];
    log_q[k] = 0.0;
  }

  int sweeps = 0;
  for (int t = 0; t < config.max_iters; ++t) {
    // Row marginals -> exactly n.
    for (std::int64_t i = 0; i < m; ++i) {
      const double shift = logsumexp(log_s + i * m, m, 1) - log_n;
      for (std::int64_t j = 0; j < m; ++j) log_s[i * m + j] -= shift;
    }
    if (observer) observer(bi, t, DykstraPhase::kRowProjected, {log_s, static_cast<std::size_t>(mm)});

    // Column marginals -> exactly n.
    for (std::int64_t j = 0; j < m; ++j) {
      const double shift = logsumexp(log_s + j, m, m) - log_n;
      for (std::int64_t i = 0; i < m; ++i) log_s[i * m + j] -= shift;
    }
    if (observer) observer(bi, t, DykstraPhase::kColProjected, {log_s, static_cast<std::size_t>(mm)});

    // Capacity clamp at 1 with the Dykstra dual carried across sweeps.
    for (std::int64_t k = 0; k < mm; ++k) {
      const double tmp = log_s[k] + log_q[k];
      log_s[k] = std::min(tmp, 0.0);
      log_q[k] = tmp - log_s[k];
    }
    if (observer) observer(bi, t, DykstraPhase::kCapacityProjected, {log_s, static_cast<std::size_t>(mm)});

    ++sweeps;

    // Marginal violations of the clamped iterate; also the NaN tripwire.
    // NaN must be tested on the raw sums: std::max drops NaN operands, so a
    // poisoned line would otherwise read as zero violation and exit early.
    double row_viol = 0.0, col_viol = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      double sum = 0.0;
      for (std::int64_t j = 0; j < m; ++j) sum += std::exp(log_s[i * m + j]);
      if (std::isnan(sum))
        throw NumericalError("dykstra: NaN in tile " + std::to_string(bi) + " at sweep " +
                             std::to_string(t));
      row_viol = std::max(row_viol, std::fabs(sum - n));
    }
    for (std::int64_t j = 0; j < m; ++j) {
      double sum = 0.0;
      for (std::int64_t i = 0; i < m; ++i) sum += std::exp(log_s[i * m + j]);
      if (std::isnan(sum))
        throw NumericalError("dykstra: NaN in tile " + std::to_string(bi) + " at sweep " +
                             std::to_string(t));
      col_viol = std::max(col_viol, std::fabs(sum - n));
    }
    if (row_viol < config.marginal_tol && col_viol < config.marginal_tol) break;
  }
  out.iterations[bi] = sweeps;
}

}  // namespace

double FractionalMask::value(std::int64_t bi, std::int64_t i, std::int64_t j) const {
  return std::exp(log_values[(bi * m + i) * m + j]);
}

std::vector<double> FractionalMask::values() const {
  std::vector<double> out(log_values.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::exp(log_values[k]);
  return out;
}

FractionalMask FractionalMask::from_values(std::int64_t b, std::int64_t m,
                                           std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(b) * m * m)
    throw ShapeError("plan: value count does not match b*m*m");
  FractionalMask out;
  out.b = b;
  out.m = m;
  out.log_values.resize(values.size());
  out.log_dual.assign(values.size(), 0.0);
  out.iterations.assign(static_cast<std::size_t>(b), 0);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("plan: values must lie in [0,1]");
    out.log_values[k] = std::log(v);  // log(0) = -inf is fine for diagnostics
  }
  return out;
}

double effective_tau(const DykstraConfig& config, double max_abs) {
  if (!(max_abs >= 0.0)) throw PreconditionError("tau: max|W| must be >= 0");
  if (max_abs == 0.0) return 0.0;
  return config.tau_absolute ? 0.005 * max_abs : config.tau_scale / max_abs;
}

FractionalMask dykstra_solve(const BlockBatch& batch, const SparsityPattern& pattern,
                             const DykstraConfig& config, int threads,
                             const DykstraObserver& observer) {
  if (batch.m != pattern.m)
    throw ShapeError("dykstra: tile size " + std::to_string(batch.m) + " != pattern m " +
                     std::to_string(pattern.m));
  if (config.max_iters < 1) throw PreconditionError("dykstra: max_iters must be >= 1");
  if (!(config.marginal_tol >= 0.0)) throw PreconditionError("dykstra: marginal_tol must be >= 0");
  if (!config.tau_absolute && !(config.tau_scale > 0.0))
    throw PreconditionError("dykstra: tau_scale must be > 0");

  FractionalMask out;
  out.b = batch.b;
  out.m = batch.m;
  out.log_values.assign(batch.magnitudes.size(), 0.0);
  out.log_dual.assign(batch.magnitudes.size(), 0.0);
  out.iterations.assign(static_cast<std::size_t>(batch.b), 0);

  const int workers = observer ? 1 : threads;
  parallel_for(batch.b, workers, [&](std::int64_t bi) {
    solve_tile(bi, batch, pattern, config, out, observer);
  });
  return out;
}

std::vector<MarginalViolation> marginal_violation(const FractionalMask& plan,
                                                  const SparsityPattern& pattern) {
  if (plan.m != pattern.m)
    throw ShapeError("violation: tile size " + std::to_string(plan.m) + " != pattern m " +
                     std::to_string(pattern.m));
  const std::int64_t m = plan.m;
  std::vector<MarginalViolation> out(static_cast<std::size_t>(plan.b));
  for (std::int64_t bi = 0; bi < plan.b; ++bi) {
    const double* log_s = plan.log_values.data() + bi * m * m;
    MarginalViolation v;
    for (std::int64_t i = 0; i < m; ++i) {
      double sum = 0.0;
      for (std::int64_t j = 0; j < m; ++j) sum += std::exp(log_s[i * m + j]);
      v.row = std::max(v.row, std::fabs(sum - pattern.n));
    }
    for (std::int64_t j = 0; j < m; ++j) {
      double sum = 0.0;
      for (std::int64_t i = 0; i < m; ++i) sum += std::exp(log_s[i * m + j]);
      v.col = std::max(v.col, std::fabs(sum - pattern.n));
    }
    out[bi] = v;
  }
  return out;
}

MaskObjectiveReport fractional_objective(const BlockBatch& batch, const FractionalMask& plan) {
  if (batch.b != plan.b || batch.m != plan.m)
    throw ShapeError("fractional objective: batch/plan shape mismatch");
  MaskObjectiveReport report;
  report.per_block.resize(static_cast<std::size_t>(batch.b), 0.0);
  const std::int64_t mm = batch.m * batch.m;
  for (std::int64_t bi = 0; bi < batch.b; ++bi) {
    const double* w = batch.magnitudes.data() + bi * mm;
    const double* log_s = plan.log_values.data() + bi * mm;
    double acc = 0.0;
    for (std::int64_t k = 0; k < mm; ++k) acc += std::exp(log_s[k]) * w[k];
    report.per_block[bi] = acc;
  }
  for (double v : report.per_block) report.objective += v;
  return report;
}

}  // namespace tnm
