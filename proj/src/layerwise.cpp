#include "tnm/layerwise.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tnm/errors.hpp"

namespace tnm {
namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<const EMatrix>;

EMap map_of(const DenseMatrix& m) { return EMap(m.values.data(), m.rows, m.cols); }

DenseMatrix to_dense(const EMatrix& e) {
  std::vector<double> v(e.data(), e.data() + e.size());
  return DenseMatrix(e.rows(), e.cols(), std::move(v));
}

double mask_score(const DenseMatrix& mask, const EMatrix& scores) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < mask.rows; ++i)
    for (std::int64_t j = 0; j < mask.cols; ++j)
      if (mask.at(i, j) != 0.0) acc += scores(i, j);
  return acc;
}

}  // namespace

LayerProblem LayerProblem::create(DenseMatrix w_hat, DenseMatrix gram, double lambda,
                                  std::int64_t n_samples) {
  if (gram.rows != gram.cols) throw ShapeError("layer: gram must be square");
  if (w_hat.rows != gram.rows)
    throw ShapeError("layer: w_hat rows " + std::to_string(w_hat.rows) +
                     " != gram dim " + std::to_string(gram.rows));
  if (!(lambda >= 0.0)) throw PreconditionError("layer: lambda must be >= 0");

  double scale = 1.0;
  for (double v : gram.values) scale = std::max(scale, std::fabs(v));
  for (std::int64_t i = 0; i < gram.rows; ++i)
    for (std::int64_t j = i + 1; j < gram.cols; ++j)
      if (std::fabs(gram.at(i, j) - gram.at(j, i)) > 1e-8 * scale)
        throw PreconditionError("layer: gram is not symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");

  // Indefiniteness check by LDLT inertia; tolerate roundoff-sized negatives.
  Eigen::MatrixXd g = map_of(gram);
  g = 0.5 * (g + g.transpose().eval());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
  const double floor = -1e-8 * scale;
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < floor)
    throw PreconditionError("layer: gram is not positive semidefinite");

  LayerProblem out;
  out.w_hat = std::move(w_hat);
  out.gram = std::move(gram);
  out.lambda = lambda;
  out.n_samples = n_samples;
  return out;
}

LayerProblem LayerProblem::from_activations(DenseMatrix w_hat, const DenseMatrix& activations,
                                            double lambda) {
  if (activations.cols != w_hat.rows)
    throw ShapeError("layer: activation cols " + std::to_string(activations.cols) +
                     " != w_hat rows " + std::to_string(w_hat.rows));
  EMap x = map_of(activations);
  EMatrix h = x.transpose() * x;
  for (std::int64_t i = 0; i < h.rows(); ++i) h(i, i) += lambda;
  return create(std::move(w_hat), to_dense(h), lambda, activations.rows);
}

DenseMatrix wanda_transform(const DenseMatrix& w_hat, std::span<const double> x_col_norms) {
  if (x_col_norms.size() != static_cast<std::size_t>(w_hat.rows))
    throw ShapeError("wanda: norm count != w_hat rows");
  for (double v : x_col_norms)
    if (!(v >= 0.0)) throw PreconditionError("wanda: norms must be >= 0");
  DenseMatrix out = w_hat;
  for (std::int64_t i = 0; i < out.rows; ++i)
    for (std::int64_t j = 0; j < out.cols; ++j) out.at(i, j) *= x_col_norms[i];
  return out;
}

std::vector<double> gram_col_norms(const LayerProblem& layer) {
  std::vector<double> norms(static_cast<std::size_t>(layer.gram.rows));
  for (std::int64_t i = 0; i < layer.gram.rows; ++i) {
    const double d = layer.gram.at(i, i) - layer.lambda;
    norms[i] = d > 0.0 ? std::sqrt(d) : 0.0;
  }
  return norms;
}

DenseMatrix select_mask(const DenseMatrix& scores, const SparsityPattern& pattern, MaskKind kind,
                        const DykstraConfig& dykstra_config, const RoundingConfig& rounding_config,
                        int threads) {
  for (double v : scores.values)
    if (!(v >= 0.0)) throw PreconditionError("select: scores must be >= 0");
  switch (kind) {
    case MaskKind::kTransposable: {
      MaskSolveResult r = solve_mask(scores, pattern, dykstra_config, rounding_config, threads);
      return assemble_mask(r.mask, r.origins, scores.rows, scores.cols);
    }
    case MaskKind::kRowwiseNm: {
      if (scores.cols % pattern.m != 0)
        throw DimensionError("select: cols not divisible by m");
      DenseMatrix out = DenseMatrix::zeros(scores.rows, scores.cols);
      std::vector<int> order(static_cast<std::size_t>(pattern.m));
      for (std::int64_t i = 0; i < scores.rows; ++i)
        for (std::int64_t g = 0; g < scores.cols / pattern.m; ++g) {
          const double* base = scores.values.data() + i * scores.cols + g * pattern.m;
          std::iota(order.begin(), order.end(), 0);
          std::sort(order.begin(), order.end(), [base](int a, int b) {
            if (base[a] != base[b]) return base[a] > base[b];
            return a < b;
          });
          for (int k = 0; k < pattern.n; ++k)
            out.at(i, g * pattern.m + order[k]) = 1.0;
        }
      return out;
    }
    case MaskKind::kUnstructured: {
      const std::uint64_t cells = static_cast<std::uint64_t>(scores.rows) * scores.cols;
      const std::uint64_t keep =
          cells * static_cast<std::uint64_t>(pattern.n) / static_cast<std::uint64_t>(pattern.m);
      std::vector<std::int64_t> order(cells);
      std::iota(order.begin(), order.end(), 0);
      const double* v = scores.values.data();
      std::sort(order.begin(), order.end(), [v](std::int64_t a, std::int64_t b) {
        if (v[a] != v[b]) return v[a] > v[b];
        return a < b;
      });
      DenseMatrix out = DenseMatrix::zeros(scores.rows, scores.cols);
      for (std::uint64_t k = 0; k < keep; ++k) out.values[order[k]] = 1.0;
      return out;
    }
  }
  throw PreconditionError("select: unknown mask kind");
}

DenseMatrix apply_mask(const DenseMatrix& weights, const DenseMatrix& mask01) {
  if (weights.rows != mask01.rows || weights.cols != mask01.cols)
    throw ShapeError("apply: weights/mask shape mismatch");
  DenseMatrix out = weights;
  for (std::size_t k = 0; k < out.values.size(); ++k)
    if (mask01.values[k] == 0.0) out.values[k] = 0.0;
  return out;
}

AdmmResult admm_prune(const LayerProblem& layer, const SparsityPattern& pattern,
                      const AdmmConfig& config) {
  if (!(config.growth > 1.0)) throw PreconditionError("admm: growth must be > 1");
  if (config.max_iters < 1) throw PreconditionError("admm: max_iters must be >= 1");

  const std::int64_t d_in = layer.w_hat.rows;
  const std::int64_t d_out = layer.w_hat.cols;
  EMap w_hat = map_of(layer.w_hat);
  EMap gram = map_of(layer.gram);

  double rho = config.rho0;
  if (rho <= 0.0) {
    double mean_diag = 0.0;
    for (std::int64_t i = 0; i < d_in; ++i) mean_diag += layer.gram.at(i, i);
    mean_diag /= static_cast<double>(d_in);
    rho = 0.1 * mean_diag;
    if (!(rho > 0.0)) rho = 0.1;  // all-zero gram still needs a positive rho
  }

  const double w_hat_norm = w_hat.norm();
  const EMatrix gram_w_hat = gram * w_hat;  // constant across iterations

  // D^(0): prune w_hat by magnitude within the same mask family.
  DenseMatrix abs_w_hat = layer.w_hat;
  for (double& v : abs_w_hat.values) v = std::fabs(v);
  DenseMatrix mask = select_mask(abs_w_hat, pattern, config.mask_kind, config.dykstra,
                                 config.rounding, config.threads);
  EMatrix d = w_hat;
  for (std::int64_t i = 0; i < d_in; ++i)
    for (std::int64_t j = 0; j < d_out; ++j)
      if (mask.at(i, j) == 0.0) d(i, j) = 0.0;
  EMatrix v_dual = EMatrix::Zero(d_in, d_out);
  EMatrix w = w_hat;

  AdmmResult out;
  out.trace.iters.reserve(static_cast<std::size_t>(config.max_iters));

  for (int t = 0; t < config.max_iters; ++t) {
    // W-step: (gram + rho I) W = gram*w_hat - V + rho*D, one factorization
    // per rho reused for every column of the right-hand side.
    Eigen::MatrixXd shifted = gram;
    for (std::int64_t i = 0; i < d_in; ++i) shifted(i, i) += rho;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success)
      throw NumericalError("admm: Cholesky failed at iteration " + std::to_string(t));
    const EMatrix rhs = gram_w_hat - v_dual + rho * d;
    w = llt.solve(Eigen::MatrixXd(rhs));

    // D-step scores; safeguard keeps the previous mask when it scores higher.
    const EMatrix target = w + v_dual / rho;
    const EMatrix scores = target.array().square().matrix();
    DenseMatrix new_mask =
        select_mask(to_dense(scores), pattern, config.mask_kind, config.dykstra, config.rounding,
                    config.threads);
    AdmmIterRecord rec;
    rec.rho = rho;
    rec.score_prev = mask_score(mask, scores);
    rec.score_new = mask_score(new_mask, scores);
    rec.safeguard_triggered = rec.score_new < rec.score_prev;
    if (rec.safeguard_triggered) {
      ++out.trace.safeguard_count;
    } else {
      mask = std::move(new_mask);
    }
    rec.score_used = std::max(rec.score_prev, rec.score_new);

    d = target;
    for (std::int64_t i = 0; i < d_in; ++i)
      for (std::int64_t j = 0; j < d_out; ++j)
        if (mask.at(i, j) == 0.0) d(i, j) = 0.0;

    v_dual += rho * (w - d);

    rec.primal_residual = w_hat_norm > 0.0 ? (w - d).norm() / w_hat_norm : (w - d).norm();
    rec.reconstruction_error = reconstruction_error(layer, to_dense(d));
    out.trace.iters.push_back(rec);

    if (rec.primal_residual < config.primal_tol) {
      out.trace.converged = true;
      break;
    }
    rho *= config.growth;
  }

  out.weights = to_dense(d);
  out.mask = std::move(mask);
  return out;
}

double reconstruction_error(const LayerProblem& layer, const DenseMatrix& w) {
  if (w.rows != layer.w_hat.rows || w.cols != layer.w_hat.cols)
    throw ShapeError("reconstruction: weight shape mismatch");
  EMap w_map = map_of(w);
  EMap w_hat = map_of(layer.w_hat);
  EMap gram = map_of(layer.gram);
  Eigen::MatrixXd a = gram;  // X^T X = gram - lambda*I
  for (std::int64_t i = 0; i < a.rows(); ++i) a(i, i) -= layer.lambda;

  const EMatrix diff = w_map - w_hat;
  const double num = (diff.transpose() * (a * diff)).trace();
  const double den = (w_hat.transpose() * (a * w_hat)).trace();
  if (den <= 0.0)
    throw DegenerateError("reconstruction: zero reference energy (X w_hat = 0)");
  // Tiny negative traces are roundoff; anything sizeable is a real problem.
  if (num < -1e-9 * den) throw NumericalError("reconstruction: negative energy");
  return std::max(0.0, num / den);
}

}  // namespace tnm
