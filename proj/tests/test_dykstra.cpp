#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tnm/bench.hpp"
#include "tnm/dykstra.hpp"
#include "tnm/errors.hpp"
#include "tnm/exact.hpp"

using namespace tnm;

namespace {

BlockBatch single_block(std::int64_t m, std::vector<double> magnitudes) {
  BlockBatch batch;
  batch.b = 1;
  batch.m = m;
  batch.src_rows = m;
  batch.src_cols = m;
  batch.magnitudes = std::move(magnitudes);
  batch.origins = {{0, 0}};
  return batch;
}

}  // namespace

TEST_CASE("uniform block converges to the constant n/m plan in one sweep") {
  BlockBatch batch = single_block(4, std::vector<double>(16, 3.7));
  FractionalMask plan = dykstra_solve(batch, SparsityPattern(2, 4), DykstraConfig{});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(plan.value(0, i, j) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(plan.iterations[0] == 1);  // violations are zero right away
}

TEST_CASE("all-zero block yields the uniform plan") {
  BlockBatch batch = single_block(4, std::vector<double>(16, 0.0));
  FractionalMask plan = dykstra_solve(batch, SparsityPattern(1, 4), DykstraConfig{});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(plan.value(0, i, j) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("identity-dominant 2x2 block at 1:2 concentrates on the diagonal") {
  BlockBatch batch = single_block(2, {1.0, 0.0, 0.0, 1.0});
  FractionalMask plan = dykstra_solve(batch, SparsityPattern(1, 2), DykstraConfig{});
  CHECK(plan.value(0, 0, 0) > 0.99);
  CHECK(plan.value(0, 1, 1) > 0.99);
  CHECK(plan.value(0, 0, 1) < 0.01);
  CHECK(plan.value(0, 1, 0) < 0.01);
}

TEST_CASE("capacity holds after every capacity projection and on the result") {
  BlockBatch batch = sample_blocks(6, 8, Distribution::kGaussian, 21);
  DykstraConfig cfg;
  cfg.marginal_tol = 0.0;
  cfg.max_iters = 40;
  DykstraObserver obs = [&](std::int64_t, int, DykstraPhase phase, std::span<const double> lv) {
    if (phase != DykstraPhase::kCapacityProjected) return;
    for (double v : lv) CHECK(std::exp(v) <= 1.0 + 1e-12);
  };
  FractionalMask plan = dykstra_solve(batch, SparsityPattern(4, 8), cfg, 1, obs);
  for (double lv : plan.log_values) {
    CHECK(lv <= 0.0);
    CHECK(std::exp(lv) <= 1.0 + 1e-12);
  }
  for (double ld : plan.log_dual) CHECK(ld >= 0.0);
}

TEST_CASE("row sums are exact immediately after the row projection") {
  BlockBatch batch = sample_blocks(4, 8, Distribution::kUniform, 3);
  DykstraConfig cfg;
  cfg.marginal_tol = 0.0;
  cfg.max_iters = 25;
  DykstraObserver obs = [&](std::int64_t, int, DykstraPhase phase, std::span<const double> lv) {
    if (phase != DykstraPhase::kRowProjected) return;
    for (int i = 0; i < 8; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 8; ++j) sum += std::exp(lv[i * 8 + j]);
      CHECK(sum == doctest::Approx(4.0).epsilon(1e-9));
    }
  };
  dykstra_solve(batch, SparsityPattern(4, 8), cfg, 1, obs);
}

TEST_CASE("fractional output is invariant under magnitude rescaling") {
  BlockBatch batch = sample_blocks(4, 8, Distribution::kGaussian, 13);
  FractionalMask base = dykstra_solve(batch, SparsityPattern(3, 8), DykstraConfig{});
  for (double scale : {1e3, 1e-3}) {
    BlockBatch scaled = batch;
    for (double& v : scaled.magnitudes) v *= scale;
    FractionalMask other = dykstra_solve(scaled, SparsityPattern(3, 8), DykstraConfig{});
    for (std::size_t k = 0; k < base.log_values.size(); ++k)
      CHECK(std::fabs(std::exp(other.log_values[k]) - std::exp(base.log_values[k])) < 1e-9);
  }
}

TEST_CASE("marginal violations vanish within the sweep budget at 8:16") {
  BlockBatch batch = sample_blocks(32, 16, Distribution::kGaussian, 5);
  DykstraConfig cfg;
  cfg.marginal_tol = 0.0;  // no early exit; run all 300 sweeps
  FractionalMask plan = dykstra_solve(batch, SparsityPattern(8, 16), cfg, 4);
  for (const MarginalViolation& v : marginal_violation(plan, SparsityPattern(8, 16))) {
    CHECK(v.row < 1e-3);
    CHECK(v.col < 1e-3);
  }
}

TEST_CASE("sharp plans approach the integral optimum within one percent") {
  // tau_scale 200 trades marginal convergence for objective sharpness; the
  // plan value is near-optimal long before the marginals settle.
  BlockBatch batch = sample_blocks(64, 16, Distribution::kGaussian, 0);
  SparsityPattern p(8, 16);
  DykstraConfig cfg;
  cfg.tau_scale = 200.0;
  FractionalMask plan = dykstra_solve(batch, p, cfg, 4);
  MaskObjectiveReport frac = fractional_objective(batch, plan);
  double mean_gap = 0.0;
  double first_gap = -1.0;
  for (std::int64_t bi = 0; bi < batch.b; ++bi) {
    const double opt = exact_solve(batch.block(bi), 16, p).objective;
    const double gap = std::fabs(frac.per_block[bi] - opt) / opt;
    mean_gap += gap / static_cast<double>(batch.b);
    if (bi == 0) first_gap = gap;
  }
  CHECK(first_gap < 0.01);
  CHECK(mean_gap < 0.01);
}

TEST_CASE("larger tau narrows the gap to the integral optimum") {
  BlockBatch batch = sample_blocks(64, 4, Distribution::kGaussian, 9);
  SparsityPattern p(2, 4);
  std::vector<double> opts;
  for (std::int64_t bi = 0; bi < batch.b; ++bi)
    opts.push_back(exact_solve(batch.block(bi), 4, p).objective);
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double ts : {50.0, 200.0, 800.0}) {
    DykstraConfig cfg;
    cfg.tau_scale = ts;
    cfg.max_iters = 5000;  // run (near) to convergence so sharpness dominates
    cfg.marginal_tol = 1e-10;
    FractionalMask plan = dykstra_solve(batch, p, cfg, 4);
    MaskObjectiveReport frac = fractional_objective(batch, plan);
    double gap = 0.0;
    for (std::int64_t bi = 0; bi < batch.b; ++bi) gap += opts[bi] - frac.per_block[bi];
    CHECK(gap <= prev_gap + 1e-12);
    prev_gap = gap;
  }
}

TEST_CASE("early exit stops once violations drop below the tolerance") {
  BlockBatch batch = sample_blocks(4, 8, Distribution::kGaussian, 17);
  DykstraConfig strict;
  strict.marginal_tol = 0.0;
  DykstraConfig relaxed;
  relaxed.marginal_tol = 1e-2;
  FractionalMask full = dykstra_solve(batch, SparsityPattern(4, 8), strict);
  FractionalMask quick = dykstra_solve(batch, SparsityPattern(4, 8), relaxed);
  for (std::int64_t bi = 0; bi < batch.b; ++bi) {
    CHECK(quick.iterations[bi] <= full.iterations[bi]);
    CHECK(full.iterations[bi] == strict.max_iters);
  }
  for (const MarginalViolation& v : marginal_violation(quick, SparsityPattern(4, 8))) {
    CHECK(v.row < 1e-2);
    CHECK(v.col < 1e-2);
  }
}

TEST_CASE("runs are deterministic and independent of worker count") {
  BlockBatch batch = sample_blocks(12, 8, Distribution::kLaplace, 77);
  FractionalMask a = dykstra_solve(batch, SparsityPattern(4, 8), DykstraConfig{}, 1);
  FractionalMask b = dykstra_solve(batch, SparsityPattern(4, 8), DykstraConfig{}, 4);
  FractionalMask c = dykstra_solve(batch, SparsityPattern(4, 8), DykstraConfig{}, 8);
  CHECK(a.log_values == b.log_values);
  CHECK(a.log_values == c.log_values);
  CHECK(a.log_dual == b.log_dual);
}

TEST_CASE("absolute tau mode overflows loudly on huge magnitudes") {
  BlockBatch batch = single_block(2, {1e200, 1.0, 1.0, 1e200});
  DykstraConfig cfg;
  cfg.tau_absolute = true;  // tau = 0.005 * 1e200 -> tau*|W| overflows
  CHECK_THROWS_AS(dykstra_solve(batch, SparsityPattern(1, 2), cfg), NumericalError);
}

TEST_CASE("scale-invariant mode handles huge magnitudes") {
  BlockBatch batch = single_block(2, {1e200, 1.0, 1.0, 1e200});
  FractionalMask plan = dykstra_solve(batch, SparsityPattern(1, 2), DykstraConfig{});
  CHECK(plan.value(0, 0, 0) > 0.99);
  CHECK(plan.value(0, 1, 1) > 0.99);
}

TEST_CASE("effective tau modes") {
  DykstraConfig scale_mode;
  CHECK(effective_tau(scale_mode, 4.0) == doctest::Approx(scale_mode.tau_scale / 4.0));
  CHECK(effective_tau(scale_mode, 0.0) == 0.0);
  DykstraConfig absolute;
  absolute.tau_absolute = true;
  CHECK(effective_tau(absolute, 4.0) == doctest::Approx(0.02));
  CHECK(effective_tau(absolute, 0.0) == 0.0);
  CHECK_THROWS_AS(effective_tau(scale_mode, -1.0), PreconditionError);
}

TEST_CASE("config validation") {
  BlockBatch batch = single_block(2, {1.0, 0.0, 0.0, 1.0});
  DykstraConfig bad_iters;
  bad_iters.max_iters = 0;
  CHECK_THROWS_AS(dykstra_solve(batch, SparsityPattern(1, 2), bad_iters), PreconditionError);
  DykstraConfig bad_tol;
  bad_tol.marginal_tol = -1.0;
  CHECK_THROWS_AS(dykstra_solve(batch, SparsityPattern(1, 2), bad_tol), PreconditionError);
  DykstraConfig bad_scale;
  bad_scale.tau_scale = 0.0;
  CHECK_THROWS_AS(dykstra_solve(batch, SparsityPattern(1, 2), bad_scale), PreconditionError);
  CHECK_THROWS_AS(dykstra_solve(batch, SparsityPattern(1, 4), DykstraConfig{}), ShapeError);
}

TEST_CASE("from_values validates and marginal_violation reports deviations") {
  std::vector<double> zeros(16, 0.0);
  FractionalMask empty = FractionalMask::from_values(1, 4, zeros);
  std::vector<MarginalViolation> v = marginal_violation(empty, SparsityPattern(2, 4));
  REQUIRE(v.size() == 1);
  CHECK(v[0].row == doctest::Approx(2.0));
  CHECK(v[0].col == doctest::Approx(2.0));

  std::vector<double> feasible(16, 0.5);
  FractionalMask half = FractionalMask::from_values(1, 4, feasible);
  v = marginal_violation(half, SparsityPattern(2, 4));
  CHECK(v[0].row == doctest::Approx(0.0));
  CHECK(v[0].col == doctest::Approx(0.0));

  std::vector<double> bad(16, 1.5);
  CHECK_THROWS_AS(FractionalMask::from_values(1, 4, bad), PreconditionError);
  CHECK_THROWS_AS(FractionalMask::from_values(1, 3, feasible), ShapeError);
}

TEST_CASE("fractional objective matches a hand computation") {
  BlockBatch batch = single_block(2, {2.0, 1.0, 1.0, 2.0});
  std::vector<double> vals = {0.75, 0.25, 0.25, 0.75};
  FractionalMask plan = FractionalMask::from_values(1, 2, vals);
  MaskObjectiveReport rep = fractional_objective(batch, plan);
  CHECK(rep.objective == doctest::Approx(0.75 * 2 + 0.25 + 0.25 + 0.75 * 2));
  BlockBatch wrong = single_block(4, std::vector<double>(16, 1.0));
  CHECK_THROWS_AS(fractional_objective(wrong, plan), ShapeError);
}
