#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tnm/baselines.hpp"
#include "tnm/bench.hpp"
#include "tnm/core.hpp"
#include "tnm/errors.hpp"
#include "tnm/exact.hpp"

using namespace tnm;

namespace {

const std::vector<double> kGolden = {0.88, 0.01, 0.84, 0.27, 0.01, 0.71, 0.75, 0.53,
                                     0.82, 0.78, 0.15, 0.25, 0.29, 0.50, 0.26, 0.95};

BlockBatch golden_batch() {
  BlockBatch batch;
  batch.b = 1;
  batch.m = 4;
  batch.src_rows = 4;
  batch.src_cols = 4;
  batch.magnitudes = kGolden;
  batch.origins = {{0, 0}};
  return batch;
}

double batch_objective(const BlockBatch& batch, const BinaryMaskBatch& mask) {
  double acc = 0.0;
  for (std::int64_t bi = 0; bi < batch.b; ++bi) {
    auto w = batch.block(bi);
    auto s = mask.block(bi);
    for (std::size_t k = 0; k < w.size(); ++k) acc += s[k] ? w[k] : 0.0;
  }
  return acc;
}

}  // namespace

TEST_CASE("two-approximation solves the golden block to 6.05") {
  BlockBatch batch = golden_batch();
  BinaryMaskBatch mask = two_approximation(batch, SparsityPattern(2, 4));
  CHECK(check_feasible(mask, SparsityPattern(2, 4)).feasible);
  CHECK(batch_objective(batch, mask) == doctest::Approx(6.05));
}

TEST_CASE("two-approximation is feasible and within 2x of optimal") {
  for (auto [n, m] : std::vector<std::pair<int, int>>{{1, 2}, {2, 4}, {3, 8}, {4, 8}}) {
    SparsityPattern p(n, m);
    BlockBatch batch = sample_blocks(50, m, Distribution::kGaussian, 300 + m + n);
    BinaryMaskBatch mask = two_approximation(batch, p);
    const FeasibilityReport report = check_feasible(mask, p);
    CHECK(report.feasible);
    ExactBatchResult opt = exact_solve_batch(batch, p, 4);
    for (std::int64_t bi = 0; bi < batch.b; ++bi) {
      auto w = batch.block(bi);
      auto s = mask.block(bi);
      double got = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) got += s[k] ? w[k] : 0.0;
      // the guarantee is on |W| mass: keep at least half the optimum
      CHECK(got >= 0.5 * opt.objectives[bi] - 1e-9);
      CHECK(got <= opt.objectives[bi] + 1e-9);
    }
  }
}

TEST_CASE("row-wise top-n mask keeps the n largest entries per group") {
  DenseMatrix scores(2, 4, {0.9, 0.1, 0.5, 0.4, 0.2, 0.8, 0.3, 0.7});
  DenseMatrix mask = rowwise_topn_mask(scores, SparsityPattern(2, 4));
  const std::vector<double> expected = {1, 0, 1, 0, 0, 1, 0, 1};
  CHECK(mask.values == expected);
}

TEST_CASE("column-wise top-n mask works on the transpose orientation") {
  DenseMatrix scores(4, 2, {0.9, 0.2, 0.1, 0.8, 0.5, 0.3, 0.4, 0.7});
  DenseMatrix mask = colwise_topn_mask(scores, SparsityPattern(2, 4));
  const std::vector<double> expected = {1, 0, 0, 1, 1, 0, 0, 1};
  CHECK(mask.values == expected);
}

TEST_CASE("top-n masks reject indivisible shapes") {
  DenseMatrix bad = DenseMatrix::zeros(2, 6);
  CHECK_THROWS_AS(rowwise_topn_mask(bad, SparsityPattern(2, 4)), DimensionError);
  DenseMatrix badc = DenseMatrix::zeros(6, 2);
  CHECK_THROWS_AS(colwise_topn_mask(badc, SparsityPattern(2, 4)), DimensionError);
}

TEST_CASE("bi-directional pass yields at most n entries per row and column group") {
  DenseMatrix w(4, 4, kGolden);
  DenseMatrix mask = bi_nm(w, SparsityPattern(2, 4));
  for (int i = 0; i < 4; ++i) {
    double rs = 0, cs = 0;
    for (int j = 0; j < 4; ++j) {
      rs += mask.values[i * 4 + j];
      cs += mask.values[j * 4 + i];
    }
    CHECK(rs <= 2.0);
    CHECK(cs <= 2.0);
  }
  // the second pass can only remove entries chosen by the first
  DenseMatrix first = rowwise_topn_mask(w, SparsityPattern(2, 4));
  for (std::size_t k = 0; k < mask.values.size(); ++k) {
    if (mask.values[k] == 1.0) CHECK(first.values[k] == 1.0);
  }
}

TEST_CASE("bi-directional pass on the golden block keeps 5.73 of mass") {
  DenseMatrix w(4, 4, kGolden);
  DenseMatrix mask = bi_nm(w, SparsityPattern(2, 4));
  double kept = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < mask.values.size(); ++k) {
    if (mask.values[k] == 1.0) {
      kept += kGolden[k];
      ++count;
    }
  }
  CHECK(kept == doctest::Approx(5.73));
  CHECK(count == 7);  // drops one cell instead of swapping, hence the gap
}

TEST_CASE("random best-of-k is deterministic in the seed") {
  BlockBatch batch = sample_blocks(1, 8, Distribution::kGaussian, 3);
  SparsityPattern p(3, 8);
  std::vector<std::uint8_t> a = random_best(batch.block(0), 8, p, 64, 123);
  std::vector<std::uint8_t> b = random_best(batch.block(0), 8, p, 64, 123);
  CHECK(a == b);
  std::vector<std::uint8_t> c = random_best(batch.block(0), 8, p, 64, 124);
  // different seed may coincide but usually differs; only assert validity
  int ones = 0;
  for (auto v : c) ones += v;
  CHECK(ones == 3 * 8);
}

TEST_CASE("random best-of-k improves monotonically with k") {
  BlockBatch batch = sample_blocks(4, 8, Distribution::kGaussian, 7);
  SparsityPattern p(4, 8);
  for (std::int64_t bi = 0; bi < batch.b; ++bi) {
    auto w = batch.block(bi);
    double prev = -1.0;
    for (std::uint64_t k : {1, 4, 16, 64, 256}) {
      std::vector<std::uint8_t> mask = random_best(w, 8, p, k, 5);
      double value = 0.0;
      for (std::size_t idx = 0; idx < mask.size(); ++idx) value += mask[idx] ? w[idx] : 0.0;
      CHECK(value >= prev - 1e-12);  // nested prefix of the same sample stream
      prev = value;
    }
  }
}

TEST_CASE("random masks are feasible and k must be positive") {
  BlockBatch batch = sample_blocks(1, 4, Distribution::kUniform, 9);
  SparsityPattern p(2, 4);
  std::vector<std::uint8_t> mask = random_best(batch.block(0), 4, p, 10, 0);
  for (int i = 0; i < 4; ++i) {
    int rs = 0, cs = 0;
    for (int j = 0; j < 4; ++j) {
      rs += mask[i * 4 + j];
      cs += mask[j * 4 + i];
    }
    CHECK(rs == 2);
    CHECK(cs == 2);
  }
  CHECK_THROWS_AS(random_best(batch.block(0), 4, p, 0, 0), PreconditionError);
}

TEST_CASE("batched random best matches the per-block call") {
  BlockBatch batch = sample_blocks(6, 4, Distribution::kGaussian, 31);
  SparsityPattern p(2, 4);
  BinaryMaskBatch all = random_best_batch(batch, p, 32, 1000, 4);
  CHECK(check_feasible(all, p).feasible);
  BinaryMaskBatch again = random_best_batch(batch, p, 32, 1000, 1);
  CHECK(all.bits == again.bits);  // thread count must not change the outcome
}

TEST_CASE("random best approaches the optimum as k grows") {
  BlockBatch batch = sample_blocks(1, 4, Distribution::kGaussian, 71);
  SparsityPattern p(2, 4);
  ExactResult opt = exact_solve(batch.block(0), 4, p);
  std::vector<std::uint8_t> mask = random_best(batch.block(0), 4, p, 4096, 2);
  double value = 0.0;
  auto w = batch.block(0);
  for (std::size_t idx = 0; idx < mask.size(); ++idx) value += mask[idx] ? w[idx] : 0.0;
  // with 90 feasible masks at 2:4, four thousand draws all but guarantee the optimum
  CHECK(value == doctest::Approx(opt.objective));
}
