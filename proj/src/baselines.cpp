#include "tnm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tnm/errors.hpp"
#include "tnm/parallel.hpp"
#include "tnm/rng.hpp"
#include "tnm/rounding.hpp"

namespace tnm {
namespace {

constexpr int kRandomRestarts = 200;

// Top-n inside one strided group; ties by ascending position.
void mark_topn_group(const double* base, std::int64_t stride, int m, int n, double* out_base) {
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double va = std::fabs(base[a * stride]);
    const double vb = std::fabs(base[b * stride]);
    if (va != vb) return va > vb;
    return a < b;
  });
  for (int k = 0; k < n; ++k) out_base[order[k] * stride] = 1.0;
}

// One attempt at a uniform feasible fill; returns false on a dead end.
bool try_random_fill(std::int64_t m, int n, Rng& rng, std::vector<int>& demand,
                     std::vector<std::uint8_t>& mask, std::vector<int>& eligible) {
  std::fill(demand.begin(), demand.end(), n);
  std::fill(mask.begin(), mask.end(), 0);
  for (std::int64_t i = 0; i < m; ++i) {
    eligible.clear();
    for (std::int64_t j = 0; j < m; ++j)
      if (demand[j] > 0) eligible.push_back(static_cast<int>(j));
    if (static_cast<int>(eligible.size()) < n) return false;
    // Partial Fisher-Yates: the first n entries become the chosen subset.
    for (int t = 0; t < n; ++t) {
      const std::size_t pick = t + static_cast<std::size_t>(rng.below(eligible.size() - t));
      std::swap(eligible[t], eligible[pick]);
      const int j = eligible[t];
      mask[i * m + j] = 1;
      --demand[j];
    }
  }
  return true;
}

// Fill that takes forced columns (demand == rows left) first and samples the
// rest uniformly; never dead-ends.
void forced_random_fill(std::int64_t m, int n, Rng& rng, std::vector<int>& demand,
                        std::vector<std::uint8_t>& mask, std::vector<int>& eligible) {
  std::fill(demand.begin(), demand.end(), n);
  std::fill(mask.begin(), mask.end(), 0);
  for (std::int64_t i = 0; i < m; ++i) {
    const int rows_left = static_cast<int>(m - i);
    int taken = 0;
    eligible.clear();
    for (std::int64_t j = 0; j < m; ++j) {
      if (demand[j] == rows_left) {
        mask[i * m + j] = 1;
        --demand[j];
        ++taken;
      } else if (demand[j] > 0) {
        eligible.push_back(static_cast<int>(j));
      }
    }
    for (; taken < n; ++taken) {
      const std::size_t pick = static_cast<std::size_t>(rng.below(eligible.size()));
      const int j = eligible[pick];
      mask[i * m + j] = 1;
      --demand[j];
      eligible[pick] = eligible.back();
      eligible.pop_back();
    }
  }
}

}  // namespace

BinaryMaskBatch two_approximation(const BlockBatch& batch, const SparsityPattern& pattern,
                                  int threads) {
  GreedyResult greedy =
      greedy_round(batch.magnitudes, batch.b, batch.m, pattern, threads);
  CompletionResult completed = complete_mask(batch, std::move(greedy.mask), pattern, threads);
  return std::move(completed.mask);
}

DenseMatrix rowwise_topn_mask(const DenseMatrix& scores, const SparsityPattern& pattern) {
  if (scores.cols % pattern.m != 0)
    throw DimensionError("rowwise mask: cols not divisible by m");
  DenseMatrix out = DenseMatrix::zeros(scores.rows, scores.cols);
  for (std::int64_t i = 0; i < scores.rows; ++i)
    for (std::int64_t g = 0; g < scores.cols / pattern.m; ++g) {
      const std::int64_t off = i * scores.cols + g * pattern.m;
      mark_topn_group(scores.values.data() + off, 1, pattern.m, pattern.n, out.values.data() + off);
    }
  return out;
}

DenseMatrix colwise_topn_mask(const DenseMatrix& scores, const SparsityPattern& pattern) {
  if (scores.rows % pattern.m != 0)
    throw DimensionError("colwise mask: rows not divisible by m");
  DenseMatrix out = DenseMatrix::zeros(scores.rows, scores.cols);
  for (std::int64_t j = 0; j < scores.cols; ++j)
    for (std::int64_t g = 0; g < scores.rows / pattern.m; ++g) {
      const std::int64_t off = (g * pattern.m) * scores.cols + j;
      mark_topn_group(scores.values.data() + off, scores.cols, pattern.m, pattern.n,
                      out.values.data() + off);
    }
  return out;
}

DenseMatrix bi_nm(const DenseMatrix& matrix, const SparsityPattern& pattern) {
  if (matrix.rows % pattern.m != 0 || matrix.cols % pattern.m != 0)
    throw DimensionError("bi-nm: matrix dims not divisible by m");
  const DenseMatrix s1 = rowwise_topn_mask(matrix, pattern);
  DenseMatrix masked = matrix;
  for (std::size_t k = 0; k < masked.values.size(); ++k) masked.values[k] *= s1.values[k];
  const DenseMatrix s2 = colwise_topn_mask(masked, pattern);
  DenseMatrix out = DenseMatrix::zeros(matrix.rows, matrix.cols);
  for (std::size_t k = 0; k < out.values.size(); ++k)
    out.values[k] = s1.values[k] * s2.values[k];
  return out;
}

std::vector<std::uint8_t> random_best(std::span<const double> block, std::int64_t m,
                                      const SparsityPattern& pattern, int k, std::uint64_t seed) {
  if (m != pattern.m) throw ShapeError("random: tile size != pattern m");
  if (block.size() != static_cast<std::size_t>(m) * m)
    throw ShapeError("random: block size does not match m*m");
  if (k < 1) throw PreconditionError("random: k must be >= 1");

  Rng rng(seed);
  std::vector<int> demand(static_cast<std::size_t>(m));
  std::vector<int> eligible;
  std::vector<std::uint8_t> sample(static_cast<std::size_t>(m) * m);
  std::vector<std::uint8_t> best_mask;
  double best = -1.0;
  for (int s = 0; s < k; ++s) {
    bool ok = false;
    for (int attempt = 0; attempt < kRandomRestarts && !ok; ++attempt)
      ok = try_random_fill(m, pattern.n, rng, demand, sample, eligible);
    if (!ok) forced_random_fill(m, pattern.n, rng, demand, sample, eligible);
    double value = 0.0;
    for (std::int64_t c = 0; c < m * m; ++c)
      if (sample[c]) value += std::fabs(block[c]);
    if (value > best) {
      best = value;
      best_mask = sample;
    }
  }
  return best_mask;
}

BinaryMaskBatch random_best_batch(const BlockBatch& batch, const SparsityPattern& pattern, int k,
                                  std::uint64_t seed, int threads) {
  BinaryMaskBatch out = BinaryMaskBatch::zeros(batch.b, batch.m);
  parallel_for(batch.b, threads, [&](std::int64_t bi) {
    const auto mask = random_best(batch.block(bi), batch.m, pattern, k,
                                  mix_seed(seed, static_cast<std::uint64_t>(bi)));
    std::copy(mask.begin(), mask.end(), out.bits.begin() + bi * batch.m * batch.m);
  });
  return out;
}

}  // namespace tnm
