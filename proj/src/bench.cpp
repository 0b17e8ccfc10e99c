#include "tnm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <span>

#include "json.hpp"
#include "tnm/baselines.hpp"
#include "tnm/errors.hpp"
#include "tnm/exact.hpp"
#include "tnm/parallel.hpp"
#include "tnm/rng.hpp"

namespace tnm {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Simple rounding: per-tile row top-n, then column top-n on the row-masked
// values; under-filled lines are expected.
BinaryMaskBatch simple_round(std::span<const double> scores, std::int64_t b, std::int64_t m,
                             const SparsityPattern& pattern, int threads) {
  BinaryMaskBatch out = BinaryMaskBatch::zeros(b, m);
  parallel_for(b, threads, [&](std::int64_t bi) {
    std::vector<double> tile(scores.begin() + bi * m * m, scores.begin() + (bi + 1) * m * m);
    const DenseMatrix block(m, m, std::move(tile));
    const DenseMatrix s1 = rowwise_topn_mask(block, pattern);
    DenseMatrix masked = block;
    for (std::size_t k = 0; k < masked.values.size(); ++k) masked.values[k] *= s1.values[k];
    const DenseMatrix s2 = colwise_topn_mask(masked, pattern);
    std::uint8_t* bits = out.bits.data() + bi * m * m;
    for (std::int64_t k = 0; k < m * m; ++k)
      bits[k] = s1.values[k] != 0.0 && s2.values[k] != 0.0 ? 1 : 0;
  });
  return out;
}

BinaryMaskBatch run_variant(SweepVariant variant, const BlockBatch& batch,
                            const SparsityPattern& pattern, const FractionalMask& plan,
                            const DykstraConfig&, const RoundingConfig& rcfg, int threads) {
  const bool entropy = variant == SweepVariant::kEntropySimple ||
                       variant == SweepVariant::kEntropyGreedy ||
                       variant == SweepVariant::kEntropyGreedyLs;
  std::vector<double> ranking;
  if (entropy)
    ranking = plan.values();
  else
    ranking = batch.magnitudes;

  if (variant == SweepVariant::kEntropySimple)
    return simple_round(ranking, batch.b, batch.m, pattern, threads);

  GreedyResult greedy = greedy_round(ranking, batch.b, batch.m, pattern, threads);
  BinaryMaskBatch mask = std::move(greedy.mask);
  if (variant == SweepVariant::kEntropyGreedyLs || variant == SweepVariant::kDirectGreedyLs)
    mask = local_search(batch, std::move(mask), pattern, rcfg, threads).mask;
  return complete_mask(batch, std::move(mask), pattern, threads).mask;
}

}  // namespace

Distribution parse_distribution(const std::string& name) {
  if (name == "gaussian") return Distribution::kGaussian;
  if (name == "uniform") return Distribution::kUniform;
  if (name == "laplace") return Distribution::kLaplace;
  throw ParseError("unknown distribution \"" + name + "\"");
}

std::string distribution_name(Distribution dist) {
  switch (dist) {
    case Distribution::kGaussian: return "gaussian";
    case Distribution::kUniform: return "uniform";
    case Distribution::kLaplace: return "laplace";
  }
  return "?";
}

BlockBatch sample_blocks(std::int64_t count, std::int64_t m, Distribution dist,
                         std::uint64_t seed) {
  if (count < 1 || m < 2) throw PreconditionError("sample: need count >= 1 and m >= 2");
  BlockBatch out;
  out.b = count;
  out.m = m;
  out.src_rows = m;
  out.src_cols = m;  // tiles are synthetic; origins all (0,0) of their own matrix
  out.magnitudes.resize(static_cast<std::size_t>(count) * m * m);
  out.origins.assign(static_cast<std::size_t>(count), {0, 0});
  for (std::int64_t bi = 0; bi < count; ++bi) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(bi)));
    double* w = out.magnitudes.data() + bi * m * m;
    for (std::int64_t k = 0; k < m * m; ++k) {
      double v = 0.0;
      switch (dist) {
        case Distribution::kGaussian: v = rng.gaussian(); break;
        case Distribution::kUniform: v = rng.uniform(-1.0, 1.0); break;
        case Distribution::kLaplace: v = rng.laplace(); break;
      }
      w[k] = std::fabs(v);
    }
  }
  return out;
}

SolverId parse_solver(const std::string& name) {
  if (name == "tsenor") return SolverId::kTsenor;
  if (name == "exact") return SolverId::kExact;
  if (name == "greedy2") return SolverId::kGreedy2;
  if (name == "binm") return SolverId::kBiNm;
  if (name == "random") return SolverId::kRandomBest;
  throw ParseError("unknown solver \"" + name + "\"");
}

std::string solver_name(SolverId id) {
  switch (id) {
    case SolverId::kTsenor: return "tsenor";
    case SolverId::kExact: return "exact";
    case SolverId::kGreedy2: return "greedy2";
    case SolverId::kBiNm: return "binm";
    case SolverId::kRandomBest: return "random";
  }
  return "?";
}

BenchReport run_bench(const BenchOptions& options) {
  if (options.solvers.empty()) throw PreconditionError("bench: no solvers requested");
  const BlockBatch batch =
      sample_blocks(options.blocks, options.pattern.m, options.dist, options.seed);
  const ExactBatchResult oracle = exact_solve_batch(batch, options.pattern, options.threads);

  BenchReport report;
  report.pattern = options.pattern.str();
  report.blocks = options.blocks;
  report.distribution = distribution_name(options.dist);
  report.seed = options.seed;
  report.timings = options.timings;

  for (SolverId id : options.solvers) {
    const auto start = Clock::now();
    std::vector<double> objectives(static_cast<std::size_t>(batch.b), 0.0);
    switch (id) {
      case SolverId::kTsenor: {
        const FractionalMask plan =
            dykstra_solve(batch, options.pattern, options.dykstra, options.threads);
        GreedyResult greedy =
            greedy_round(plan.values(), batch.b, batch.m, options.pattern, options.threads);
        LocalSearchResult ls = local_search(batch, std::move(greedy.mask), options.pattern,
                                            options.rounding, options.threads);
        CompletionResult done =
            complete_mask(batch, std::move(ls.mask), options.pattern, options.threads);
        objectives = mask_objective(batch, done.mask).per_block;
        break;
      }
      case SolverId::kExact:
        objectives = exact_solve_batch(batch, options.pattern, options.threads).objectives;
        break;
      case SolverId::kGreedy2: {
        const BinaryMaskBatch mask = two_approximation(batch, options.pattern, options.threads);
        objectives = mask_objective(batch, mask).per_block;
        break;
      }
      case SolverId::kBiNm: {
        parallel_for(batch.b, options.threads, [&](std::int64_t bi) {
          std::vector<double> tile(batch.magnitudes.begin() + bi * batch.m * batch.m,
                                   batch.magnitudes.begin() + (bi + 1) * batch.m * batch.m);
          const DenseMatrix block(batch.m, batch.m, std::move(tile));
          const DenseMatrix mask = bi_nm(block, options.pattern);
          double acc = 0.0;
          for (std::size_t k = 0; k < mask.values.size(); ++k)
            if (mask.values[k] != 0.0) acc += block.values[k];
          objectives[bi] = acc;
        });
        break;
      }
      case SolverId::kRandomBest: {
        const BinaryMaskBatch mask = random_best_batch(batch, options.pattern, options.random_k,
                                                       options.seed, options.threads);
        objectives = mask_objective(batch, mask).per_block;
        break;
      }
    }
    const double wall = ms_since(start);

    SolverRecord rec;
    rec.solver = solver_name(id);
    rec.wall_ms = wall;
    double err_sum = 0.0, obj_sum = 0.0;
    for (std::int64_t bi = 0; bi < batch.b; ++bi) {
      const double err = relative_error(objectives[bi], oracle.objectives[bi]);
      err_sum += err;
      obj_sum += objectives[bi];
      rec.max_rel_err = std::max(rec.max_rel_err, err);
    }
    rec.mean_rel_err = err_sum / static_cast<double>(batch.b);
    rec.mean_objective = obj_sum / static_cast<double>(batch.b);
    report.records.push_back(std::move(rec));
  }
  return report;
}

std::string bench_report_json(const BenchReport& report) {
  nlohmann::ordered_json doc;
  doc["pattern"] = report.pattern;
  doc["blocks"] = report.blocks;
  doc["distribution"] = report.distribution;
  doc["seed"] = report.seed;
  doc["solvers"] = nlohmann::ordered_json::array();
  for (const SolverRecord& rec : report.records) {
    nlohmann::ordered_json r;
    r["solver"] = rec.solver;
    r["mean_rel_err"] = rec.mean_rel_err;
    r["max_rel_err"] = rec.max_rel_err;
    r["mean_objective"] = rec.mean_objective;
    if (report.timings) r["wall_ms"] = rec.wall_ms;
    doc["solvers"].push_back(std::move(r));
  }
  return doc.dump(2) + "\n";
}

std::vector<SparsityPattern> SweepSpec::default_patterns() {
  return {{4, 8}, {3, 8}, {6, 16}, {8, 16}, {4, 16}, {12, 32}, {16, 32}, {8, 32}};
}

std::vector<SweepVariant> SweepSpec::default_variants() {
  return {SweepVariant::kEntropySimple, SweepVariant::kEntropyGreedy,
          SweepVariant::kEntropyGreedyLs, SweepVariant::kDirectGreedy,
          SweepVariant::kDirectGreedyLs};
}

std::string variant_name(SweepVariant variant) {
  switch (variant) {
    case SweepVariant::kEntropySimple: return "entropy+simple";
    case SweepVariant::kEntropyGreedy: return "entropy+greedy";
    case SweepVariant::kEntropyGreedyLs: return "entropy+greedy+ls";
    case SweepVariant::kDirectGreedy: return "direct+greedy";
    case SweepVariant::kDirectGreedyLs: return "direct+greedy+ls";
  }
  return "?";
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  const std::vector<SparsityPattern> patterns =
      spec.patterns.empty() ? SweepSpec::default_patterns() : spec.patterns;
  const std::vector<SweepVariant> variants =
      spec.variants.empty() ? SweepSpec::default_variants() : spec.variants;

  std::vector<SweepRow> rows;
  for (const SparsityPattern& pattern : patterns) {
    const BlockBatch batch = sample_blocks(spec.block_count, pattern.m, spec.dist, spec.seed);
    const ExactBatchResult oracle = exact_solve_batch(batch, pattern, spec.threads);
    // The fractional plan is shared by the entropy variants; solved once and
    // excluded from the per-variant stopwatch below (ranking reuse only).
    const FractionalMask plan = dykstra_solve(batch, pattern, spec.dykstra, spec.threads);

    for (SweepVariant variant : variants) {
      const auto start = Clock::now();
      const BinaryMaskBatch mask =
          run_variant(variant, batch, pattern, plan, spec.dykstra, spec.rounding, spec.threads);
      SweepRow row;
      row.wall_ms = ms_since(start);
      row.pattern = pattern.str();
      row.variant = variant_name(variant);
      const MaskObjectiveReport objective = mask_objective(batch, mask);
      row.per_block_rel_err.resize(static_cast<std::size_t>(batch.b));
      double err_sum = 0.0;
      for (std::int64_t bi = 0; bi < batch.b; ++bi) {
        const double err = relative_error(objective.per_block[bi], oracle.objectives[bi]);
        row.per_block_rel_err[bi] = err;
        err_sum += err;
        row.max_rel_err = std::max(row.max_rel_err, err);
      }
      row.mean_rel_err = err_sum / static_cast<double>(batch.b);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const SweepRow& row : rows) {
    nlohmann::ordered_json r;
    r["pattern"] = row.pattern;
    r["variant"] = row.variant;
    r["mean_rel_err"] = row.mean_rel_err;
    r["max_rel_err"] = row.max_rel_err;
    r["wall_ms"] = row.wall_ms;
    doc.push_back(std::move(r));
  }
  return doc.dump(2) + "\n";
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "pattern,variant,mean_rel_err,max_rel_err,wall_ms\n";
  char buf[160];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%.9g,%.3f\n", row.pattern.c_str(),
                  row.variant.c_str(), row.mean_rel_err, row.max_rel_err, row.wall_ms);
    out += buf;
  }
  return out;
}

}  // namespace tnm
