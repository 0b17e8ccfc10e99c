#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tnm/core.hpp"
#include "tnm/dykstra.hpp"
#include "tnm/rounding.hpp"

namespace tnm {

enum class Distribution { kGaussian, kUniform, kLaplace };

Distribution parse_distribution(const std::string& name);
std::string distribution_name(Distribution dist);

// b random m x m magnitude tiles. Tile bi draws from its own stream seeded by
// mix_seed(seed, bi), so results do not depend on iteration order or worker
// count.
BlockBatch sample_blocks(std::int64_t count, std::int64_t m, Distribution dist,
                         std::uint64_t seed);

enum class SolverId { kTsenor, kExact, kGreedy2, kBiNm, kRandomBest };

SolverId parse_solver(const std::string& name);
std::string solver_name(SolverId id);

struct BenchOptions {
  std::int64_t blocks = 100;
  SparsityPattern pattern{2, 4};
  Distribution dist = Distribution::kGaussian;
  std::vector<SolverId> solvers;
  std::uint64_t seed = 0;
  int random_k = 1000;
  DykstraConfig dykstra;
  RoundingConfig rounding;
  int threads = 1;
  bool timings = false;  // include wall_ms in the JSON (breaks byte stability)
};

struct SolverRecord {
  std::string solver;
  double mean_rel_err = 0.0;
  double max_rel_err = 0.0;
  double mean_objective = 0.0;
  double wall_ms = 0.0;  // solver only; sampling and the oracle are excluded
};

struct BenchReport {
  std::string pattern;
  std::int64_t blocks = 0;
  std::string distribution;
  std::uint64_t seed = 0;
  bool timings = false;
  std::vector<SolverRecord> records;
};

// Runs every requested solver on one shared batch and scores against the
// exact oracle. Identical inputs and seeds give identical records; wall_ms is
// the only nondeterministic field and is only serialized under `timings`.
BenchReport run_bench(const BenchOptions& options);

// Stable serialization: fixed key order, shortest round-trip floats.
std::string bench_report_json(const BenchReport& report);

// Rounding ablation variants. "simple" is row-then-column top-n on the
// fractional plan; the entropy variants rank by the fractional plan while
// "direct" ranks by |W|. Greedy variants are completed to exact sums; simple
// is left under-filled just like the bi-nm baseline.
enum class SweepVariant {
  kEntropySimple,
  kEntropyGreedy,
  kEntropyGreedyLs,
  kDirectGreedy,
  kDirectGreedyLs,
};

std::string variant_name(SweepVariant variant);

struct SweepSpec {
  std::vector<SparsityPattern> patterns;  // defaults to the standard eight
  std::int64_t block_count = 100;
  Distribution dist = Distribution::kGaussian;
  std::vector<SweepVariant> variants;     // defaults to all five
  std::uint64_t seed = 0;
  DykstraConfig dykstra;
  RoundingConfig rounding;
  int threads = 1;

  static std::vector<SparsityPattern> default_patterns();
  static std::vector<SweepVariant> default_variants();
};

struct SweepRow {
  std::string pattern;
  std::string variant;
  double mean_rel_err = 0.0;
  double max_rel_err = 0.0;
  double wall_ms = 0.0;
  std::vector<double> per_block_rel_err;  // in-memory only, not serialized
};

std::vector<SweepRow> run_sweep(const SweepSpec& spec);

// Aggregate table as JSON (stable order) and CSV.
std::string sweep_json(const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace tnm
