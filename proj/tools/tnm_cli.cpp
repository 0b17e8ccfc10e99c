#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tnm/baselines.hpp"
#include "tnm/bench.hpp"
#include "tnm/core.hpp"
#include "tnm/errors.hpp"
#include "tnm/exact.hpp"
#include "tnm/io.hpp"
#include "tnm/layerwise.hpp"
#include "tnm/parallel.hpp"
#include "tnm/rounding.hpp"

namespace {

using tnm::SparsityPattern;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerify = 3;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void emit(const nlohmann::ordered_json& doc) { std::cout << doc.dump() << "\n"; }

struct SolveArgs {
  std::string input;
  std::string pattern;
  std::string solver = "tsenor";
  std::string output;
  double tau_scale = 20.0;
  bool tau_absolute = false;
  int iters = 300;
  int ls_steps = 10;
  int k = 1000;
  std::uint64_t seed = 0;
  int threads = 0;
  bool verbose = false;
};

int cmd_solve(const SolveArgs& args) {
  const SparsityPattern pattern = SparsityPattern::parse(args.pattern);
  const int threads = tnm::resolve_threads(args.threads);
  const tnm::DenseMatrix w = tnm::read_matrix_auto(args.input);

  tnm::DykstraConfig dcfg;
  dcfg.tau_scale = args.tau_scale;
  dcfg.tau_absolute = args.tau_absolute;
  dcfg.max_iters = args.iters;
  tnm::RoundingConfig rcfg;
  rcfg.local_search_steps = args.ls_steps;

  const auto start = Clock::now();
  tnm::DenseMatrix mask;
  double objective = 0.0;
  std::int64_t swaps = 0, completions = 0;
  if (args.solver == "binm") {
    mask = tnm::bi_nm(w, pattern);
    for (std::size_t c = 0; c < mask.values.size(); ++c)
      if (mask.values[c] != 0.0) objective += std::fabs(w.values[c]);
  } else {
    const tnm::BlockBatch batch = tnm::partition_blocks(w, pattern);
    tnm::BinaryMaskBatch bits;
    if (args.solver == "tsenor") {
      tnm::MaskSolveResult r = tnm::solve_mask(w, pattern, dcfg, rcfg, threads);
      objective = r.report.objective;
      swaps = r.swaps_applied;
      completions = r.completion_ops;
      bits = std::move(r.mask);
    } else if (args.solver == "exact") {
      tnm::ExactBatchResult r = tnm::exact_solve_batch(batch, pattern, threads);
      bits = std::move(r.mask);
      objective = tnm::mask_objective(batch, bits).objective;
    } else if (args.solver == "greedy2") {
      bits = tnm::two_approximation(batch, pattern, threads);
      objective = tnm::mask_objective(batch, bits).objective;
    } else if (args.solver == "random") {
      bits = tnm::random_best_batch(batch, pattern, args.k, args.seed, threads);
      objective = tnm::mask_objective(batch, bits).objective;
    } else {
      throw tnm::ParseError("unknown solver \"" + args.solver + "\"");
    }
    mask = tnm::assemble_mask(bits, batch.origins, w.rows, w.cols);
  }
  const double wall = ms_since(start);
  tnm::write_mask_tnm(args.output, mask);

  nlohmann::ordered_json doc;
  doc["command"] = "solve";
  doc["solver"] = args.solver;
  doc["pattern"] = pattern.str();
  doc["rows"] = w.rows;
  doc["cols"] = w.cols;
  doc["objective"] = objective;
  doc["swaps"] = swaps;
  doc["completions"] = completions;
  doc["output"] = args.output;
  doc["wall_ms"] = wall;
  emit(doc);
  if (args.verbose)
    std::fprintf(stderr, "%-10s %-6s %6lldx%-6lld objective %.6f  swaps %lld  completions %lld\n",
                 args.solver.c_str(), pattern.str().c_str(), static_cast<long long>(w.rows),
                 static_cast<long long>(w.cols), objective, static_cast<long long>(swaps),
                 static_cast<long long>(completions));
  return kExitOk;
}

struct BenchArgs {
  std::int64_t blocks = 100;
  int m = 0;
  int n = 0;
  std::string dist = "gaussian";
  std::string solvers = "tsenor,exact,greedy2,binm,random";
  std::uint64_t seed = 0;
  int k = 1000;
  double tau_scale = 20.0;
  int iters = 300;
  int ls_steps = 10;
  std::string report;
  bool timings = false;
  int threads = 0;
  bool verbose = false;
};

int cmd_bench(const BenchArgs& args) {
  tnm::BenchOptions options;
  try {
    options.pattern = SparsityPattern(args.n, args.m);
  } catch (const tnm::DimensionError& e) {
    throw tnm::ParseError(e.what());
  }
  options.blocks = args.blocks;
  options.dist = tnm::parse_distribution(args.dist);
  options.seed = args.seed;
  options.random_k = args.k;
  options.dykstra.tau_scale = args.tau_scale;
  options.dykstra.max_iters = args.iters;
  options.rounding.local_search_steps = args.ls_steps;
  options.threads = tnm::resolve_threads(args.threads);
  options.timings = args.timings;
  std::size_t start = 0;
  while (start <= args.solvers.size()) {
    std::size_t end = args.solvers.find(',', start);
    if (end == std::string::npos) end = args.solvers.size();
    if (end > start) options.solvers.push_back(tnm::parse_solver(args.solvers.substr(start, end - start)));
    start = end + 1;
  }
  if (options.solvers.empty()) throw tnm::ParseError("bench: --solvers list is empty");

  const tnm::BenchReport report = tnm::run_bench(options);
  const std::string json = tnm::bench_report_json(report);
  if (!args.report.empty()) {
    std::ofstream out(args.report, std::ios::binary | std::ios::trunc);
    if (!out) throw tnm::IoError(args.report + ": cannot open for writing");
    out << json;
    if (!out) throw tnm::IoError(args.report + ": write failed");
  } else {
    std::cout << json;
  }

  nlohmann::ordered_json doc;
  doc["command"] = "bench";
  doc["pattern"] = report.pattern;
  doc["blocks"] = report.blocks;
  doc["distribution"] = report.distribution;
  doc["seed"] = report.seed;
  if (!args.report.empty()) {
    doc["report"] = args.report;
    emit(doc);
  }
  if (args.verbose) {
    std::fprintf(stderr, "%-8s %12s %12s %12s %10s\n", "solver", "mean_relerr", "max_relerr",
                 "mean_obj", "ms");
    for (const tnm::SolverRecord& rec : report.records)
      std::fprintf(stderr, "%-8s %12.6f %12.6f %12.6f %10.2f\n", rec.solver.c_str(),
                   rec.mean_rel_err, rec.max_rel_err, rec.mean_objective, rec.wall_ms);
  }
  return kExitOk;
}

struct PruneArgs {
  std::string weights;
  std::string gram;
  std::string activations;
  double lambda = 0.0;
  std::string pattern;
  std::string method = "admm";
  double rho0 = -1.0;
  double growth = 1.03;
  int iters = 300;
  double tol = 1e-4;
  double tau_scale = 20.0;
  int ls_steps = 10;
  std::string output;
  std::string trace_path;
  int threads = 0;
  bool verbose = false;
};

int cmd_prune(const PruneArgs& args) {
  const SparsityPattern pattern = SparsityPattern::parse(args.pattern);
  if (args.method != "admm" && args.method != "wanda" && args.method != "magnitude")
    throw tnm::ParseError("unknown method \"" + args.method + "\"");
  if (!args.gram.empty() && !args.activations.empty())
    throw tnm::ParseError("prune: pass --gram or --activations, not both");
  if (args.method != "magnitude" && args.gram.empty() && args.activations.empty())
    throw tnm::ParseError("prune: method \"" + args.method + "\" needs --gram or --activations");

  const int threads = tnm::resolve_threads(args.threads);
  tnm::DenseMatrix w_hat = tnm::read_matrix_auto(args.weights);

  std::optional<tnm::LayerProblem> layer;
  if (!args.activations.empty()) {
    layer = tnm::LayerProblem::from_activations(std::move(w_hat), tnm::read_matrix_auto(args.activations), args.lambda);
  } else if (!args.gram.empty()) {
    layer = tnm::LayerProblem::create(std::move(w_hat), tnm::read_matrix_auto(args.gram), args.lambda);
  }
  const tnm::DenseMatrix& weights_ref = layer ? layer->w_hat : w_hat;

  tnm::DykstraConfig dcfg;
  dcfg.tau_scale = args.tau_scale;
  tnm::RoundingConfig rcfg;
  rcfg.local_search_steps = args.ls_steps;

  const auto start = Clock::now();
  tnm::DenseMatrix pruned;
  nlohmann::ordered_json extra;
  if (args.method == "admm") {
    tnm::AdmmConfig cfg;
    cfg.rho0 = args.rho0;
    cfg.growth = args.growth;
    cfg.max_iters = args.iters;
    cfg.primal_tol = args.tol;
    cfg.dykstra = dcfg;
    cfg.rounding = rcfg;
    cfg.threads = threads;
    tnm::AdmmResult result = tnm::admm_prune(*layer, pattern, cfg);
    pruned = std::move(result.weights);
    extra["iters"] = result.trace.iters.size();
    extra["converged"] = result.trace.converged;
    extra["safeguards"] = result.trace.safeguard_count;
    if (!result.trace.iters.empty())
      extra["primal_residual"] = result.trace.iters.back().primal_residual;
    if (!args.trace_path.empty()) {
      nlohmann::ordered_json trace = nlohmann::ordered_json::array();
      for (const tnm::AdmmIterRecord& it : result.trace.iters) {
        nlohmann::ordered_json row;
        row["rho"] = it.rho;
        row["primal_residual"] = it.primal_residual;
        row["score_prev"] = it.score_prev;
        row["score_new"] = it.score_new;
        row["score_used"] = it.score_used;
        row["safeguard_triggered"] = it.safeguard_triggered;
        row["reconstruction_error"] = it.reconstruction_error;
        trace.push_back(std::move(row));
      }
      std::ofstream out(args.trace_path, std::ios::binary | std::ios::trunc);
      if (!out) throw tnm::IoError(args.trace_path + ": cannot open for writing");
      out << trace.dump(2) << "\n";
    }
  } else {
    tnm::DenseMatrix scores = weights_ref;
    if (args.method == "wanda") {
      const std::vector<double> norms = tnm::gram_col_norms(*layer);
      scores = tnm::wanda_transform(weights_ref, norms);
    }
    for (double& v : scores.values) v = std::fabs(v);
    const tnm::DenseMatrix mask =
        tnm::select_mask(scores, pattern, tnm::MaskKind::kTransposable, dcfg, rcfg, threads);
    pruned = tnm::apply_mask(weights_ref, mask);
  }
  const double wall = ms_since(start);
  tnm::write_matrix_tnm(args.output, pruned);

  nlohmann::ordered_json doc;
  doc["command"] = "prune";
  doc["method"] = args.method;
  doc["pattern"] = pattern.str();
  doc["rows"] = pruned.rows;
  doc["cols"] = pruned.cols;
  if (layer) doc["reconstruction_error"] = tnm::reconstruction_error(*layer, pruned);
  for (auto& [key, value] : extra.items()) doc[key] = value;
  doc["output"] = args.output;
  doc["wall_ms"] = wall;
  emit(doc);
  if (args.verbose && doc.contains("reconstruction_error"))
    std::fprintf(stderr, "%-9s %-6s reconstruction error %.6f\n", args.method.c_str(),
                 pattern.str().c_str(), doc["reconstruction_error"].get<double>());
  return kExitOk;
}

struct VerifyArgs {
  std::string mask;
  std::string pattern;
  bool transposable = false;
};

// Checks at most n nonzeros per group of m consecutive cells; float inputs
// are verified by their nonzero pattern.
int cmd_verify(const VerifyArgs& args) {
  const SparsityPattern pattern = SparsityPattern::parse(args.pattern);
  const tnm::TnmHeader header = tnm::peek_tnm_header(args.mask);
  const tnm::DenseMatrix mask = header.dtype == tnm::TnmDtype::kMask
                                    ? tnm::read_mask_tnm(args.mask)
                                    : tnm::read_matrix_tnm(args.mask);
  const int m = pattern.m;
  if (mask.cols % m != 0)
    throw tnm::DimensionError("verify: cols not divisible by m");
  if (args.transposable && mask.rows % m != 0)
    throw tnm::DimensionError("verify: rows not divisible by m");

  std::int64_t violations = 0;
  std::string first;
  for (std::int64_t i = 0; i < mask.rows; ++i)
    for (std::int64_t g = 0; g < mask.cols / m; ++g) {
      int count = 0;
      for (int t = 0; t < m; ++t) count += mask.at(i, g * m + t) != 0.0 ? 1 : 0;
      if (count > pattern.n) {
        ++violations;
        if (first.empty())
          first = "row " + std::to_string(i) + ", group " + std::to_string(g) + ": " +
                  std::to_string(count) + " nonzeros";
      }
    }
  if (args.transposable)
    for (std::int64_t j = 0; j < mask.cols; ++j)
      for (std::int64_t g = 0; g < mask.rows / m; ++g) {
        int count = 0;
        for (int t = 0; t < m; ++t) count += mask.at(g * m + t, j) != 0.0 ? 1 : 0;
        if (count > pattern.n) {
          ++violations;
          if (first.empty())
            first = "col " + std::to_string(j) + ", group " + std::to_string(g) + ": " +
                    std::to_string(count) + " nonzeros";
        }
      }

  nlohmann::ordered_json doc;
  doc["command"] = "verify";
  doc["pattern"] = pattern.str();
  doc["transposable"] = args.transposable;
  doc["rows"] = mask.rows;
  doc["cols"] = mask.cols;
  doc["ok"] = violations == 0;
  doc["violations"] = violations;
  emit(doc);
  if (violations > 0) {
    std::cerr << "verify: " << violations << " group(s) over budget; first: " << first << "\n";
    return kExitVerify;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transposable n:m sparse mask toolkit"};
  app.require_subcommand(1);

  SolveArgs solve;
  CLI::App* solve_cmd = app.add_subcommand("solve", "compute a mask for a weight matrix");
  solve_cmd->add_option("--input", solve.input, "weight matrix (.tnm or .csv)")->required();
  solve_cmd->add_option("--pattern", solve.pattern, "sparsity pattern N:M")->required();
  solve_cmd->add_option("--solver", solve.solver, "tsenor|exact|greedy2|binm|random");
  solve_cmd->add_option("--tau-scale", solve.tau_scale, "temperature scale (default 20)");
  solve_cmd->add_flag("--tau-absolute", solve.tau_absolute, "tau = 0.005 * max|W| instead");
  solve_cmd->add_option("--iters", solve.iters, "max projection sweeps (default 300)");
  solve_cmd->add_option("--ls-steps", solve.ls_steps, "local search swaps per tile (default 10)");
  solve_cmd->add_option("--k", solve.k, "samples for the random solver (default 1000)");
  solve_cmd->add_option("--seed", solve.seed, "seed for the random solver");
  solve_cmd->add_option("--threads", solve.threads, "worker threads (0 = auto / TNM_THREADS)");
  solve_cmd->add_option("--output", solve.output, "mask output path (TNM1 dtype 2)")->required();
  solve_cmd->add_flag("--verbose", solve.verbose, "human-readable table on stderr");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "compare solvers on random tiles");
  bench_cmd->add_option("--blocks", bench.blocks, "tile count (default 100)");
  bench_cmd->add_option("--m", bench.m, "tile size")->required();
  bench_cmd->add_option("--n", bench.n, "kept per group")->required();
  bench_cmd->add_option("--dist", bench.dist, "gaussian|uniform|laplace");
  bench_cmd->add_option("--solvers", bench.solvers, "comma list of solvers");
  bench_cmd->add_option("--seed", bench.seed, "sampling seed");
  bench_cmd->add_option("--k", bench.k, "samples for the random solver");
  bench_cmd->add_option("--tau-scale", bench.tau_scale, "temperature scale");
  bench_cmd->add_option("--iters", bench.iters, "max projection sweeps");
  bench_cmd->add_option("--ls-steps", bench.ls_steps, "local search swaps per tile");
  bench_cmd->add_option("--report", bench.report, "write the JSON report here instead of stdout");
  bench_cmd->add_flag("--timings", bench.timings, "include wall_ms (not byte-stable)");
  bench_cmd->add_option("--threads", bench.threads, "worker threads (0 = auto / TNM_THREADS)");
  bench_cmd->add_flag("--verbose", bench.verbose, "human-readable table on stderr");

  PruneArgs prune;
  CLI::App* prune_cmd = app.add_subcommand("prune", "prune a layer against calibration data");
  prune_cmd->add_option("--weights", prune.weights, "weight matrix (.tnm or .csv)")->required();
  prune_cmd->add_option("--gram", prune.gram, "Gramian X^T X + lambda*I (.tnm or .csv)");
  prune_cmd->add_option("--activations", prune.activations, "raw activations X (.tnm or .csv)");
  prune_cmd->add_option("--lambda", prune.lambda, "ridge inside the Gramian (default 0)");
  prune_cmd->add_option("--pattern", prune.pattern, "sparsity pattern N:M")->required();
  prune_cmd->add_option("--method", prune.method, "admm|wanda|magnitude");
  prune_cmd->add_option("--rho0", prune.rho0, "initial penalty (<=0 = 0.1*mean diag)");
  prune_cmd->add_option("--growth", prune.growth, "penalty growth per iteration (default 1.03)");
  prune_cmd->add_option("--iters", prune.iters, "max iterations (default 300)");
  prune_cmd->add_option("--tol", prune.tol, "relative primal residual target (default 1e-4)");
  prune_cmd->add_option("--tau-scale", prune.tau_scale, "temperature scale for mask solves");
  prune_cmd->add_option("--ls-steps", prune.ls_steps, "local search swaps per tile");
  prune_cmd->add_option("--output", prune.output, "pruned weights output path")->required();
  prune_cmd->add_option("--trace", prune.trace_path, "write per-iteration trace JSON here");
  prune_cmd->add_option("--threads", prune.threads, "worker threads (0 = auto / TNM_THREADS)");
  prune_cmd->add_flag("--verbose", prune.verbose, "human-readable summary on stderr");

  VerifyArgs verify;
  CLI::App* verify_cmd = app.add_subcommand("verify", "check a mask or weight file");
  verify_cmd->add_option("--mask", verify.mask, "mask or weight file (TNM1)")->required();
  verify_cmd->add_option("--pattern", verify.pattern, "sparsity pattern N:M")->required();
  verify_cmd->add_flag("--transposable", verify.transposable, "also check column groups");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(solve);
    if (bench_cmd->parsed()) return cmd_bench(bench);
    if (prune_cmd->parsed()) return cmd_prune(prune);
    if (verify_cmd->parsed()) return cmd_verify(verify);
  } catch (const tnm::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const tnm::DimensionError& e) {
    // Bad pattern/dimension pairings from flags are usage errors too when we
    // have not touched any file yet; by this point they are runtime errors.
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const tnm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
