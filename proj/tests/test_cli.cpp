#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "tnm/io.hpp"

// TNM_CLI_BIN is injected by the build with the absolute path of the binary.
#ifndef TNM_CLI_BIN
#error "TNM_CLI_BIN must point at the command line binary"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the binary through the shell, capturing stdout; stderr is discarded so
// the verbose/diagnostic channel cannot leak into the JSON assertions.
RunResult run_cli(const std::string& args) {
  RunResult result;
  const std::string cmd = std::string(TNM_CLI_BIN) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) result.out.append(buf.data(), got);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

void write_golden_csv(const std::string& path) {
  std::ofstream out(path);
  out << "0.88,0.01,0.84,0.27\n0.01,0.71,0.75,0.53\n"
      << "0.82,0.78,0.15,0.25\n0.29,0.50,0.26,0.95\n";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("help exits cleanly") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("solve --help").exit_code == 0);
}

TEST_CASE("solve emits one JSON line and reaches the optimum on the golden block") {
  write_golden_csv("cli_golden.csv");
  for (const std::string solver : {"tsenor", "exact", "greedy2"}) {
    RunResult r = run_cli("solve --input cli_golden.csv --pattern 2:4 --solver " + solver +
                          " --output cli_mask.tnm");
    CHECK(r.exit_code == 0);
    nlohmann::json doc = nlohmann::json::parse(r.out);
    CHECK(doc["command"] == "solve");
    CHECK(doc["solver"] == solver);
    CHECK(doc["pattern"] == "2:4");
    CHECK(doc["objective"].get<double>() == doctest::Approx(6.05));
    // output must be a readable mask file of the input shape
    tnm::DenseMatrix mask = tnm::read_mask_tnm("cli_mask.tnm");
    CHECK(mask.rows == 4);
    CHECK(mask.cols == 4);
  }
  std::remove("cli_golden.csv");
  std::remove("cli_mask.tnm");
}

TEST_CASE("usage errors exit with 2") {
  write_golden_csv("cli_golden.csv");
  CHECK(run_cli("solve --input cli_golden.csv --pattern 5:4 --output cli_mask.tnm").exit_code ==
        2);
  CHECK(run_cli("solve --input cli_golden.csv --pattern 2:4 --solver sorcery "
                "--output cli_mask.tnm")
            .exit_code == 2);
  CHECK(run_cli("solve --pattern 2:4 --output cli_mask.tnm").exit_code == 2);  // missing input
  CHECK(run_cli("frobnicate").exit_code == 2);
  std::remove("cli_golden.csv");
}

TEST_CASE("runtime errors exit with 1") {
  CHECK(run_cli("solve --input missing_file.csv --pattern 2:4 --output cli_mask.tnm").exit_code ==
        1);
  // truncated container: header promises cells the payload does not have
  {
    std::ofstream out("cli_trunc.tnm", std::ios::binary);
    const unsigned char header[24] = {'T', 'N', 'M', '1', 1, 0, 0, 0,
                                      4,   0,   0,   0,   0, 0, 0, 0,
                                      4,   0,   0,   0,   0, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(header), 24);
    out.put(0);
  }
  CHECK(run_cli("solve --input cli_trunc.tnm --pattern 2:4 --output cli_mask.tnm").exit_code == 1);
  std::remove("cli_trunc.tnm");
  // indivisible shape
  {
    std::ofstream out("cli_odd.csv");
    out << "1,2,3\n4,5,6\n7,8,9\n";
  }
  CHECK(run_cli("solve --input cli_odd.csv --pattern 2:4 --output cli_mask.tnm").exit_code == 1);
  std::remove("cli_odd.csv");
}

TEST_CASE("solve then verify round trips through the mask file") {
  write_golden_csv("cli_golden.csv");
  REQUIRE(run_cli("solve --input cli_golden.csv --pattern 2:4 --output cli_mask.tnm").exit_code ==
          0);
  RunResult ok = run_cli("verify --mask cli_mask.tnm --pattern 2:4 --transposable");
  CHECK(ok.exit_code == 0);
  nlohmann::json doc = nlohmann::json::parse(ok.out);
  CHECK(doc["ok"] == true);
  CHECK(doc["violations"] == 0);
  CHECK(doc["transposable"] == true);
  std::remove("cli_golden.csv");
  std::remove("cli_mask.tnm");
}

TEST_CASE("verify flags violations with exit 3") {
  // all-ones 4x4 mask: every row group holds 4 > 2 entries
  tnm::DenseMatrix bad(4, 4, std::vector<double>(16, 1.0));
  tnm::write_mask_tnm("cli_bad.tnm", bad);
  RunResult r = run_cli("verify --mask cli_bad.tnm --pattern 2:4");
  CHECK(r.exit_code == 3);
  nlohmann::json doc = nlohmann::json::parse(r.out);
  CHECK(doc["ok"] == false);
  CHECK(doc["violations"].get<int>() > 0);

  // row-feasible but column-infeasible: columns 0,1 carry 4 entries each
  tnm::DenseMatrix cols(4, 4, {1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0});
  tnm::write_mask_tnm("cli_cols.tnm", cols);
  CHECK(run_cli("verify --mask cli_cols.tnm --pattern 2:4").exit_code == 0);
  CHECK(run_cli("verify --mask cli_cols.tnm --pattern 2:4 --transposable").exit_code == 3);

  // float weights are verified through their nonzero pattern
  tnm::DenseMatrix weights(4, 4, {0.5, -0.2, 0, 0, 0.1, 0.9, 0, 0,
                                  0, 0, 0.3, 0.4, 0, 0, -0.8, 0.6});
  tnm::write_matrix_tnm("cli_w.tnm", weights);
  CHECK(run_cli("verify --mask cli_w.tnm --pattern 2:4 --transposable").exit_code == 0);

  std::remove("cli_bad.tnm");
  std::remove("cli_cols.tnm");
  std::remove("cli_w.tnm");
}

TEST_CASE("bench reports are byte-identical across reruns and thread counts") {
  const std::string base =
      "bench --blocks 16 --m 8 --n 3 --seed 4 --solvers tsenor,greedy2,random --k 32";
  REQUIRE(run_cli(base + " --report cli_rep_a.json").exit_code == 0);
  REQUIRE(run_cli(base + " --report cli_rep_b.json").exit_code == 0);
  REQUIRE(run_cli(base + " --report cli_rep_c.json --threads 4").exit_code == 0);
  REQUIRE(run_cli(base + " --report cli_rep_d.json --threads 8").exit_code == 0);
  const std::string a = slurp("cli_rep_a.json");
  CHECK(a == slurp("cli_rep_b.json"));
  CHECK(a == slurp("cli_rep_c.json"));
  CHECK(a == slurp("cli_rep_d.json"));
  nlohmann::json doc = nlohmann::json::parse(a);
  CHECK(doc["solvers"].size() == 3);
  for (const std::string f : {"cli_rep_a.json", "cli_rep_b.json", "cli_rep_c.json",
                              "cli_rep_d.json"})
    std::remove(f.c_str());
}

TEST_CASE("bench without a report path prints the JSON to stdout") {
  RunResult r = run_cli("bench --blocks 4 --m 4 --n 2 --solvers exact,greedy2");
  CHECK(r.exit_code == 0);
  nlohmann::json doc = nlohmann::json::parse(r.out);
  CHECK(doc["pattern"] == "2:4");
  CHECK(doc["blocks"] == 4);
}

TEST_CASE("prune methods produce verifiable transposable weights") {
  // small deterministic layer: weights 8x8 via CSV, activations 32x8
  {
    std::ofstream w("cli_weights.csv");
    std::srand(99);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j)
        w << (j ? "," : "") << ((std::rand() % 2000) - 1000) / 500.0;
      w << "\n";
    }
    std::ofstream x("cli_acts.csv");
    for (int s = 0; s < 32; ++s) {
      for (int j = 0; j < 8; ++j)
        x << (j ? "," : "") << ((std::rand() % 2000) - 1000) / 500.0;
      x << "\n";
    }
  }
  for (const std::string method : {"magnitude", "wanda", "admm"}) {
    RunResult r = run_cli("prune --weights cli_weights.csv --activations cli_acts.csv "
                          "--lambda 0.1 --pattern 2:4 --method " +
                          method + " --output cli_pruned.tnm");
    CHECK(r.exit_code == 0);
    nlohmann::json doc = nlohmann::json::parse(r.out);
    CHECK(doc["command"] == "prune");
    CHECK(doc["method"] == method);
    CHECK(doc.contains("reconstruction_error"));
    CHECK(doc["reconstruction_error"].get<double>() >= 0.0);
    CHECK(run_cli("verify --mask cli_pruned.tnm --pattern 2:4 --transposable").exit_code == 0);
  }

  // magnitude works without calibration data
  CHECK(run_cli("prune --weights cli_weights.csv --pattern 2:4 --method magnitude "
                "--output cli_pruned.tnm")
            .exit_code == 0);
  // admm does not: it needs --gram or --activations
  CHECK(run_cli("prune --weights cli_weights.csv --pattern 2:4 --method admm "
                "--output cli_pruned.tnm")
            .exit_code == 2);
  // giving both is contradictory
  CHECK(run_cli("prune --weights cli_weights.csv --gram g.tnm --activations cli_acts.csv "
                "--pattern 2:4 --method admm --output cli_pruned.tnm")
            .exit_code == 2);

  // the trace file is a JSON array with one record per iteration
  REQUIRE(run_cli("prune --weights cli_weights.csv --activations cli_acts.csv --lambda 0.1 "
                  "--pattern 2:4 --method admm --trace cli_trace.json --output cli_pruned.tnm")
              .exit_code == 0);
  nlohmann::json trace = nlohmann::json::parse(slurp("cli_trace.json"));
  REQUIRE(trace.is_array());
  CHECK(trace.size() > 0);
  CHECK(trace[0].contains("primal_residual"));
  CHECK(trace[0].contains("rho"));

  std::remove("cli_weights.csv");
  std::remove("cli_acts.csv");
  std::remove("cli_pruned.tnm");
  std::remove("cli_trace.json");
}
