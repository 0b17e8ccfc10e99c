#include "tnm/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "tnm/errors.hpp"
#include "tnm/parallel.hpp"

namespace tnm {
namespace {

constexpr std::int64_t kExactSizeLimit = 512;
constexpr std::int64_t kBruteSizeLimit = 8;
constexpr double kCostScale = 1e9;
constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

// First feasible mask in row-major order: per row take every column whose
// remaining demand equals the number of rows left (those cannot be deferred),
// then the lowest-index columns with demand left. Induction on rows shows
// this never gets stuck.
std::vector<std::uint8_t> first_feasible_mask(std::int64_t m, int n) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(m) * m, 0);
  std::vector<int> demand(static_cast<std::size_t>(m), n);
  for (std::int64_t i = 0; i < m; ++i) {
    const int rows_left = static_cast<int>(m - i);
    std::int64_t taken = 0;
    for (std::int64_t j = 0; j < m && taken < n; ++j)
      if (demand[j] == rows_left) {
        mask[i * m + j] = 1;
        --demand[j];
        ++taken;
      }
    for (std::int64_t j = 0; j < m && taken < n; ++j)
      if (!mask[i * m + j] && demand[j] > 0 && demand[j] < rows_left) {
        mask[i * m + j] = 1;
        --demand[j];
        ++taken;
      }
  }
  return mask;
}

struct FlowEdge {
  int to;
  std::int64_t cap;
  std::int64_t cost;
};

// Min-cost flow, successive shortest paths with Johnson potentials. Nodes:
// 0 = source, 1..m = rows, m+1..2m = columns, 2m+1 = sink.
class MinCostFlow {
 public:
  explicit MinCostFlow(int nodes) : adj_(nodes) {}

  void add_edge(int from, int to, std::int64_t cap, std::int64_t cost) {
    adj_[from].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({to, cap, cost});
    adj_[to].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({from, 0, -cost});
  }

  const FlowEdge& edge(int id) const { return edges_[id]; }

  // Pushes `amount` units from s to t; potentials must already make every
  // residual reduced cost non-negative (true here after init_potentials).
  void solve(int s, int t, std::int64_t amount, std::vector<std::int64_t>& potential) {
    const int nodes = static_cast<int>(adj_.size());
    std::vector<std::int64_t> dist(nodes);
    std::vector<int> parent_edge(nodes);
    while (amount > 0) {
      std::fill(dist.begin(), dist.end(), kInf);
      std::fill(parent_edge.begin(), parent_edge.end(), -1);
      using Item = std::pair<std::int64_t, int>;
      std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
      dist[s] = 0;
      heap.push({0, s});
      while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (int id : adj_[u]) {
          const FlowEdge& e = edges_[id];
          if (e.cap <= 0) continue;
          const std::int64_t nd = d + e.cost + potential[u] - potential[e.to];
          if (nd < dist[e.to]) {
            dist[e.to] = nd;
            parent_edge[e.to] = id;
            heap.push({nd, e.to});
          }
        }
      }
      if (dist[t] >= kInf)
        throw InfeasibleInternalError("flow: sink unreachable before demand met");
      for (int v = 0; v < nodes; ++v)
        if (dist[v] < kInf) potential[v] += dist[v];
      std::int64_t push = amount;
      for (int v = t; v != s;) {
        const FlowEdge& e = edges_[parent_edge[v]];
        push = std::min(push, e.cap);
        v = edges_[parent_edge[v] ^ 1].to;
      }
      for (int v = t; v != s;) {
        const int id = parent_edge[v];
        edges_[id].cap -= push;
        edges_[id ^ 1].cap += push;
        v = edges_[id ^ 1].to;
      }
      amount -= push;
    }
  }

 private:
  std::vector<FlowEdge> edges_;
  std::vector<std::vector<int>> adj_;
};

struct BruteState {
  const double* w = nullptr;
  std::int64_t m = 0;
  int n = 0;
  bool prune_bound = false;
  std::vector<int> demand;                       // remaining per column
  std::vector<std::uint8_t> current;             // mask under construction
  std::vector<std::uint8_t> best_mask;
  double best = -1.0;
  std::uint64_t visited = 0;
  std::vector<double> suffix_bound;              // sum of per-row top-n below row r
  std::vector<std::vector<int>> row_order;       // columns by descending value
  std::vector<std::vector<double>> order_prefix; // prefix sums along row_order
};

void brute_row(BruteState& st, std::int64_t row, double value);

// Chooses the remaining cells of `row` from row_order positions >= pos.
void brute_cell(BruteState& st, std::int64_t row, std::size_t pos, int taken, double value) {
  const std::int64_t m = st.m;
  const int rows_left = static_cast<int>(m - row);  // including this row
  if (taken == st.n) {
    // Columns skipped so far must not be forced; check the untouched tail.
    for (std::size_t p = pos; p < st.row_order[row].size(); ++p)
      if (st.demand[st.row_order[row][p]] == rows_left) return;
    brute_row(st, row + 1, value);
    return;
  }
  if (pos >= st.row_order[row].size()) return;
  if (static_cast<int>(st.row_order[row].size() - pos) < st.n - taken) return;
  if (st.prune_bound) {
    // The order is descending, so the next (n - taken) positions bound what
    // this row can still contribute.
    const auto& prefix = st.order_prefix[row];
    const double row_rest = prefix[pos + (st.n - taken)] - prefix[pos];
    if (value + row_rest + st.suffix_bound[row + 1] <= st.best) return;
  }

  const int j = st.row_order[row][pos];
  const bool forced = st.demand[j] == rows_left;
  if (st.demand[j] > 0) {
    st.demand[j] -= 1;
    st.current[row * m + j] = 1;
    brute_cell(st, row, pos + 1, taken + 1, value + st.w[row * m + j]);
    st.current[row * m + j] = 0;
    st.demand[j] += 1;
  }
  if (!forced) brute_cell(st, row, pos + 1, taken, value);
}

void brute_row(BruteState& st, std::int64_t row, double value) {
  if (row == st.m) {
    ++st.visited;
    if (value > st.best) {
      st.best = value;
      st.best_mask = st.current;
    }
    return;
  }
  if (st.prune_bound && value + st.suffix_bound[row] <= st.best) return;
  brute_cell(st, row, 0, 0, value);
}

// Feasible warm start: per row take forced columns first, then the largest
// remaining by value. Same induction as first_feasible_mask.
std::pair<std::vector<std::uint8_t>, double> warm_start(const double* w, std::int64_t m, int n) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(m) * m, 0);
  std::vector<int> demand(static_cast<std::size_t>(m), n);
  double value = 0.0;
  std::vector<int> order(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    const int rows_left = static_cast<int>(m - i);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (w[i * m + a] != w[i * m + b]) return w[i * m + a] > w[i * m + b];
      return a < b;
    });
    int taken = 0;
    for (std::int64_t j = 0; j < m; ++j)
      if (demand[j] == rows_left) {
        mask[i * m + j] = 1;
        --demand[j];
        value += w[i * m + j];
        ++taken;
      }
    for (int j : order)
      if (taken < n && !mask[i * m + j] && demand[j] > 0) {
        mask[i * m + j] = 1;
        --demand[j];
        value += w[i * m + j];
        ++taken;
      }
  }
  return {std::move(mask), value};
}

}  // namespace

ExactResult exact_solve(std::span<const double> block, std::int64_t m,
                        const SparsityPattern& pattern) {
  if (m != pattern.m) throw ShapeError("exact: tile size != pattern m");
  if (m > kExactSizeLimit)
    throw SizeError("exact: m = " + std::to_string(m) + " exceeds the limit of " +
                    std::to_string(kExactSizeLimit));
  if (block.size() != static_cast<std::size_t>(m) * m)
    throw ShapeError("exact: block size does not match m*m");
  const int n = pattern.n;

  double max_abs = 0.0;
  for (double v : block) {
    if (!std::isfinite(v)) throw NumericalError("exact: non-finite magnitude");
    max_abs = std::max(max_abs, std::fabs(v));
  }

  ExactResult out;
  if (max_abs == 0.0) {
    out.mask = first_feasible_mask(m, n);
    out.objective = 0.0;
    return out;
  }
  // Dijkstra distances sum at most 2m+2 arcs; keep the total far from int64.
  if (max_abs * kCostScale > static_cast<double>(kInf) / (2.0 * static_cast<double>(m) + 2.0))
    throw ScaleError("exact: |W| too large for integer cost scaling");

  const int source = 0;
  const int sink = static_cast<int>(2 * m + 1);
  MinCostFlow flow(static_cast<int>(2 * m + 2));
  // Edge ids are deterministic: rows first, then the m*m grid, then columns.
  for (std::int64_t i = 0; i < m; ++i) flow.add_edge(source, static_cast<int>(1 + i), n, 0);
  const int grid_base = static_cast<int>(2 * m);  // ids 0..2m-1 are source arcs + reverses
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      const auto cost = -static_cast<std::int64_t>(std::llround(std::fabs(block[i * m + j]) * kCostScale));
      flow.add_edge(static_cast<int>(1 + i), static_cast<int>(1 + m + j), 1, cost);
    }
  for (std::int64_t j = 0; j < m; ++j) flow.add_edge(static_cast<int>(1 + m + j), sink, n, 0);

  // Exact shortest distances of the initial layered graph seed the potentials.
  std::vector<std::int64_t> potential(static_cast<std::size_t>(2 * m + 2), 0);
  std::int64_t sink_pot = 0;
  for (std::int64_t j = 0; j < m; ++j) {
    std::int64_t lo = 0;
    for (std::int64_t i = 0; i < m; ++i) {
      const int id = grid_base + 2 * static_cast<int>(i * m + j);
      lo = std::min(lo, flow.edge(id).cost);
    }
    potential[1 + m + j] = lo;
    sink_pot = std::min(sink_pot, lo);
  }
  potential[sink] = sink_pot;

  flow.solve(source, sink, static_cast<std::int64_t>(n) * m, potential);

  out.mask.assign(static_cast<std::size_t>(m) * m, 0);
  for (std::int64_t k = 0; k < m * m; ++k) {
    const int id = grid_base + 2 * static_cast<int>(k);
    if (flow.edge(id).cap == 0) {  // saturated forward arc => selected
      out.mask[k] = 1;
      out.objective += std::fabs(block[k]);
    }
  }
  return out;
}

ExactBatchResult exact_solve_batch(const BlockBatch& batch, const SparsityPattern& pattern,
                                   int threads) {
  ExactBatchResult out;
  out.mask = BinaryMaskBatch::zeros(batch.b, batch.m);
  out.objectives.assign(static_cast<std::size_t>(batch.b), 0.0);
  parallel_for(batch.b, threads, [&](std::int64_t bi) {
    ExactResult r = exact_solve(batch.block(bi), batch.m, pattern);
    std::copy(r.mask.begin(), r.mask.end(), out.mask.bits.begin() + bi * batch.m * batch.m);
    out.objectives[bi] = r.objective;
  });
  return out;
}

BruteForceResult brute_force(std::span<const double> block, std::int64_t m,
                             const SparsityPattern& pattern, BruteForceMode mode) {
  if (m != pattern.m) throw ShapeError("brute: tile size != pattern m");
  if (m > kBruteSizeLimit)
    throw SizeError("brute: m = " + std::to_string(m) + " exceeds the limit of " +
                    std::to_string(kBruteSizeLimit));
  if (block.size() != static_cast<std::size_t>(m) * m)
    throw ShapeError("brute: block size does not match m*m");
  for (double v : block)
    if (!std::isfinite(v)) throw NumericalError("brute: non-finite magnitude");

  std::vector<double> abs_w(block.size());
  for (std::size_t k = 0; k < block.size(); ++k) abs_w[k] = std::fabs(block[k]);

  BruteState st;
  st.w = abs_w.data();
  st.m = m;
  st.n = pattern.n;
  st.prune_bound = mode == BruteForceMode::kBranchAndBound;
  st.demand.assign(static_cast<std::size_t>(m), pattern.n);
  st.current.assign(static_cast<std::size_t>(m) * m, 0);

  // Optimistic bound: per-row top-n sums, accumulated from the bottom.
  st.suffix_bound.assign(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<double> row_vals(static_cast<std::size_t>(m));
  for (std::int64_t i = m - 1; i >= 0; --i) {
    for (std::int64_t j = 0; j < m; ++j) row_vals[j] = abs_w[i * m + j];
    std::sort(row_vals.begin(), row_vals.end(), std::greater<double>());
    double top = 0.0;
    for (int k = 0; k < pattern.n; ++k) top += row_vals[k];
    st.suffix_bound[i] = st.suffix_bound[i + 1] + top;
  }

  st.row_order.assign(static_cast<std::size_t>(m), {});
  st.order_prefix.assign(static_cast<std::size_t>(m), {});
  for (std::int64_t i = 0; i < m; ++i) {
    auto& order = st.row_order[i];
    order.resize(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (abs_w[i * m + a] != abs_w[i * m + b]) return abs_w[i * m + a] > abs_w[i * m + b];
      return a < b;
    });
    auto& prefix = st.order_prefix[i];
    prefix.assign(static_cast<std::size_t>(m) + 1, 0.0);
    for (std::int64_t k = 0; k < m; ++k) prefix[k + 1] = prefix[k] + abs_w[i * m + order[k]];
  }

  if (st.prune_bound) {
    auto [mask, value] = warm_start(abs_w.data(), m, pattern.n);
    st.best_mask = std::move(mask);
    st.best = value;
  }

  brute_row(st, 0, 0.0);

  BruteForceResult out;
  out.mask = std::move(st.best_mask);
  out.objective = st.best;
  out.feasible_visited = st.visited;
  if (out.mask.empty())
    throw InfeasibleInternalError("brute: no feasible mask found");
  return out;
}

double relative_error(double candidate_objective, double optimal_objective) {
  if (optimal_objective < 0.0)
    throw DegenerateError("relative error: negative optimal objective");
  if (optimal_objective == 0.0) return 0.0;
  return (optimal_objective - candidate_objective) / optimal_objective;
}

}  // namespace tnm
