#include "taskcl/synth.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "taskcl/error.hpp"
#include "taskcl/rng.hpp"

namespace taskcl {

PerturbResult perturb_labels(const std::vector<int>& labels, const SimMatrix& sim, const ThresholdVector& thresholds,
                             const PerturbConfig& cfg) {
  const std::size_t n = labels.size();
  if (sim.size() != n || thresholds.eta.size() != n) throw DataError("perturb: size mismatch");
  if (cfg.budget < 1 || cfg.budget > n) throw ConfigError("perturb: p must be in [1, n]");
  if (!(cfg.ratio >= 0.0 && cfg.ratio <= 1.0)) throw ConfigError("perturb: q must be in [0, 1]");

  std::vector<std::vector<NodeId>> similar(n);
  bool any = false;
  for (NodeId u = 0; u < n; ++u) {
    const double eta = thresholds.eta[u];
    sim.for_each_in_row(u, [&](NodeId v, double s) {
      if (v != u && s > eta) similar[u].push_back(v);
    });
    any = any || !similar[u].empty();
  }
  if (!any && cfg.budget > 1) throw DataError("perturbation cannot propagate: relation " +
                                               std::string(relation_name(sim.id())) + " has no above-threshold pairs");

  PerturbResult result;
  result.labels = labels;
  Rng rng(cfg.seed);
  std::vector<std::uint8_t> visited(n, 0);
  std::vector<NodeId> stack;
  auto random_unvisited = [&]() {
    std::vector<NodeId> pool;
    for (NodeId u = 0; u < n; ++u)
      if (!visited[u]) pool.push_back(u);
    return pool[rng.uniform_index(pool.size())];
  };

  stack.push_back(static_cast<NodeId>(rng.uniform_index(n)));
  while (result.visited.size() < cfg.budget) {
    if (stack.empty()) {
      stack.push_back(random_unvisited());
      ++result.restarts;
    }
    const NodeId u = stack.back();
    stack.pop_back();
    if (visited[u]) continue;
    for (NodeId v : similar[u]) {
      const double draw = rng.uniform01();
      if (draw <= cfg.ratio && cfg.ratio > 0.0) {
        result.labels[v] = result.labels[u];
        result.log.push_back({u, v, result.labels[u]});
      }
    }
    visited[u] = 1;
    result.visited.push_back(u);
    for (NodeId v : similar[u]) stack.push_back(v);
  }
  return result;
}

Graph random_graph(std::size_t n, std::uint64_t seed) {
  if (n <= 4) throw ConfigError("random_graph: n must be > 4 to hold 2n distinct edges");
  constexpr std::size_t kDims = 16;
  constexpr int kClasses = 4;
  Rng rng(seed);
  std::unordered_set<std::uint64_t> seen;
  std::vector<Edge> edges;
  edges.reserve(2 * n);
  while (edges.size() < 2 * n) {
    auto u = static_cast<NodeId>(rng.uniform_index(n));
    auto v = static_cast<NodeId>(rng.uniform_index(n));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (!seen.insert((static_cast<std::uint64_t>(u) << 32) | v).second) continue;
    edges.emplace_back(u, v);
  }
  Matrix x(n, kDims);
  for (double& v : x.data()) v = rng.uniform01();
  std::vector<int> y(n);
  for (int& c : y) c = static_cast<int>(rng.uniform_index(kClasses));
  return Graph(std::move(edges), std::move(x), std::move(y), kClasses, "random-" + std::to_string(n));
}

Graph sbm_graph(const SbmConfig& cfg) {
  if (!(cfg.p_in >= 0.0 && cfg.p_in <= 1.0 && cfg.p_out >= 0.0 && cfg.p_out <= 1.0))
    throw ConfigError("sbm: probabilities must be in [0, 1]");
  if (cfg.block_sizes.empty()) throw ConfigError("sbm: need at least one block");
  if (std::find(cfg.block_sizes.begin(), cfg.block_sizes.end(), 0u) != cfg.block_sizes.end())
    throw ConfigError("sbm: empty block");
  const std::size_t n = std::accumulate(cfg.block_sizes.begin(), cfg.block_sizes.end(), std::size_t{0});
  const std::size_t blocks = cfg.block_sizes.size();
  std::vector<int> y;
  y.reserve(n);
  for (std::size_t b = 0; b < blocks; ++b) y.insert(y.end(), cfg.block_sizes[b], static_cast<int>(b));

  Rng rng(cfg.seed);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) {
      const double p = y[u] == y[v] ? cfg.p_in : cfg.p_out;
      if (rng.uniform01() < p) edges.emplace_back(u, v);
    }
  Matrix x(n, blocks + cfg.noise_dims);
  for (double& v : x.data()) v = rng.uniform01();
  for (NodeId u = 0; u < n; ++u) x(u, static_cast<std::size_t>(y[u])) += cfg.attr_signal;
  return Graph(std::move(edges), std::move(x), std::move(y), static_cast<int>(blocks), "sbm");
}

}  // namespace taskcl
