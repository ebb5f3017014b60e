#pragma once

// Small random sampler-training instances shared by the unit tests and the
// acceptance binary, plus an independent reference fit over them.

#include <algorithm>
#include <vector>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "taskcl/relations.hpp"
#include "taskcl/sampler.hpp"

namespace instance {

struct Instance {
  taskcl::Graph graph;
  taskcl::RelationBank bank;
  std::vector<taskcl::RelationId> relations;
  std::vector<taskcl::LabeledPair> pairs;
  double lambda = 1.0;
};

// n <= 40 nodes, 1 to 4 relations, every node labeled.
inline Instance make(std::uint64_t seed) {
  using namespace taskcl;
  Rng rng(seed);
  const std::size_t n = 8 + rng.uniform_index(33);
  const double p = rng.uniform(0.05, 0.3);
  const int classes = 2 + static_cast<int>(rng.uniform_index(2));
  Graph g = fixture::random_small(n, p, seed * 7919 + 1, 3, classes);

  std::vector<RelationId> pool{RelationId::Link,    RelationId::PageRank,  RelationId::JaccardSim,
                               RelationId::TopologySim, RelationId::AttrSim, RelationId::AttrDist1};
  rng.shuffle(pool.begin(), pool.end());
  const std::size_t k = 1 + rng.uniform_index(4);
  std::vector<RelationId> rels(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));

  RelationOptions opts;
  opts.mode = rng.uniform01() < 0.5 ? SimMode::Sparse : SimMode::Dense;
  const double pcts[] = {50.0, 80.0, 90.0, 99.0};
  opts.percentile = pcts[rng.uniform_index(4)];
  RelationBank bank = compute_relations(g, rels, nullptr, opts);

  LabelSplit all;
  for (NodeId u = 0; u < n; ++u) all.train.push_back(u);
  auto pairs = training_pairs(TaskSpec::node_classification(g, all), std::nullopt, seed);
  const double lambdas[] = {0.5, 1.0, 2.0};
  return {std::move(g), std::move(bank), std::move(rels), std::move(pairs), lambdas[rng.uniform_index(3)]};
}

struct Reference {
  std::vector<taskcl::RelationId> order;
  std::vector<oracle::Weights> weights;
};

// Independent precision ordering, firing and boosting over an instance.
inline Reference reference_fit(const Instance& inst) {
  using namespace taskcl;
  struct Ranked {
    RelationId id;
    double precision;
  };
  std::vector<Ranked> ranked;
  std::vector<std::vector<bool>> fired_by_id;
  for (RelationId r : inst.relations) {
    const auto& s = inst.bank.sim(r);
    const auto& eta = inst.bank.threshold(r).eta;
    std::vector<bool> f(inst.pairs.size());
    double hits = 0, pos = 0;
    for (std::size_t i = 0; i < inst.pairs.size(); ++i) {
      const double x = s.at(inst.pairs[i].u, inst.pairs[i].v);
      f[i] = x > 0.0 && x >= eta[inst.pairs[i].u];
      if (f[i]) {
        hits += 1;
        pos += inst.pairs[i].y;
      }
    }
    ranked.push_back({r, hits == 0 ? 0.0 : pos / hits});
    fired_by_id.push_back(std::move(f));
  }
  std::vector<std::size_t> idx(ranked.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (ranked[a].precision != ranked[b].precision) return ranked[a].precision > ranked[b].precision;
    return ranked[a].id < ranked[b].id;
  });
  Reference ref;
  std::vector<std::vector<bool>> fired;
  for (auto i : idx) {
    ref.order.push_back(ranked[i].id);
    fired.push_back(fired_by_id[i]);
  }
  std::vector<oracle::Pair> pairs;
  for (const auto& p : inst.pairs) pairs.push_back({p.u, p.v, p.y});
  ref.weights = oracle::boost(pairs, fired, inst.lambda);
  return ref;
}

}  // namespace instance
