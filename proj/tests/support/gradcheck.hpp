#pragma once

// Central finite-difference check of the encoder composed with the
// contrastive loss, on small random instances.

#include <algorithm>
#include <cmath>
#include <vector>

#include "support/fixtures.hpp"
#include "taskcl/contrastive.hpp"
#include "taskcl/encoder.hpp"
#include "taskcl/graph.hpp"

namespace gradcheck {

struct Problem {
  taskcl::Graph graph;
  taskcl::CsrMatrix a_hat;
  taskcl::EncoderParams params;
  std::vector<std::vector<taskcl::NodeId>> pos, neg;
  double temperature = 1.0;
  bool normalize = false;
};

struct Result {
  double max_rel = 0.0;
  std::size_t entries = 0;
};

inline double objective(const Problem& p, const taskcl::EncoderParams& params) {
  auto z = taskcl::gcn_forward(p.a_hat, p.graph.attributes(), params, p.normalize).z;
  double total = 0;
  for (taskcl::NodeId u = 0; u < z.rows(); ++u) total += taskcl::contrastive_loss(z, u, p.pos[u], p.neg[u], p.temperature);
  return total / static_cast<double>(z.rows());
}

inline taskcl::EncoderGrads analytic(const Problem& p) {
  taskcl::ForwardCache cache;
  auto z = taskcl::gcn_forward(p.a_hat, p.graph.attributes(), p.params, p.normalize, &cache).z;
  taskcl::Matrix dz(z.rows(), z.cols());
  const double scale = 1.0 / static_cast<double>(z.rows());
  for (taskcl::NodeId u = 0; u < z.rows(); ++u)
    taskcl::contrastive_loss_grad(z, u, p.pos[u], p.neg[u], p.temperature, scale, dz);
  return taskcl::gcn_backward(p.a_hat, p.params, cache, dz, p.normalize);
}

// True when some hidden pre-activation sits close enough to the ReLU kink for
// a finite-difference step to cross it.
inline bool near_kink(const Problem& p, double margin) {
  taskcl::ForwardCache cache;
  taskcl::gcn_forward(p.a_hat, p.graph.attributes(), p.params, p.normalize, &cache);
  return std::any_of(cache.pre1.data().begin(), cache.pre1.data().end(),
                     [&](double x) { return std::abs(x) < margin; });
}

// n <= 10 nodes, m <= 5 attributes, random biases, B/K/T varied.
inline Problem make(std::uint64_t seed, bool normalize) {
  using namespace taskcl;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed, attempt);
    const std::size_t n = 3 + rng.uniform_index(8);
    const std::size_t m = 1 + rng.uniform_index(5);
    Problem p{fixture::random_small(n, 0.35, rng.next_u64(), m, 2, true), {}, {}, {}, {}, 1.0, normalize};
    p.a_hat = normalized_adjacency(p.graph);
    EncoderDims dims{m, 1 + rng.uniform_index(4), 1 + rng.uniform_index(3)};
    p.params = init_params(dims, rng.next_u64());
    for (double& b : p.params.b1.data()) b = rng.uniform(-0.5, 0.5);
    for (double& b : p.params.b2.data()) b = rng.uniform(-0.5, 0.5);
    const double temps[] = {0.5, 1.0, 2.0};
    p.temperature = temps[rng.uniform_index(3)];
    const std::size_t B = 1 + rng.uniform_index(3), K = 1 + rng.uniform_index(4);
    p.pos.resize(n);
    p.neg.resize(n);
    for (NodeId u = 0; u < n; ++u) {
      for (std::size_t b = 0; b < B; ++b) p.pos[u].push_back(static_cast<NodeId>(rng.uniform_index(n)));
      p.neg[u] = sample_negatives(n, u, K, rng);
    }
    if (!near_kink(p, 1e-3)) return p;
  }
}

inline Result check(const Problem& p, double step = 1e-5) {
  auto grads = analytic(p);
  Result r;
  taskcl::EncoderParams probe = p.params;
  auto sweep = [&](taskcl::Matrix taskcl::EncoderParams::*field) {
    auto& target = (probe.*field).data();
    const auto& g = (grads.*field).data();
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double keep = target[i];
      target[i] = keep + step;
      const double up = objective(p, probe);
      target[i] = keep - step;
      const double down = objective(p, probe);
      target[i] = keep;
      const double fd = (up - down) / (2 * step);
      const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-5});
      r.max_rel = std::max(r.max_rel, std::abs(fd - g[i]) / denom);
      ++r.entries;
    }
  };
  sweep(&taskcl::EncoderParams::w1);
  sweep(&taskcl::EncoderParams::b1);
  sweep(&taskcl::EncoderParams::w2);
  sweep(&taskcl::EncoderParams::b2);
  return r;
}

}  // namespace gradcheck
