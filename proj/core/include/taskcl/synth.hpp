#pragma once

#include <cstdint>
#include <vector>

#include "taskcl/graph.hpp"
#include "taskcl/relations.hpp"

namespace taskcl {

struct PerturbConfig {
  RelationId relation = RelationId::AttrDist1;
  std::size_t budget = 1;  // p: visited-node target
  double ratio = 1.0;      // q: probability a similar node copies the label
  std::uint64_t seed = 0;
};

struct PerturbEvent {
  NodeId source;
  NodeId target;
  int label;  // label written into target (source's label at that moment)
};

struct PerturbResult {
  std::vector<int> labels;
  std::vector<PerturbEvent> log;
  std::vector<NodeId> visited;  // in visit order
  std::size_t restarts = 0;
};

// Collective label perturbation along one relation: a depth-first traversal
// over the "s(u,v) > eta_u" graph where each visited node u hands its label to
// each such v with probability q. When the stack runs dry before p nodes are
// visited, traversal restarts from a random unvisited node.
PerturbResult perturb_labels(const std::vector<int>& labels, const SimMatrix& sim, const ThresholdVector& thresholds,
                             const PerturbConfig& cfg);

// n nodes, 2n distinct random undirected edges, 16 uniform attributes, labels
// uniform over 4 classes.
Graph random_graph(std::size_t n, std::uint64_t seed);

struct SbmConfig {
  std::vector<std::size_t> block_sizes{200, 200};
  double p_in = 0.05;
  double p_out = 0.005;
  // Weight of the one-hot block indicator in the attributes; the remaining
  // columns and the indicator columns get U(0,1) noise.
  double attr_signal = 1.0;
  std::size_t noise_dims = 8;
  std::uint64_t seed = 0;
};

// Stochastic block model with block ids as labels.
Graph sbm_graph(const SbmConfig& cfg);

}  // namespace taskcl
