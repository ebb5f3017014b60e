#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "taskcl/encoder.hpp"
#include "taskcl/graph.hpp"
#include "taskcl/relations.hpp"
#include "taskcl/rng.hpp"
#include "taskcl/sampler.hpp"

namespace taskcl {

enum class Strategy { SSCL, SCL, CeilingSCL, NaiveTCL, XTCL };

std::string_view strategy_name(Strategy s);  // "sscl", "scl", "ceiling", "naive", "xtcl"
Strategy parse_strategy(std::string_view name);

// Provenance tags for positives that do not come from a relation.
inline constexpr std::string_view kTagFallback = "fallback";
inline constexpr std::string_view kTagLabel = "label";
inline constexpr std::string_view kTagCeiling = "ceiling";
inline constexpr std::string_view kTagSampler = "xgs";

// B positives per node with a provenance tag each, plus the rule that
// produced the node's list ("sscl", "scl", "ceiling", "xtcl").
struct PositiveAssignment {
  std::vector<std::vector<NodeId>> positives;
  std::vector<std::vector<std::string>> provenance;
  std::vector<std::string> rule;

  std::size_t num_nodes() const { return positives.size(); }
  friend bool operator==(const PositiveAssignment&, const PositiveAssignment&) = default;
};

// Mean over the B positives of -log(e^{a_p} / (e^{a_p} + sum_k e^{a_k})) with
// a_x = <z_u, z_x> / temperature, evaluated with log-sum-exp.
double contrastive_loss(const Matrix& z, NodeId u, std::span<const NodeId> positives,
                        std::span<const NodeId> negatives, double temperature = 1.0);
// Same value; adds scale * d(loss)/dZ into dz.
double contrastive_loss_grad(const Matrix& z, NodeId u, std::span<const NodeId> positives,
                             std::span<const NodeId> negatives, double temperature, double scale, Matrix& dz);

// K nodes uniformly with replacement from V \ {u}.
std::vector<NodeId> sample_negatives(std::size_t n, NodeId u, std::size_t K, Rng& rng);
std::vector<NodeId> sample_negatives(std::size_t n, NodeId u, std::size_t K, std::uint64_t seed);

// Every assigner draws node u's positives from its own stream Rng(seed, u), so
// per-node results do not depend on which other nodes are assigned.
PositiveAssignment assign_positives_sscl(const RelationBank& bank, const std::vector<RelationId>& relations,
                                         std::size_t B, std::uint64_t seed);
PositiveAssignment assign_positives_scl(const Graph& g, const LabelSplit& labels, std::size_t B, std::uint64_t seed);
PositiveAssignment assign_positives_ceiling(const Graph& g, TaskKind kind, std::size_t B, std::uint64_t seed);
PositiveAssignment assign_positives_naive_tcl(const Graph& g, const LabelSplit& labels, const RelationBank& bank,
                                              const std::vector<RelationId>& relations, std::size_t B,
                                              std::uint64_t seed);
PositiveAssignment assign_positives_xtcl(const SamplerModel& model, const RelationBank& bank, std::size_t B,
                                         CandidatePolicy policy = CandidatePolicy::Sparse);

// Link-prediction counterparts of SCL and Naive TCL on the training-edge
// graph: V_L is the set of nodes with a training edge and the same-"label"
// peers of u are its training neighbors.
PositiveAssignment assign_positives_scl_links(const Graph& train_graph, std::size_t B, std::uint64_t seed);
PositiveAssignment assign_positives_naive_tcl_links(const Graph& train_graph, const RelationBank& bank,
                                                    const std::vector<RelationId>& relations, std::size_t B,
                                                    std::uint64_t seed);

// Produces the assignment for an epoch. Deterministic strategies ignore the
// epoch and are drawn once.
struct PositiveSource {
  std::function<PositiveAssignment(std::uint64_t epoch)> draw;
  bool resample_each_epoch = false;
};

struct TrainConfig {
  std::size_t B = 5;
  std::size_t K = 10;
  std::size_t epochs = 100;
  double lr = 0.01;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  bool normalize = false;
  EncoderDims dims{};
};

struct TrainResult {
  EmbeddingMatrix embeddings;
  EncoderParams params;
  std::vector<double> loss_trace;
};

// Full-batch training of the GCN encoder on the mean per-node loss. Negatives
// are redrawn every epoch from the "negatives" substream of config.seed.
TrainResult train_embeddings(const Graph& g, const CsrMatrix& a_hat, const TrainConfig& config,
                             const PositiveSource& source);

}  // namespace taskcl
