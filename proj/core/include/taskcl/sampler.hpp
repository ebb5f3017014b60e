#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_set>
#include <utility>
#include <vector>

#include "taskcl/graph.hpp"
#include "taskcl/relations.hpp"

namespace taskcl {

enum class TaskKind { NodeClassification, LinkPrediction };

std::string_view task_name(TaskKind kind);  // "nc" / "lp"
TaskKind parse_task(std::string_view name);

// Downstream task identity: the pair indicator I_t(u, v) and the labeled node
// set V_L it is known on.
class TaskSpec {
 public:
  // I_t = [y_u == y_v] over the training nodes of `split`.
  static TaskSpec node_classification(const Graph& g, const LabelSplit& split);
  // I_t = [(u,v) in E_train]; V_L = nodes incident to a training edge.
  static TaskSpec link_prediction(const Graph& g, const EdgeSplit& split);
  // Ground truth over every node / every edge of `g`, for diagnostics and the
  // ceiling strategy.
  static TaskSpec full_ground_truth(const Graph& g, TaskKind kind);

  TaskKind kind() const noexcept { return kind_; }
  std::size_t num_nodes() const noexcept { return num_nodes_; }
  // Sorted V_L.
  const std::vector<NodeId>& labeled() const noexcept { return labeled_; }
  bool is_labeled(NodeId u) const { return labeled_mask_[u] != 0; }
  // Only meaningful when both nodes are labeled.
  bool indicator(NodeId u, NodeId v) const;

 private:
  TaskKind kind_ = TaskKind::NodeClassification;
  std::size_t num_nodes_ = 0;
  std::vector<NodeId> labeled_;
  std::vector<std::uint8_t> labeled_mask_;
  std::vector<int> labels_;                  // NC: label per node, -1 if unlabeled
  std::unordered_set<std::uint64_t> edges_;  // LP: positive pairs
};

struct LabeledPair {
  NodeId u;
  NodeId v;
  std::uint8_t y;
  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

// All ordered pairs (u, v), u != v, over V_L x V_L with y = I_t(u, v). With
// `neg_cap`, y = 0 pairs are subsampled to neg_cap * (#positives).
std::vector<LabeledPair> training_pairs(const TaskSpec& task, std::optional<std::size_t> neg_cap,
                                        std::uint64_t seed);

// fired[r][i] == 1 iff relation relations[r] fires on pairs[i].
struct FiringTable {
  std::vector<RelationId> relations;
  std::vector<std::vector<std::uint8_t>> fired;
};
FiringTable compute_firing(const std::vector<LabeledPair>& pairs, const RelationBank& bank,
                           const std::vector<RelationId>& relations);

struct RelationPrecision {
  RelationId id;
  double precision;
  std::size_t fired;
};

// Precision of each relation's firing event on the training pairs, sorted
// descending with ties broken by enum order.
std::vector<RelationPrecision> relation_precisions(const std::vector<LabeledPair>& pairs, const RelationBank& bank,
                                                   const std::vector<RelationId>& relations);
std::vector<RelationId> order_relations(const std::vector<LabeledPair>& pairs, const RelationBank& bank,
                                        const std::vector<RelationId>& relations);

struct RelStump {
  RelationId id;
  double w0 = 0.0;
  double w1 = 0.0;
  friend bool operator==(const RelStump&, const RelStump&) = default;
};

// Boosted ensemble of tied relation stumps. stumps[i] and thresholds[i]
// belong to order[i].
struct SamplerModel {
  std::vector<RelationId> order;
  std::vector<RelStump> stumps;
  std::vector<ThresholdVector> thresholds;
  double lambda = 1.0;
  TaskKind task = TaskKind::NodeClassification;

  const RelStump& stump(RelationId id) const;
  friend bool operator==(const SamplerModel&, const SamplerModel&) = default;
};

// Running margins and per-pair derivatives of the logistic loss.
struct BoostState {
  std::vector<double> margin;
  std::vector<double> grad;
  std::vector<double> hess;

  explicit BoostState(std::size_t num_pairs) : margin(num_pairs, 0.0), grad(num_pairs), hess(num_pairs) {}
  void refresh(const std::vector<LabeledPair>& pairs);
};

// Per-round record of the Newton step, for diagnostics and tests.
struct BoostRound {
  RelationId id;
  double grad_sum0, hess_sum0, grad_sum1, hess_sum1;
  std::size_t count0, count1;
  double w0, w1;
  double surrogate;  // quadratic surrogate value at (w0, w1)
  double min_grad, max_grad, min_hess, max_hess;
};

// Closed-form weights of one stump: w = -G / (H + lambda), 0 when H + lambda = 0.
double newton_weight(double grad_sum, double hess_sum, double lambda);

SamplerModel fit_sampler(const std::vector<LabeledPair>& pairs, const RelationBank& bank, double lambda,
                         const std::vector<RelationId>& order, TaskKind task = TaskKind::NodeClassification,
                         std::vector<BoostRound>* trace = nullptr);

double sigmoid(double x);

// Margin sum_r f_{r,u}(v) in model order.
double pair_margin(const SamplerModel& model, const RelationBank& bank, NodeId u, NodeId v);
// sigma(margin), the probability that (u, v) is task-positive.
double score_pair(const SamplerModel& model, const RelationBank& bank, NodeId u, NodeId v);

enum class CandidatePolicy { Sparse, Full };

// Nodes v != u on which at least one model relation fires for query u.
std::vector<NodeId> firing_candidates(const SamplerModel& model, const RelationBank& bank, NodeId u);

// Top-B candidates by score, ties broken by ascending id. Under the sparse
// policy an empty candidate set falls back to all v != u. If fewer than B
// candidates exist the top candidate is repeated.
std::vector<NodeId> sample_positives_xtcl(const SamplerModel& model, const RelationBank& bank, NodeId u,
                                          std::size_t B, CandidatePolicy policy = CandidatePolicy::Sparse);

// max(|w0|, |w1|) per relation, sorted descending (ties by enum order).
std::vector<std::pair<RelationId, double>> importance_weights(const SamplerModel& model);

void save_sampler(const SamplerModel& model, const std::filesystem::path& path);
SamplerModel load_sampler(const std::filesystem::path& path);

}  // namespace taskcl
