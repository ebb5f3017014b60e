#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taskcl/csr.hpp"
#include "taskcl/graph.hpp"
#include "taskcl/matrix.hpp"

namespace taskcl {

// Semantic relations between node pairs. Enum order is the tie-break order
// used wherever relations are ranked.
enum class RelationId : std::uint8_t {
  Link,
  PageRank,
  JaccardSim,
  TopologySim,
  GraphDistance,
  AttrSim,
  AttrDist1,
  LabelDist2,
  AttrLabelDist,
};

inline constexpr std::array<RelationId, 9> kAllRelations = {
    RelationId::Link,          RelationId::PageRank,  RelationId::JaccardSim,
    RelationId::TopologySim,   RelationId::GraphDistance, RelationId::AttrSim,
    RelationId::AttrDist1,     RelationId::LabelDist2, RelationId::AttrLabelDist,
};

std::string_view relation_name(RelationId id);
// Accepts the canonical names ("link", "pagerank", ..., "attr_label_dist").
std::optional<RelationId> parse_relation(std::string_view name);
// Parses a comma-separated list; "all" expands to every relation.
std::vector<RelationId> parse_relation_list(std::string_view list);
bool requires_labels(RelationId id);

enum class SimMode { Sparse, Dense };

// Solver diagnostics attached to iterative kernels (PageRank).
struct SimMeta {
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;
};

// One relation's pairwise similarities in [0, 1]. Sparse storage keeps only
// the positive entries inside the kernel's support; everything else is 0.
class SimMatrix {
 public:
  using Meta = SimMeta;

  SimMatrix(RelationId id, CsrMatrix sparse, SimMeta meta = {});
  SimMatrix(RelationId id, Matrix dense, SimMeta meta = {});

  RelationId id() const noexcept { return id_; }
  bool is_sparse() const noexcept { return std::holds_alternative<CsrMatrix>(storage_); }
  std::size_t size() const noexcept;
  std::size_t stored() const noexcept;
  const Meta& meta() const noexcept { return meta_; }

  double at(NodeId u, NodeId v) const;

  // Calls f(v, value) for every stored entry of row u (all n entries when dense).
  template <typename F>
  void for_each_in_row(NodeId u, F&& f) const {
    if (const auto* s = std::get_if<CsrMatrix>(&storage_)) {
      auto idx = s->row_indices(u);
      auto val = s->row_values(u);
      for (std::size_t k = 0; k < idx.size(); ++k) f(static_cast<NodeId>(idx[k]), val[k]);
    } else {
      auto row = std::get<Matrix>(storage_).row(u);
      for (std::size_t v = 0; v < row.size(); ++v) f(static_cast<NodeId>(v), row[v]);
    }
  }

  const CsrMatrix& sparse() const { return std::get<CsrMatrix>(storage_); }
  const Matrix& dense() const { return std::get<Matrix>(storage_); }
  Matrix to_dense() const;

 private:
  void validate() const;

  RelationId id_;
  std::variant<CsrMatrix, Matrix> storage_;
  Meta meta_;
};

// Per-query-node decision thresholds for one relation.
struct ThresholdVector {
  RelationId id = RelationId::Link;
  std::vector<double> eta;
  double percentile = 99.0;
  friend bool operator==(const ThresholdVector&, const ThresholdVector&) = default;
};

// Stump firing event. Zero similarity means "no relation" and never fires,
// which keeps dense and sparse storage equivalent.
inline bool fires(double s, double eta) { return s > 0.0 && s >= eta; }

struct PageRankOptions {
  double alpha = 0.85;
  double tol = 1e-8;
  int max_iter = 200;
};

SimMatrix link_sim(const Graph& g);
SimMatrix pagerank_sim(const Graph& g, const PageRankOptions& opts = {}, SimMode mode = SimMode::Sparse);
SimMatrix jaccard_sim(const Graph& g, int k = 1, SimMode mode = SimMode::Sparse);
// Substitute for the neighbor-to-neighbor topology similarity: mutual
// information of the two 1-hop membership indicators, normalized by the
// smaller entropy. Defined on pairs within 2 hops, 0 elsewhere.
SimMatrix topology_sim(const Graph& g, SimMode mode = SimMode::Sparse);
SimMatrix graph_distance_sim(const Graph& g);
SimMatrix attr_sim(const Graph& g, SimMode mode = SimMode::Sparse);
SimMatrix attr_dist_sim(const Graph& g, int k = 1, SimMode mode = SimMode::Sparse);
SimMatrix label_dist_sim(const Graph& g, const LabelSplit& labels_on, int k = 2, SimMode mode = SimMode::Sparse);
SimMatrix attr_label_dist_sim(const Graph& g, const LabelSplit& labels_on, const SimMatrix& attr_dist,
                              SimMode mode = SimMode::Sparse);

// Nearest-rank percentile of a value population (sorted in place).
double nearest_rank(std::vector<double>& values, double percentile);

// Threshold per query node u over the row's population excluding s(u,u):
// every off-diagonal value when dense, stored off-diagonal entries when
// sparse. An empty sparse row yields 1.0.
ThresholdVector per_node_threshold(const SimMatrix& s, double percentile);

struct RelationOptions {
  SimMode mode = SimMode::Sparse;
  double percentile = 99.0;
  PageRankOptions pagerank{};
};

// Similarity matrices and thresholds for a set of relations.
class RelationBank {
 public:
  void add(SimMatrix sim, ThresholdVector thresholds);

  bool contains(RelationId id) const;
  const SimMatrix& sim(RelationId id) const;
  const ThresholdVector& threshold(RelationId id) const;
  std::vector<RelationId> ids() const;
  std::size_t num_nodes() const;

 private:
  std::vector<SimMatrix> sims_;
  std::vector<ThresholdVector> thresholds_;
};

// Computes the requested relations. Label-based relations need `labels_on`.
RelationBank compute_relations(const Graph& g, const std::vector<RelationId>& ids, const LabelSplit* labels_on,
                               const RelationOptions& opts = {});
SimMatrix compute_relation(const Graph& g, RelationId id, const LabelSplit* labels_on, const RelationOptions& opts,
                           const SimMatrix* attr_dist = nullptr);

// Cache files: <dir>/<relation>.sim holding TCLS (sparse) or TCLM (dense).
std::filesystem::path relation_cache_path(const std::filesystem::path& dir, RelationId id);
void save_relation(const std::filesystem::path& dir, const SimMatrix& s);
SimMatrix load_relation(const std::filesystem::path& dir, RelationId id);

}  // namespace taskcl
