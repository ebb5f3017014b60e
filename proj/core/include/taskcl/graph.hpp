#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taskcl/csr.hpp"
#include "taskcl/matrix.hpp"

namespace taskcl {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Undirected attributed graph. Edges are stored once as (u, v) with u < v and
// symmetrically in the CSR adjacency. Self-loops are never stored.
class Graph {
 public:
  Graph() = default;
  // Validates, symmetrizes and deduplicates `edges`; self-loops are dropped.
  // n is taken from the attribute row count.
  Graph(std::vector<Edge> edges, Matrix attributes, std::optional<std::vector<int>> labels = std::nullopt,
        int num_classes = 0, std::string name = {});

  std::size_t num_nodes() const noexcept { return attributes_.rows(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t attribute_dim() const noexcept { return attributes_.cols(); }
  const std::string& name() const noexcept { return name_; }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::span<const NodeId> neighbors(NodeId u) const {
    return {adj_indices_.data() + adj_offsets_[u], static_cast<std::size_t>(adj_offsets_[u + 1] - adj_offsets_[u])};
  }
  std::size_t degree(NodeId u) const { return adj_offsets_[u + 1] - adj_offsets_[u]; }
  bool has_edge(NodeId u, NodeId v) const;

  const Matrix& attributes() const noexcept { return attributes_; }
  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::vector<int>& labels() const;
  int num_classes() const noexcept { return num_classes_; }

  // Binary adjacency A (no self-loops).
  CsrMatrix adjacency() const;

  // Same structure and attributes, different label vector.
  Graph with_labels(std::vector<int> labels, int num_classes) const;
  // Same nodes and attributes, edge set replaced.
  Graph with_edges(std::vector<Edge> edges) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::string name_;
  std::vector<Edge> edges_;
  std::vector<std::uint64_t> adj_offsets_{0};
  std::vector<NodeId> adj_indices_;
  Matrix attributes_;
  std::optional<std::vector<int>> labels_;
  int num_classes_ = 0;
};

// Reads a JSON manifest {name, edges, features, labels?, num_classes?}; file
// paths are resolved relative to the manifest's directory.
Graph load_graph(const std::filesystem::path& manifest_path);
// Writes <dir>/<name>.json plus edges, features (TCLM) and labels files.
std::filesystem::path save_graph(const Graph& g, const std::filesystem::path& dir);

// Parsers for the individual files, exposed for tools and tests.
std::vector<Edge> read_edge_list(const std::filesystem::path& path, std::size_t num_nodes);
Matrix read_attributes(const std::filesystem::path& path);
std::vector<int> read_labels(const std::filesystem::path& path, std::size_t num_nodes, int num_classes);

// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
CsrMatrix normalized_adjacency(const Graph& g);

struct LabelSplit {
  std::vector<NodeId> train;
  std::vector<NodeId> test;
  std::uint64_t seed = 0;
  friend bool operator==(const LabelSplit&, const LabelSplit&) = default;
};

struct EdgeSplit {
  std::vector<Edge> train;
  std::vector<Edge> test_positive;
  std::vector<Edge> test_negative;
  std::uint64_t seed = 0;
  friend bool operator==(const EdgeSplit&, const EdgeSplit&) = default;
};

LabelSplit split_labels(const Graph& g, double train_fraction, std::uint64_t seed);
EdgeSplit split_edges(const Graph& g, double train_fraction, std::uint64_t seed);

}  // namespace taskcl
