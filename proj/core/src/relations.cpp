#include "taskcl/relations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "taskcl/error.hpp"
#include "taskcl/io.hpp"

namespace taskcl {

namespace {

constexpr std::array<std::string_view, 9> kNames = {
    "link", "pagerank", "jaccard", "topology", "graph_distance", "attr_sim", "attr_dist1", "label_dist2",
    "attr_label_dist",
};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Row-wise kernel evaluation. `support(u, out)` lists the candidate columns of
// row u for sparse storage; `value(u, v)` evaluates the kernel. Dense mode
// evaluates every pair and leaves zeros outside the support to `value`.
template <typename Support, typename Value>
SimMatrix build(RelationId id, std::size_t n, SimMode mode, Support&& support, Value&& value) {
  if (mode == SimMode::Dense) {
    Matrix m(n, n);
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = 0; v < n; ++v) m(u, v) = clamp01(value(u, v));
    return SimMatrix(id, std::move(m));
  }
  std::vector<std::uint64_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::vector<NodeId> cols;
  for (NodeId u = 0; u < n; ++u) {
    cols.clear();
    support(u, cols);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    for (NodeId v : cols) {
      const double s = clamp01(value(u, v));
      if (s > 0.0) {
        indices.push_back(v);
        values.push_back(s);
      }
    }
    offsets[u + 1] = indices.size();
  }
  return SimMatrix(id, CsrMatrix(n, n, std::move(offsets), std::move(indices), std::move(values)));
}

void self_and_neighbors(const Graph& g, NodeId u, std::vector<NodeId>& out) {
  out.push_back(u);
  for (NodeId v : g.neighbors(u)) out.push_back(v);
}

void within_two_hops(const Graph& g, NodeId u, std::vector<NodeId>& out) {
  out.push_back(u);
  for (NodeId w : g.neighbors(u)) {
    out.push_back(w);
    for (NodeId v : g.neighbors(w)) out.push_back(v);
  }
}

// |N_u ∩ N_v| for sorted neighbor lists.
std::size_t common_neighbors(const Graph& g, NodeId u, NodeId v) {
  auto a = g.neighbors(u);
  auto b = g.neighbors(v);
  std::size_t i = 0, j = 0, c = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j])
      ++i;
    else if (b[j] < a[i])
      ++j;
    else {
      ++c;
      ++i;
      ++j;
    }
  }
  return c;
}

bool within_two_hops_pair(const Graph& g, NodeId u, NodeId v) {
  return u == v || g.has_edge(u, v) || common_neighbors(g, u, v) > 0;
}

double xlogx_term(double joint, double pa, double pb) {
  if (joint <= 0.0) return 0.0;
  return joint * std::log(joint / (pa * pb));
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

Matrix power_aggregate(const Graph& g, Matrix m, int k) {
  const CsrMatrix a = g.adjacency();
  for (int i = 0; i < k; ++i) m = spmm(a, m);
  return m;
}

// Cosine kernel over the rows of `features`, sparse support = self + neighbors.
SimMatrix cosine_kernel(RelationId id, const Graph& g, Matrix features, SimMode mode) {
  normalize_rows_l2(features);
  auto value = [&](NodeId u, NodeId v) { return dot(features.row(u), features.row(v)); };
  auto support = [&](NodeId u, std::vector<NodeId>& out) { self_and_neighbors(g, u, out); };
  return build(id, g.num_nodes(), mode, support, value);
}

Matrix train_one_hot(const Graph& g, const LabelSplit& labels_on) {
  if (!g.has_labels()) throw DataError("relation requires labels");
  const auto& y = g.labels();
  Matrix onehot(g.num_nodes(), static_cast<std::size_t>(g.num_classes()));
  for (NodeId u : labels_on.train) {
    if (u >= g.num_nodes()) throw DataError("label split references a node outside the graph");
    onehot(u, static_cast<std::size_t>(y[u])) = 1.0;
  }
  return onehot;
}

}  // namespace

std::string_view relation_name(RelationId id) { return kNames[static_cast<std::size_t>(id)]; }

std::optional<RelationId> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<RelationId>(i);
  return std::nullopt;
}

std::vector<RelationId> parse_relation_list(std::string_view list) {
  std::vector<RelationId> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto comma = list.find(',', pos);
    auto item = list.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    pos = comma == std::string_view::npos ? list.size() + 1 : comma + 1;
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (item.empty()) continue;
    if (item == "all") {
      out.insert(out.end(), kAllRelations.begin(), kAllRelations.end());
      continue;
    }
    auto id = parse_relation(item);
    if (!id) throw ConfigError("unknown relation \"" + std::string(item) + "\"");
    out.push_back(*id);
  }
  std::vector<RelationId> unique;
  for (auto id : out)
    if (std::find(unique.begin(), unique.end(), id) == unique.end()) unique.push_back(id);
  return unique;
}

bool requires_labels(RelationId id) { return id == RelationId::LabelDist2 || id == RelationId::AttrLabelDist; }

SimMatrix::SimMatrix(RelationId id, CsrMatrix sparse, Meta meta) : id_(id), storage_(std::move(sparse)), meta_(meta) {
  validate();
}

SimMatrix::SimMatrix(RelationId id, Matrix dense, Meta meta) : id_(id), storage_(std::move(dense)), meta_(meta) {
  validate();
}

void SimMatrix::validate() const {
  auto check = [&](const std::vector<double>& vals) {
    for (double x : vals)
      if (!(x >= 0.0 && x <= 1.0))
        throw NumericError(std::string(relation_name(id_)) + ": similarity value outside [0,1]");
  };
  if (is_sparse()) {
    const auto& s = sparse();
    if (s.rows() != s.cols()) throw DataError("similarity matrix must be square");
    check(s.values());
  } else {
    const auto& d = dense();
    if (d.rows() != d.cols()) throw DataError("similarity matrix must be square");
    check(d.data());
  }
}

std::size_t SimMatrix::size() const noexcept { return is_sparse() ? sparse().rows() : dense().rows(); }

std::size_t SimMatrix::stored() const noexcept { return is_sparse() ? sparse().nnz() : dense().size(); }

double SimMatrix::at(NodeId u, NodeId v) const { return is_sparse() ? sparse().at(u, v) : dense()(u, v); }

Matrix SimMatrix::to_dense() const { return is_sparse() ? sparse().to_dense() : dense(); }

SimMatrix link_sim(const Graph& g) { return SimMatrix(RelationId::Link, normalized_adjacency(g)); }

SimMatrix pagerank_sim(const Graph& g, const PageRankOptions& opts, SimMode mode) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ConfigError("pagerank: alpha must be in (0,1)");
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_deg(n);
  for (NodeId u = 0; u < n; ++u) inv_deg[u] = g.degree(u) ? 1.0 / static_cast<double>(g.degree(u)) : 0.0;

  SimMatrix::Meta meta;
  Matrix dense_out = mode == SimMode::Dense ? Matrix(n, n) : Matrix();
  std::vector<std::uint64_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::vector<double> pi(n), next(n);
  for (NodeId u = 0; u < n; ++u) {
    std::fill(pi.begin(), pi.end(), 0.0);
    pi[u] = 1.0;
    double residual = 0.0;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
      // next = alpha * P pi + (1 - alpha) e_u with P = A D^{-1}; dangling
      // nodes keep their own mass.
      for (NodeId i = 0; i < n; ++i) {
        double acc = 0.0;
        if (g.degree(i) == 0) {
          acc = pi[i];
        } else {
          for (NodeId j : g.neighbors(i)) acc += pi[j] * inv_deg[j];
        }
        next[i] = opts.alpha * acc;
      }
      next[u] += 1.0 - opts.alpha;
      residual = 0.0;
      for (NodeId i = 0; i < n; ++i) residual += std::abs(next[i] - pi[i]);
      pi.swap(next);
      if (residual < opts.tol) {
        ++it;
        break;
      }
    }
    if (residual >= opts.tol) meta.converged = false;
    meta.iterations = std::max(meta.iterations, it);
    meta.residual = std::max(meta.residual, residual);
    if (mode == SimMode::Dense) {
      for (NodeId v = 0; v < n; ++v) dense_out(u, v) = clamp01(pi[v]);
    } else {
      for (NodeId v = 0; v < n; ++v)
        if (pi[v] > 0.0) {
          indices.push_back(v);
          values.push_back(clamp01(pi[v]));
        }
      offsets[u + 1] = indices.size();
    }
  }
  if (mode == SimMode::Dense) return SimMatrix(RelationId::PageRank, std::move(dense_out), meta);
  return SimMatrix(RelationId::PageRank, CsrMatrix(n, n, std::move(offsets), std::move(indices), std::move(values)),
                   meta);
}

SimMatrix jaccard_sim(const Graph& g, int k, SimMode mode) {
  if (k != 1) throw ConfigError("jaccard: only k=1 is supported");
  auto value = [&](NodeId u, NodeId v) -> double {
    const auto du = g.degree(u), dv = g.degree(v);
    if (du == 0 || dv == 0) return 0.0;
    return static_cast<double>(common_neighbors(g, u, v)) / (static_cast<double>(du) * static_cast<double>(dv));
  };
  auto support = [&](NodeId u, std::vector<NodeId>& out) {
    for (NodeId w : g.neighbors(u))
      for (NodeId v : g.neighbors(w)) out.push_back(v);
  };
  return build(RelationId::JaccardSim, g.num_nodes(), mode, support, value);
}

SimMatrix topology_sim(const Graph& g, SimMode mode) {
  const double n = static_cast<double>(g.num_nodes());
  auto value = [&](NodeId u, NodeId v) -> double {
    if (!within_two_hops_pair(g, u, v)) return 0.0;
    if (v < u) std::swap(u, v);
    const double a = static_cast<double>(g.degree(u));
    const double b = static_cast<double>(g.degree(v));
    const double n11 = static_cast<double>(u == v ? g.degree(u) : common_neighbors(g, u, v));
    const double n10 = a - n11, n01 = b - n11, n00 = n - n11 - n10 - n01;
    const double pa = a / n, pb = b / n;
    const double mi = xlogx_term(n11 / n, pa, pb) + xlogx_term(n10 / n, pa, 1.0 - pb) +
                      xlogx_term(n01 / n, 1.0 - pa, pb) + xlogx_term(n00 / n, 1.0 - pa, 1.0 - pb);
    const double h = std::min(binary_entropy(pa), binary_entropy(pb));
    if (h <= 0.0) return 0.0;
    return mi / h;
  };
  auto support = [&](NodeId u, std::vector<NodeId>& out) { within_two_hops(g, u, out); };
  return build(RelationId::TopologySim, g.num_nodes(), mode, support, value);
}

SimMatrix graph_distance_sim(const Graph& g) {
  const std::size_t n = g.num_nodes();
  constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> dist(n * n, kUnreached);
  std::uint32_t diameter = 0;
  std::deque<NodeId> queue;
  for (NodeId s = 0; s < n; ++s) {
    auto* d = dist.data() + static_cast<std::size_t>(s) * n;
    d[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      NodeId x = queue.front();
      queue.pop_front();
      for (NodeId y : g.neighbors(x))
        if (d[y] == kUnreached) {
          d[y] = d[x] + 1;
          diameter = std::max(diameter, d[y]);
          queue.push_back(y);
        }
    }
  }
  Matrix m(n, n);
  for (std::size_t i = 0; i < n * n; ++i) {
    const auto d = dist[i];
    if (d == kUnreached) continue;
    if (diameter == 0) {
      m.data()[i] = 1.0;  // only the diagonal is reachable
      continue;
    }
    m.data()[i] = clamp01((static_cast<double>(diameter) - d + 1.0) / static_cast<double>(diameter));
  }
  return SimMatrix(RelationId::GraphDistance, std::move(m));
}

SimMatrix attr_sim(const Graph& g, SimMode mode) {
  return cosine_kernel(RelationId::AttrSim, g, g.attributes(), mode);
}

SimMatrix attr_dist_sim(const Graph& g, int k, SimMode mode) {
  if (k < 1) throw ConfigError("attr_dist: k must be >= 1");
  Matrix agg = power_aggregate(g, g.attributes(), k);
  normalize_rows_l1(agg);
  return cosine_kernel(RelationId::AttrDist1, g, std::move(agg), mode);
}

SimMatrix label_dist_sim(const Graph& g, const LabelSplit& labels_on, int k, SimMode mode) {
  if (k < 1) throw ConfigError("label_dist: k must be >= 1");
  Matrix agg = power_aggregate(g, train_one_hot(g, labels_on), k);
  normalize_rows_l1(agg);
  return cosine_kernel(RelationId::LabelDist2, g, std::move(agg), mode);
}

SimMatrix attr_label_dist_sim(const Graph& g, const LabelSplit& labels_on, const SimMatrix& attr_dist, SimMode mode) {
  if (attr_dist.size() != g.num_nodes()) throw DataError("attr_label_dist: attr_dist matrix size mismatch");
  Matrix onehot = train_one_hot(g, labels_on);
  Matrix agg = attr_dist.is_sparse() ? spmm(attr_dist.sparse(), onehot) : matmul(attr_dist.dense(), onehot);
  normalize_rows_l1(agg);
  return cosine_kernel(RelationId::AttrLabelDist, g, std::move(agg), mode);
}

double nearest_rank(std::vector<double>& values, double percentile) {
  if (values.empty()) throw DataError("nearest_rank: empty population");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

ThresholdVector per_node_threshold(const SimMatrix& s, double percentile) {
  if (!(percentile > 0.0 && percentile < 100.0)) throw ConfigError("percentile must be in (0,100)");
  const std::size_t n = s.size();
  ThresholdVector t{s.id(), std::vector<double>(n, 1.0), percentile};
  std::vector<double> pop;
  for (NodeId u = 0; u < n; ++u) {
    pop.clear();
    s.for_each_in_row(u, [&](NodeId v, double x) {
      if (v != u) pop.push_back(x);
    });
    if (!pop.empty()) t.eta[u] = nearest_rank(pop, percentile);
  }
  return t;
}

void RelationBank::add(SimMatrix sim, ThresholdVector thresholds) {
  if (sim.id() != thresholds.id) throw DataError("relation bank: threshold/similarity id mismatch");
  if (contains(sim.id())) throw DataError("relation bank: duplicate relation " + std::string(relation_name(sim.id())));
  if (!sims_.empty() && sim.size() != sims_.front().size()) throw DataError("relation bank: size mismatch");
  sims_.push_back(std::move(sim));
  thresholds_.push_back(std::move(thresholds));
}

bool RelationBank::contains(RelationId id) const {
  return std::any_of(sims_.begin(), sims_.end(), [&](const SimMatrix& s) { return s.id() == id; });
}

const SimMatrix& RelationBank::sim(RelationId id) const {
  for (const auto& s : sims_)
    if (s.id() == id) return s;
  throw DataError("relation not computed: " + std::string(relation_name(id)));
}

const ThresholdVector& RelationBank::threshold(RelationId id) const {
  for (const auto& t : thresholds_)
    if (t.id == id) return t;
  throw DataError("relation not computed: " + std::string(relation_name(id)));
}

std::vector<RelationId> RelationBank::ids() const {
  std::vector<RelationId> out;
  for (const auto& s : sims_) out.push_back(s.id());
  return out;
}

std::size_t RelationBank::num_nodes() const { return sims_.empty() ? 0 : sims_.front().size(); }

SimMatrix compute_relation(const Graph& g, RelationId id, const LabelSplit* labels_on, const RelationOptions& opts,
                           const SimMatrix* attr_dist) {
  if (requires_labels(id) && (labels_on == nullptr || !g.has_labels()))
    throw DataError(std::string(relation_name(id)) + ": relation requires labels");
  switch (id) {
    case RelationId::Link:
      return link_sim(g);
    case RelationId::PageRank:
      return pagerank_sim(g, opts.pagerank, opts.mode);
    case RelationId::JaccardSim:
      return jaccard_sim(g, 1, opts.mode);
    case RelationId::TopologySim:
      return topology_sim(g, opts.mode);
    case RelationId::GraphDistance:
      return graph_distance_sim(g);
    case RelationId::AttrSim:
      return attr_sim(g, opts.mode);
    case RelationId::AttrDist1:
      return attr_dist_sim(g, 1, opts.mode);
    case RelationId::LabelDist2:
      return label_dist_sim(g, *labels_on, 2, opts.mode);
    case RelationId::AttrLabelDist: {
      if (attr_dist) return attr_label_dist_sim(g, *labels_on, *attr_dist, opts.mode);
      SimMatrix ad = attr_dist_sim(g, 1, opts.mode);
      return attr_label_dist_sim(g, *labels_on, ad, opts.mode);
    }
  }
  throw ConfigError("unknown relation id");
}

RelationBank compute_relations(const Graph& g, const std::vector<RelationId>& ids, const LabelSplit* labels_on,
                               const RelationOptions& opts) {
  RelationBank bank;
  std::optional<SimMatrix> attr_dist;
  for (RelationId id : ids) {
    const SimMatrix* ad = nullptr;
    if (id == RelationId::AttrLabelDist) {
      if (bank.contains(RelationId::AttrDist1)) {
        ad = &bank.sim(RelationId::AttrDist1);
      } else {
        attr_dist.emplace(attr_dist_sim(g, 1, opts.mode));
        ad = &*attr_dist;
      }
    }
    SimMatrix s = compute_relation(g, id, labels_on, opts, ad);
    ThresholdVector t = per_node_threshold(s, opts.percentile);
    bank.add(std::move(s), std::move(t));
  }
  return bank;
}

std::filesystem::path relation_cache_path(const std::filesystem::path& dir, RelationId id) {
  return dir / (std::string(relation_name(id)) + ".sim");
}

void save_relation(const std::filesystem::path& dir, const SimMatrix& s) {
  std::filesystem::create_directories(dir);
  const auto path = relation_cache_path(dir, s.id());
  if (s.is_sparse())
    io::save_tcls(path, s.sparse());
  else
    io::save_tclm(path, s.dense());
}

SimMatrix load_relation(const std::filesystem::path& dir, RelationId id) {
  const auto path = relation_cache_path(dir, id);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("missing similarity cache file: " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  is.seekg(0);
  if (std::string_view(magic, 4) == "TCLS") return SimMatrix(id, io::read_tcls(is, path.string()));
  return SimMatrix(id, io::read_tclm(is, path.string()));
}

}  // namespace taskcl
