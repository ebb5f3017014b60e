#include "taskcl/graph.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "taskcl/error.hpp"
#include "taskcl/io.hpp"
#include "taskcl/rng.hpp"

namespace taskcl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t edge_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

std::string where(const fs::path& path, std::size_t line) { return path.string() + ":" + std::to_string(line); }

// Strips a trailing '#' comment and surrounding whitespace.
std::string_view strip(std::string_view s) {
  if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_two_ints(std::string_view line, long long& a, long long& b) {
  std::istringstream is{std::string(line)};
  std::string extra;
  if (!(is >> a >> b)) return false;
  return !(is >> extra);
}

}  // namespace

Graph::Graph(std::vector<Edge> edges, Matrix attributes, std::optional<std::vector<int>> labels, int num_classes,
             std::string name)
    : name_(std::move(name)), attributes_(std::move(attributes)), labels_(std::move(labels)), num_classes_(num_classes) {
  const std::size_t n = attributes_.rows();
  if (n > std::numeric_limits<NodeId>::max()) throw DataError("graph: too many nodes");
  for (auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      std::ostringstream os;
      os << "endpoint out of range: edge (" << u << ", " << v << ") with n=" << n;
      throw DataError(os.str());
    }
    if (u > v) std::swap(u, v);
  }
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  std::vector<std::uint64_t> deg(n, 0);
  for (auto [u, v] : edges_) {
    ++deg[u];
    ++deg[v];
  }
  adj_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) adj_offsets_[i + 1] = adj_offsets_[i] + deg[i];
  adj_indices_.resize(adj_offsets_[n]);
  std::vector<std::uint64_t> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (auto [u, v] : edges_) {
    adj_indices_[cursor[u]++] = v;
    adj_indices_[cursor[v]++] = u;
  }
  for (std::size_t i = 0; i < n; ++i)
    std::sort(adj_indices_.begin() + static_cast<std::ptrdiff_t>(adj_offsets_[i]),
              adj_indices_.begin() + static_cast<std::ptrdiff_t>(adj_offsets_[i + 1]));

  if (!attributes_.all_finite()) throw DataError("graph: non-finite attribute value");
  if (labels_) {
    if (labels_->size() != n) throw DataError("graph: label count does not match node count");
    if (num_classes_ <= 0) throw DataError("graph: labels present but class count is zero");
    for (std::size_t i = 0; i < n; ++i)
      if ((*labels_)[i] < 0 || (*labels_)[i] >= num_classes_) {
        std::ostringstream os;
        os << "graph: label " << (*labels_)[i] << " of node " << i << " not in [0, " << num_classes_ << ")";
        throw DataError(os.str());
      }
  } else {
    num_classes_ = 0;
  }
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

const std::vector<int>& Graph::labels() const {
  if (!labels_) throw DataError("graph has no labels");
  return *labels_;
}

CsrMatrix Graph::adjacency() const {
  std::vector<std::uint32_t> idx(adj_indices_.begin(), adj_indices_.end());
  std::vector<double> ones(idx.size(), 1.0);
  return CsrMatrix(num_nodes(), num_nodes(), adj_offsets_, std::move(idx), std::move(ones));
}

Graph Graph::with_labels(std::vector<int> labels, int num_classes) const {
  return Graph(edges_, attributes_, std::move(labels), num_classes, name_);
}

Graph Graph::with_edges(std::vector<Edge> edges) const {
  return Graph(std::move(edges), attributes_, labels_, num_classes_, name_);
}

std::vector<Edge> read_edge_list(const fs::path& path, std::size_t num_nodes) {
  std::ifstream is(path);
  if (!is) throw DataError("missing file: " + path.string());
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto s = strip(line);
    if (s.empty()) continue;
    long long u = 0, v = 0;
    if (!parse_two_ints(s, u, v)) throw DataError(where(path, lineno) + ": expected \"u v\"");
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= num_nodes || static_cast<std::size_t>(v) >= num_nodes)
      throw DataError(where(path, lineno) + ": endpoint out of range (n=" + std::to_string(num_nodes) + ")");
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return edges;
}

Matrix read_attributes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("missing file: " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() == 4 && std::string_view(magic, 4) == "TCLM") {
    is.seekg(0);
    return io::read_tclm(is, path.string());
  }
  is.clear();
  is.seekg(0);
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++lineno;
    auto s = strip(line);
    if (s.empty()) continue;
    std::size_t count = 0;
    std::string cell;
    std::istringstream ls{std::string(s)};
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        data.push_back(std::stod(cell, &used));
        if (strip(std::string_view(cell).substr(used)).size() != 0) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError(where(path, lineno) + ": bad numeric value \"" + cell + "\"");
      }
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw DataError(where(path, lineno) + ": expected " + std::to_string(cols) + " columns");
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

std::vector<int> read_labels(const fs::path& path, std::size_t num_nodes, int num_classes) {
  std::ifstream is(path);
  if (!is) throw DataError("missing file: " + path.string());
  std::vector<int> labels(num_nodes, -1);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto s = strip(line);
    if (s.empty()) continue;
    long long u = 0, y = 0;
    if (!parse_two_ints(s, u, y)) throw DataError(where(path, lineno) + ": expected \"node_id label_id\"");
    if (u < 0 || static_cast<std::size_t>(u) >= num_nodes)
      throw DataError(where(path, lineno) + ": node id out of range (n=" + std::to_string(num_nodes) + ")");
    if (y < 0 || (num_classes > 0 && y >= num_classes))
      throw DataError(where(path, lineno) + ": label value " + std::to_string(y) + " not in [0, " +
                      std::to_string(num_classes) + ")");
    labels[static_cast<std::size_t>(u)] = static_cast<int>(y);
  }
  for (std::size_t i = 0; i < num_nodes; ++i)
    if (labels[i] < 0) throw DataError(path.string() + ": node " + std::to_string(i) + " has no label");
  return labels;
}

Graph load_graph(const fs::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw DataError("missing file: " + manifest_path.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": invalid JSON: " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("edges") || !manifest.contains("features"))
    throw DataError(manifest_path.string() + ": manifest requires \"edges\" and \"features\"");
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& key) { return base / manifest.at(key).get<std::string>(); };

  Matrix x = read_attributes(resolve("features"));
  const std::size_t n = x.rows();
  auto edges = read_edge_list(resolve("edges"), n);
  std::optional<std::vector<int>> labels;
  int num_classes = manifest.value("num_classes", 0);
  if (manifest.contains("labels") && !manifest["labels"].is_null()) {
    labels = read_labels(resolve("labels"), n, num_classes);
    if (num_classes == 0 && !labels->empty()) num_classes = *std::max_element(labels->begin(), labels->end()) + 1;
  }
  std::string name = manifest.value("name", manifest_path.stem().string());
  return Graph(std::move(edges), std::move(x), std::move(labels), num_classes, std::move(name));
}

fs::path save_graph(const Graph& g, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string name = g.name().empty() ? "graph" : g.name();
  json manifest;
  manifest["name"] = name;
  manifest["edges"] = name + ".edges";
  manifest["features"] = name + ".tclm";
  {
    std::ofstream os(dir / (name + ".edges"));
    for (auto [u, v] : g.edges()) os << u << ' ' << v << '\n';
  }
  io::save_tclm(dir / (name + ".tclm"), g.attributes());
  if (g.has_labels()) {
    manifest["labels"] = name + ".labels";
    manifest["num_classes"] = g.num_classes();
    std::ofstream os(dir / (name + ".labels"));
    for (std::size_t i = 0; i < g.num_nodes(); ++i) os << i << ' ' << g.labels()[i] << '\n';
  }
  const fs::path manifest_path = dir / (name + ".json");
  std::ofstream os(manifest_path);
  os << manifest.dump(2) << '\n';
  return manifest_path;
}

CsrMatrix normalized_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (NodeId u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));
  std::vector<std::uint64_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  indices.reserve(2 * g.num_edges() + n);
  values.reserve(2 * g.num_edges() + n);
  for (NodeId u = 0; u < n; ++u) {
    bool diag_done = false;
    auto emit_diag = [&] {
      indices.push_back(u);
      values.push_back(inv_sqrt[u] * inv_sqrt[u]);
      diag_done = true;
    };
    for (NodeId v : g.neighbors(u)) {
      if (!diag_done && v > u) emit_diag();
      indices.push_back(v);
      // Product order fixed by (min, max) so (u,v) and (v,u) are bitwise equal.
      values.push_back(inv_sqrt[std::min(u, v)] * inv_sqrt[std::max(u, v)]);
    }
    if (!diag_done) emit_diag();
    offsets[u + 1] = indices.size();
  }
  return CsrMatrix(n, n, std::move(offsets), std::move(indices), std::move(values));
}

LabelSplit split_labels(const Graph& g, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split_labels: fraction must be in (0,1)");
  const auto& y = g.labels();
  const std::size_t n = g.num_nodes();
  const auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (k == 0) throw DataError("split_labels: empty train side");
  if (k >= n) throw DataError("split_labels: empty test side");

  std::vector<NodeId> order(n);
  for (NodeId i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  // Guarantee one train node per observed class when the budget allows: swap
  // the first test node of a missing class for the last train node whose class
  // is represented more than once.
  std::vector<int> observed;
  for (int c : y) observed.push_back(c);
  std::sort(observed.begin(), observed.end());
  observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
  if (k >= observed.size()) {
    std::vector<std::size_t> count(static_cast<std::size_t>(g.num_classes()), 0);
    for (std::size_t i = 0; i < k; ++i) ++count[static_cast<std::size_t>(y[order[i]])];
    for (int c : observed) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t in = k;
      while (y[order[in]] != c) ++in;
      std::size_t out = k;
      while (out-- > 0)
        if (count[static_cast<std::size_t>(y[order[out]])] > 1) break;
      --count[static_cast<std::size_t>(y[order[out]])];
      ++count[static_cast<std::size_t>(c)];
      std::swap(order[in], order[out]);
    }
  }
  LabelSplit split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

EdgeSplit split_edges(const Graph& g, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split_edges: fraction must be in (0,1)");
  if (g.num_edges() < 2) throw DataError("split_edges: graph needs at least 2 edges");
  std::vector<Edge> edges = g.edges();
  Rng rng(seed);
  rng.shuffle(edges.begin(), edges.end());
  const auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(edges.size())));
  if (k == 0) throw DataError("split_edges: empty train side");
  if (k >= edges.size()) throw DataError("split_edges: empty test side");

  EdgeSplit split;
  split.seed = seed;
  split.train.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(k));
  split.test_positive.assign(edges.begin() + static_cast<std::ptrdiff_t>(k), edges.end());

  const std::size_t n = g.num_nodes();
  const std::size_t needed = split.test_positive.size();
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t non_edges = all_pairs - g.num_edges();
  if (non_edges < needed) throw DataError("split_edges: too few non-edges for negative sampling");

  if (non_edges < 4 * needed) {
    std::vector<Edge> pool;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (!g.has_edge(u, v)) pool.emplace_back(u, v);
    rng.shuffle(pool.begin(), pool.end());
    split.test_negative.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(needed));
  } else {
    std::unordered_set<std::uint64_t> taken;
    while (split.test_negative.size() < needed) {
      auto u = static_cast<NodeId>(rng.uniform_index(n));
      auto v = static_cast<NodeId>(rng.uniform_index(n));
      if (u == v || g.has_edge(u, v)) continue;
      if (!taken.insert(edge_key(u, v)).second) continue;
      split.test_negative.emplace_back(std::min(u, v), std::max(u, v));
    }
  }
  return split;
}

}  // namespace taskcl
