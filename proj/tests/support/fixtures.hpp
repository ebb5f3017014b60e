#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taskcl/graph.hpp"
#include "taskcl/rng.hpp"

namespace fixture {

using taskcl::Edge;
using taskcl::Graph;
using taskcl::Matrix;

inline Matrix ones(std::size_t n, std::size_t m = 2) { return Matrix(n, m, 1.0); }

inline Graph make(std::size_t n, std::vector<Edge> edges, std::optional<std::vector<int>> labels = std::nullopt,
                  int classes = 0, Matrix x = {}) {
  if (x.rows() == 0) x = ones(n);
  return Graph(std::move(edges), std::move(x), std::move(labels), classes, "fixture");
}

inline Graph triangle() { return make(3, {{0, 1}, {1, 2}, {0, 2}}); }
inline Graph path(std::size_t n) {
  std::vector<Edge> e;
  for (taskcl::NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return make(n, e);
}
inline Graph star(std::size_t leaves) {
  std::vector<Edge> e;
  for (taskcl::NodeId i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return make(leaves + 1, e);
}

// Erdos-Renyi style graph with random attributes and labels.
inline Graph random_small(std::size_t n, double p, std::uint64_t seed, std::size_t m = 3, int classes = 2,
                          bool signed_attrs = false) {
  taskcl::Rng rng(seed);
  std::vector<Edge> e;
  for (taskcl::NodeId u = 0; u < n; ++u)
    for (taskcl::NodeId v = u + 1; v < n; ++v)
      if (rng.uniform01() < p) e.emplace_back(u, v);
  Matrix x(n, m);
  for (double& v : x.data()) v = signed_attrs ? rng.uniform(-1.0, 1.0) : rng.uniform01();
  std::vector<int> y(n);
  for (int& c : y) c = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
  return Graph(std::move(e), std::move(x), std::move(y), classes, "random");
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("taskcl-test-" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
