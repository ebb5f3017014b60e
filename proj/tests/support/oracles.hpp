#pragma once

// Straightforward dense re-implementations used as test oracles. Nothing here
// calls into the library's kernels; only the Graph container is shared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "taskcl/graph.hpp"
#include "taskcl/matrix.hpp"
#include "taskcl/rng.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense adjacency(const taskcl::Graph& g) {
  Dense a = zeros(g.num_nodes(), g.num_nodes());
  for (auto [u, v] : g.edges()) a[u][v] = a[v][u] = 1.0;
  return a;
}

inline Dense multiply(const Dense& a, const Dense& b) {
  Dense c = zeros(a.size(), b.empty() ? 0 : b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < c[i].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Dense from_matrix(const taskcl::Matrix& m) {
  Dense d = zeros(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline Dense normalized_adjacency(const taskcl::Graph& g) {
  Dense a = adjacency(g);
  const std::size_t n = a.size();
  std::vector<double> deg(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    a[i][i] = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) deg[i] += a[i][j];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] /= std::sqrt(deg[i] * deg[j]);
  return a;
}

// Personalized PageRank by Gaussian elimination: (I - alpha P) pi = (1 - alpha) e_u,
// P = A D^-1 column-stochastic, dangling columns replaced by self-loops.
inline Dense pagerank(const taskcl::Graph& g, double alpha) {
  const std::size_t n = g.num_nodes();
  Dense a = adjacency(g);
  Dense p = zeros(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d += a[i][j];
    if (d == 0.0)
      p[j][j] = 1.0;
    else
      for (std::size_t i = 0; i < n; ++i) p[i][j] = a[i][j] / d;
  }
  Dense out = zeros(n, n);
  for (std::size_t u = 0; u < n; ++u) {
    Dense m = zeros(n, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) m[i][j] = (i == j ? 1.0 : 0.0) - alpha * p[i][j];
      m[i][n] = i == u ? 1.0 - alpha : 0.0;
    }
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < n; ++r)
        if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
      std::swap(m[c], m[piv]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == c) continue;
        const double f = m[r][c] / m[c][c];
        for (std::size_t k = c; k <= n; ++k) m[r][k] -= f * m[c][k];
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[u][i] = m[i][n] / m[i][i];
  }
  return out;
}

inline std::set<taskcl::NodeId> neighbor_set(const taskcl::Graph& g, taskcl::NodeId u) {
  std::set<taskcl::NodeId> s;
  for (auto [a, b] : g.edges()) {
    if (a == u) s.insert(b);
    if (b == u) s.insert(a);
  }
  return s;
}

inline Dense distances(const taskcl::Graph& g) {
  const std::size_t n = g.num_nodes();
  const double inf = std::numeric_limits<double>::infinity();
  Dense d(n, std::vector<double>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (auto [u, v] : g.edges()) d[u][v] = d[v][u] = 1.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

inline Dense jaccard(const taskcl::Graph& g) {
  const std::size_t n = g.num_nodes();
  Dense s = zeros(n, n);
  for (taskcl::NodeId u = 0; u < n; ++u)
    for (taskcl::NodeId v = 0; v < n; ++v) {
      const auto nu = neighbor_set(g, u), nv = neighbor_set(g, v);
      if (nu.empty() || nv.empty()) continue;
      std::size_t common = 0;
      for (auto x : nu) common += nv.count(x);
      s[u][v] = std::min(1.0, static_cast<double>(common) / static_cast<double>(nu.size() * nv.size()));
    }
  return s;
}

// Normalized mutual information of membership indicators from an explicit
// 2x2 contingency table, restricted to pairs within two hops.
inline double topology_pair(const taskcl::Graph& g, taskcl::NodeId u, taskcl::NodeId v, const Dense& dist) {
  if (dist[u][v] > 2.0) return 0.0;
  const std::size_t n = g.num_nodes();
  const auto nu = neighbor_set(g, u), nv = neighbor_set(g, v);
  double c[2][2] = {{0, 0}, {0, 0}};
  for (taskcl::NodeId w = 0; w < n; ++w) c[nu.count(w)][nv.count(w)] += 1.0;
  auto h = [](double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : -(p * std::log(p) + (1 - p) * std::log(1 - p)); };
  const double N = static_cast<double>(n);
  const double pa = (c[1][0] + c[1][1]) / N, pb = (c[0][1] + c[1][1]) / N;
  double mi = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double pab = c[a][b] / N;
      if (pab == 0.0) continue;
      mi += pab * std::log(pab / ((a ? pa : 1 - pa) * (b ? pb : 1 - pb)));
    }
  const double hmin = std::min(h(pa), h(pb));
  return hmin <= 0.0 ? 0.0 : mi / hmin;
}

inline double cosine_clamped(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), 0.0, 1.0);
}

inline Dense row_l1(Dense m) {
  for (auto& r : m) {
    double s = 0;
    for (double x : r) s += std::abs(x);
    if (s > 0)
      for (double& x : r) x /= s;
  }
  return m;
}

inline Dense cosine_all(const Dense& rows) {
  Dense s = zeros(rows.size(), rows.size());
  for (std::size_t u = 0; u < rows.size(); ++u)
    for (std::size_t v = 0; v < rows.size(); ++v) s[u][v] = cosine_clamped(rows[u], rows[v]);
  return s;
}

inline Dense train_one_hot(const taskcl::Graph& g, const std::vector<taskcl::NodeId>& train) {
  Dense y = zeros(g.num_nodes(), static_cast<std::size_t>(g.num_classes()));
  for (auto u : train) y[u][static_cast<std::size_t>(g.labels()[u])] = 1.0;
  return y;
}

inline double nearest_rank(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  double r = std::ceil(pct / 100.0 * static_cast<double>(v.size()));
  std::size_t k = static_cast<std::size_t>(std::max(1.0, std::min(r, static_cast<double>(v.size()))));
  return v[k - 1];
}

// ---------------------------------------------------------------- boosting

struct Pair {
  std::uint32_t u, v;
  int y;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Weights {
  double w0, w1;
};

// Boosting rounds with plain accumulation. fired[r][i] says whether relation r's
// stump fires on pair i (relations already in training order).
inline std::vector<Weights> boost(const std::vector<Pair>& pairs, const std::vector<std::vector<bool>>& fired,
                                  double lambda) {
  std::vector<double> yhat(pairs.size(), 0.0);
  std::vector<Weights> out;
  for (const auto& f : fired) {
    long double g0 = 0, h0 = 0, g1 = 0, h1 = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double p = sigmoid(yhat[i]);
      const double gi = p - pairs[i].y, hi = p * (1 - p);
      if (f[i]) {
        g1 += gi;
        h1 += hi;
      } else {
        g0 += gi;
        h0 += hi;
      }
    }
    const double w0 = h0 + lambda == 0 ? 0.0 : static_cast<double>(-g0 / (h0 + lambda));
    const double w1 = h1 + lambda == 0 ? 0.0 : static_cast<double>(-g1 / (h1 + lambda));
    out.push_back({w0, w1});
    for (std::size_t i = 0; i < pairs.size(); ++i) yhat[i] += f[i] ? w1 : w0;
  }
  return out;
}

// Minimizes G w + (H + lambda) w^2 / 2 numerically by bisection on the sign
// of its derivative.
inline double minimize_quadratic(double G, double H, double lambda) {
  auto slope = [&](double w) { return G + (H + lambda) * w; };
  double lo = -1e3, hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (slope(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- contrastive

// Direct, unstabilized evaluation of the loss.
inline double naive_loss(const taskcl::Matrix& z, std::uint32_t u, const std::vector<std::uint32_t>& pos,
                         const std::vector<std::uint32_t>& neg, double T) {
  auto sim = [&](std::uint32_t a, std::uint32_t b) {
    double s = 0;
    for (std::size_t j = 0; j < z.cols(); ++j) s += z(a, j) * z(b, j);
    return std::exp(s / T);
  };
  double negsum = 0;
  for (auto k : neg) negsum += sim(u, k);
  double total = 0;
  for (auto p : pos) total -= std::log(sim(u, p) / (sim(u, p) + negsum));
  return total / static_cast<double>(pos.size());
}

}  // namespace oracle
