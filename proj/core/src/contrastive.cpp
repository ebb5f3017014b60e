#include "taskcl/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "taskcl/error.hpp"

namespace taskcl {

namespace {

constexpr std::array<std::string_view, 5> kStrategyNames = {"sscl", "scl", "ceiling", "naive", "xtcl"};

// Draws `count` items from `pool`: without replacement when the pool is large
// enough, otherwise with replacement.
void draw_from(const std::vector<NodeId>& pool, std::size_t count, Rng& rng, std::vector<NodeId>& out) {
  if (pool.size() >= count) {
    std::vector<NodeId> tmp = pool;
    for (std::size_t i = 0; i < count; ++i) {
      auto j = i + rng.uniform_index(tmp.size() - i);
      std::swap(tmp[i], tmp[j]);
      out.push_back(tmp[i]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[rng.uniform_index(pool.size())]);
  }
}

NodeId uniform_other(std::size_t n, NodeId u, Rng& rng) {
  auto v = static_cast<NodeId>(rng.uniform_index(n - 1));
  return v >= u ? v + 1 : v;
}

void fallback_fill(std::size_t n, NodeId u, std::size_t count, Rng& rng, std::vector<NodeId>& pos,
                   std::vector<std::string>& tags) {
  for (std::size_t i = 0; i < count; ++i) {
    pos.push_back(uniform_other(n, u, rng));
    tags.emplace_back(kTagFallback);
  }
}

PositiveAssignment empty_assignment(std::size_t n) {
  PositiveAssignment a;
  a.positives.resize(n);
  a.provenance.resize(n);
  a.rule.resize(n);
  return a;
}

void require_b(std::size_t B, std::size_t n) {
  if (B == 0) throw ConfigError("B must be >= 1");
  if (n < 2) throw DataError("positive sampling needs at least 2 nodes");
}

void sscl_for_node(const RelationBank& bank, const std::vector<RelationId>& relations, std::size_t B, NodeId u,
                   Rng& rng, std::vector<NodeId>& pos, std::vector<std::string>& tags) {
  const std::size_t n = bank.num_nodes();
  const std::size_t R = relations.size();
  const std::size_t base = B / R, extra = B % R;
  std::vector<NodeId> pool;
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t count = base + (r < extra ? 1 : 0);
    if (count == 0) continue;
    const RelationId id = relations[r];
    const double eta = bank.threshold(id).eta[u];
    const SimMatrix& s = bank.sim(id);
    pool.clear();
    s.for_each_in_row(u, [&](NodeId v, double x) {
      if (v != u && x > eta) pool.push_back(v);
    });
    // Nearest-rank thresholds on short rows often equal the row maximum, which
    // empties the strict set; fall back to the firing set before going uniform.
    if (pool.empty())
      s.for_each_in_row(u, [&](NodeId v, double x) {
        if (v != u && fires(x, eta)) pool.push_back(v);
      });
    if (pool.empty()) {
      fallback_fill(n, u, count, rng, pos, tags);
      continue;
    }
    const std::size_t before = pos.size();
    draw_from(pool, count, rng, pos);
    for (std::size_t i = before; i < pos.size(); ++i) tags.emplace_back(relation_name(id));
  }
}

// Train nodes grouped by class, ascending ids.
std::vector<std::vector<NodeId>> train_by_class(const Graph& g, const LabelSplit& labels) {
  std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(g.num_classes()));
  std::vector<NodeId> train = labels.train;
  std::sort(train.begin(), train.end());
  for (NodeId u : train) by_class[static_cast<std::size_t>(g.labels()[u])].push_back(u);
  return by_class;
}

void scl_for_node(const Graph& g, const std::vector<std::vector<NodeId>>& by_class, std::size_t B, NodeId u, Rng& rng,
                  std::vector<NodeId>& pos, std::vector<std::string>& tags) {
  const auto& same = by_class[static_cast<std::size_t>(g.labels()[u])];
  std::vector<NodeId> peers;
  for (NodeId v : same)
    if (v != u) peers.push_back(v);
  if (peers.empty()) {
    fallback_fill(g.num_nodes(), u, B, rng, pos, tags);
    return;
  }
  draw_from(peers, B, rng, pos);
  tags.insert(tags.end(), B, std::string(kTagLabel));
}

std::vector<RelationId> enum_ordered(std::vector<RelationId> relations) {
  std::sort(relations.begin(), relations.end());
  relations.erase(std::unique(relations.begin(), relations.end()), relations.end());
  return relations;
}

}  // namespace

std::string_view strategy_name(Strategy s) { return kStrategyNames[static_cast<std::size_t>(s)]; }

Strategy parse_strategy(std::string_view name) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
    if (kStrategyNames[i] == name) return static_cast<Strategy>(i);
  throw ConfigError("unknown strategy \"" + std::string(name) + "\" (expected xtcl|sscl|scl|ceiling|naive)");
}

double contrastive_loss(const Matrix& z, NodeId u, std::span<const NodeId> positives,
                        std::span<const NodeId> negatives, double temperature) {
  Matrix unused;
  return contrastive_loss_grad(z, u, positives, negatives, temperature, 0.0, unused);
}

double contrastive_loss_grad(const Matrix& z, NodeId u, std::span<const NodeId> positives,
                             std::span<const NodeId> negatives, double temperature, double scale, Matrix& dz) {
  if (positives.empty() || negatives.empty()) throw ConfigError("contrastive_loss: need B >= 1 and K >= 1");
  if (!(temperature > 0.0)) throw ConfigError("contrastive_loss: temperature must be > 0");
  const auto zu = z.row(u);
  for (double x : zu)
    if (!std::isfinite(x)) throw NumericError("contrastive_loss: non-finite embedding");
  const std::size_t K = negatives.size();
  const double B = static_cast<double>(positives.size());

  std::vector<double> neg_logit(K);
  double neg_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    neg_logit[k] = dot(zu, z.row(negatives[k])) / temperature;
    neg_max = std::max(neg_max, neg_logit[k]);
  }
  if (!std::isfinite(neg_max)) throw NumericError("contrastive_loss: non-finite embedding");

  const bool want_grad = scale != 0.0;
  std::vector<double> neg_weight(want_grad ? K : 0, 0.0);
  std::vector<double> grad_u(want_grad ? zu.size() : 0, 0.0);
  double total = 0.0;
  for (NodeId p : positives) {
    const double ap = dot(zu, z.row(p)) / temperature;
    if (!std::isfinite(ap)) throw NumericError("contrastive_loss: non-finite embedding");
    const double m = std::max(ap, neg_max);
    double sum = std::exp(ap - m);
    for (double a : neg_logit) sum += std::exp(a - m);
    const double lse = m + std::log(sum);
    total += lse - ap;
    if (want_grad) {
      // d/da_p = softmax_p - 1, d/da_k = softmax_k, each scaled by 1/B.
      const double coef_p = (std::exp(ap - lse) - 1.0) / B * scale / temperature;
      auto zp = z.row(p);
      auto dzp = dz.row(p);
      for (std::size_t j = 0; j < zu.size(); ++j) {
        grad_u[j] += coef_p * zp[j];
        dzp[j] += coef_p * zu[j];
      }
      for (std::size_t k = 0; k < K; ++k) neg_weight[k] += std::exp(neg_logit[k] - lse);
    }
  }
  if (want_grad) {
    for (std::size_t k = 0; k < K; ++k) {
      const double coef = neg_weight[k] / B * scale / temperature;
      auto zn = z.row(negatives[k]);
      auto dzn = dz.row(negatives[k]);
      for (std::size_t j = 0; j < zu.size(); ++j) {
        grad_u[j] += coef * zn[j];
        dzn[j] += coef * zu[j];
      }
    }
    auto dzu = dz.row(u);
    for (std::size_t j = 0; j < zu.size(); ++j) dzu[j] += grad_u[j];
  }
  return total / B;
}

std::vector<NodeId> sample_negatives(std::size_t n, NodeId u, std::size_t K, Rng& rng) {
  if (n < 2) throw DataError("sample_negatives: need at least 2 nodes");
  std::vector<NodeId> out(K);
  for (auto& v : out) v = uniform_other(n, u, rng);
  return out;
}

std::vector<NodeId> sample_negatives(std::size_t n, NodeId u, std::size_t K, std::uint64_t seed) {
  Rng rng(seed, u);
  return sample_negatives(n, u, K, rng);
}

PositiveAssignment assign_positives_sscl(const RelationBank& bank, const std::vector<RelationId>& relations,
                                         std::size_t B, std::uint64_t seed) {
  const std::size_t n = bank.num_nodes();
  require_b(B, n);
  if (relations.empty()) throw ConfigError("sscl: relation set is empty");
  const auto rels = enum_ordered(relations);
  PositiveAssignment a = empty_assignment(n);
  for (NodeId u = 0; u < n; ++u) {
    Rng rng(seed, u);
    sscl_for_node(bank, rels, B, u, rng, a.positives[u], a.provenance[u]);
    a.rule[u] = "sscl";
  }
  return a;
}

PositiveAssignment assign_positives_scl(const Graph& g, const LabelSplit& labels, std::size_t B, std::uint64_t seed) {
  const std::size_t n = g.num_nodes();
  require_b(B, n);
  const auto by_class = train_by_class(g, labels);
  std::vector<std::uint8_t> in_train(n, 0);
  for (NodeId u : labels.train) in_train[u] = 1;
  PositiveAssignment a = empty_assignment(n);
  for (NodeId u = 0; u < n; ++u) {
    Rng rng(seed, u);
    if (in_train[u])
      scl_for_node(g, by_class, B, u, rng, a.positives[u], a.provenance[u]);
    else
      fallback_fill(n, u, B, rng, a.positives[u], a.provenance[u]);
    a.rule[u] = "scl";
  }
  return a;
}

PositiveAssignment assign_positives_ceiling(const Graph& g, TaskKind kind, std::size_t B, std::uint64_t seed) {
  const std::size_t n = g.num_nodes();
  require_b(B, n);
  std::vector<std::vector<NodeId>> by_class;
  if (kind == TaskKind::NodeClassification) {
    by_class.resize(static_cast<std::size_t>(g.num_classes()));
    for (NodeId u = 0; u < n; ++u) by_class[static_cast<std::size_t>(g.labels()[u])].push_back(u);
  }
  PositiveAssignment a = empty_assignment(n);
  std::vector<NodeId> pool;
  for (NodeId u = 0; u < n; ++u) {
    Rng rng(seed, u);
    pool.clear();
    if (kind == TaskKind::NodeClassification) {
      for (NodeId v : by_class[static_cast<std::size_t>(g.labels()[u])])
        if (v != u) pool.push_back(v);
    } else {
      auto nb = g.neighbors(u);
      pool.assign(nb.begin(), nb.end());
    }
    if (pool.empty()) {
      fallback_fill(n, u, B, rng, a.positives[u], a.provenance[u]);
    } else {
      draw_from(pool, B, rng, a.positives[u]);
      a.provenance[u].assign(B, std::string(kTagCeiling));
    }
    a.rule[u] = "ceiling";
  }
  return a;
}

PositiveAssignment assign_positives_naive_tcl(const Graph& g, const LabelSplit& labels, const RelationBank& bank,
                                              const std::vector<RelationId>& relations, std::size_t B,
                                              std::uint64_t seed) {
  const std::size_t n = g.num_nodes();
  require_b(B, n);
  if (relations.empty()) throw ConfigError("naive tcl: relation set is empty");
  const auto rels = enum_ordered(relations);
  const auto by_class = train_by_class(g, labels);
  std::vector<std::uint8_t> in_train(n, 0);
  for (NodeId u : labels.train) in_train[u] = 1;
  PositiveAssignment a = empty_assignment(n);
  for (NodeId u = 0; u < n; ++u) {
    Rng rng(seed, u);
    if (in_train[u]) {
      scl_for_node(g, by_class, B, u, rng, a.positives[u], a.provenance[u]);
      a.rule[u] = "scl";
    } else {
      sscl_for_node(bank, rels, B, u, rng, a.positives[u], a.provenance[u]);
      a.rule[u] = "sscl";
    }
  }
  return a;
}

PositiveAssignment assign_positives_scl_links(const Graph& train_graph, std::size_t B, std::uint64_t seed) {
  const std::size_t n = train_graph.num_nodes();
  require_b(B, n);
  PositiveAssignment a = empty_assignment(n);
  for (NodeId u = 0; u < n; ++u) {
    Rng rng(seed, u);
    const auto nb = train_graph.neighbors(u);
    if (nb.empty()) {
      fallback_fill(n, u, B, rng, a.positives[u], a.provenance[u]);
    } else {
      draw_from(std::vector<NodeId>(nb.begin(), nb.end()), B, rng, a.positives[u]);
      a.provenance[u].assign(B, std::string(kTagLabel));
    }
    a.rule[u] = "scl";
  }
  return a;
}

PositiveAssignment assign_positives_naive_tcl_links(const Graph& train_graph, const RelationBank& bank,
                                                    const std::vector<RelationId>& relations, std::size_t B,
                                                    std::uint64_t seed) {
  const std::size_t n = train_graph.num_nodes();
  require_b(B, n);
  if (relations.empty()) throw ConfigError("naive tcl: relation set is empty");
  const auto rels = enum_ordered(relations);
  PositiveAssignment a = empty_assignment(n);
  for (NodeId u = 0; u < n; ++u) {
    Rng rng(seed, u);
    const auto nb = train_graph.neighbors(u);
    if (!nb.empty()) {
      draw_from(std::vector<NodeId>(nb.begin(), nb.end()), B, rng, a.positives[u]);
      a.provenance[u].assign(B, std::string(kTagLabel));
      a.rule[u] = "scl";
    } else {
      sscl_for_node(bank, rels, B, u, rng, a.positives[u], a.provenance[u]);
      a.rule[u] = "sscl";
    }
  }
  return a;
}

PositiveAssignment assign_positives_xtcl(const SamplerModel& model, const RelationBank& bank, std::size_t B,
                                         CandidatePolicy policy) {
  const std::size_t n = bank.num_nodes();
  require_b(B, n);
  PositiveAssignment a = empty_assignment(n);
  for (NodeId u = 0; u < n; ++u) {
    a.positives[u] = sample_positives_xtcl(model, bank, u, B, policy);
    a.provenance[u].assign(B, std::string(kTagSampler));
    a.rule[u] = "xtcl";
  }
  return a;
}

TrainResult train_embeddings(const Graph& g, const CsrMatrix& a_hat, const TrainConfig& config,
                             const PositiveSource& source) {
  if (config.B == 0 || config.K == 0) throw ConfigError("train: B and K must be >= 1");
  if (!(config.temperature > 0.0)) throw ConfigError("train: temperature must be > 0");
  if (config.epochs == 0) throw ConfigError("train: epochs must be >= 1");
  const std::size_t n = g.num_nodes();
  if (n < 2) throw DataError("train: graph needs at least 2 nodes");

  EncoderDims dims = config.dims;
  dims.input = g.attribute_dim();
  TrainResult result;
  result.params = init_params(dims, substream_seed(config.seed, "init"));
  AdamState adam = AdamState::zeros_like(result.params);
  const AdamOptions adam_opts{config.lr};
  const std::uint64_t neg_seed = substream_seed(config.seed, "negatives");
  const Matrix ax = propagate_input(a_hat, g.attributes());

  PositiveAssignment assignment = source.draw(0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch > 0 && source.resample_each_epoch) assignment = source.draw(epoch);
    if (assignment.num_nodes() != n) throw DataError("train: positive assignment size mismatch");

    ForwardCache cache;
    EmbeddingMatrix emb = gcn_forward_propagated(a_hat, ax, result.params, config.normalize, &cache);
    Matrix dz(emb.z.rows(), emb.z.cols());
    const std::uint64_t epoch_seed = substream_seed(neg_seed, "epoch-" + std::to_string(epoch));
    const double scale = 1.0 / static_cast<double>(n);
    CompensatedSum loss;
    for (NodeId u = 0; u < n; ++u) {
      Rng rng(epoch_seed, u);
      const auto negatives = sample_negatives(n, u, config.K, rng);
      loss.add(contrastive_loss_grad(emb.z, u, assignment.positives[u], negatives, config.temperature, scale, dz));
    }
    const double mean_loss = loss.value() * scale;
    result.loss_trace.push_back(mean_loss);
    if (!std::isfinite(mean_loss))
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
    EncoderGrads grads = gcn_backward(a_hat, result.params, cache, dz, config.normalize);
    adam_step(result.params, grads, adam, adam_opts);
  }
  result.embeddings = gcn_forward_propagated(a_hat, ax, result.params, config.normalize);
  return result;
}

}  // namespace taskcl
