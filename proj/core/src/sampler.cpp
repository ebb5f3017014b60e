#include "taskcl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "taskcl/error.hpp"
#include "taskcl/io.hpp"
#include "taskcl/rng.hpp"

namespace taskcl {

using nlohmann::json;

namespace {

std::uint64_t pair_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

constexpr int kSamplerVersion = 1;

}  // namespace

std::string_view task_name(TaskKind kind) { return kind == TaskKind::NodeClassification ? "nc" : "lp"; }

TaskKind parse_task(std::string_view name) {
  if (name == "nc") return TaskKind::NodeClassification;
  if (name == "lp") return TaskKind::LinkPrediction;
  throw ConfigError("unknown task \"" + std::string(name) + "\" (expected nc or lp)");
}

TaskSpec TaskSpec::node_classification(const Graph& g, const LabelSplit& split) {
  if (!g.has_labels()) throw DataError("node classification task requires labels");
  TaskSpec t;
  t.kind_ = TaskKind::NodeClassification;
  t.num_nodes_ = g.num_nodes();
  t.labeled_mask_.assign(t.num_nodes_, 0);
  t.labels_.assign(t.num_nodes_, -1);
  for (NodeId u : split.train) {
    if (u >= t.num_nodes_) throw DataError("label split references a node outside the graph");
    t.labeled_mask_[u] = 1;
    t.labels_[u] = g.labels()[u];
  }
  for (NodeId u = 0; u < t.num_nodes_; ++u)
    if (t.labeled_mask_[u]) t.labeled_.push_back(u);
  return t;
}

TaskSpec TaskSpec::link_prediction(const Graph& g, const EdgeSplit& split) {
  if (split.train.empty()) throw DataError("link prediction task requires training edges");
  TaskSpec t;
  t.kind_ = TaskKind::LinkPrediction;
  t.num_nodes_ = g.num_nodes();
  t.labeled_mask_.assign(t.num_nodes_, 0);
  for (auto [u, v] : split.train) {
    if (u >= t.num_nodes_ || v >= t.num_nodes_) throw DataError("edge split references a node outside the graph");
    t.labeled_mask_[u] = t.labeled_mask_[v] = 1;
    t.edges_.insert(pair_key(u, v));
  }
  for (NodeId u = 0; u < t.num_nodes_; ++u)
    if (t.labeled_mask_[u]) t.labeled_.push_back(u);
  return t;
}

TaskSpec TaskSpec::full_ground_truth(const Graph& g, TaskKind kind) {
  if (kind == TaskKind::NodeClassification) {
    LabelSplit all;
    for (NodeId u = 0; u < g.num_nodes(); ++u) all.train.push_back(u);
    return node_classification(g, all);
  }
  EdgeSplit all;
  all.train = g.edges();
  TaskSpec t = link_prediction(g, all);
  // Every node is "labeled" for link ground truth: a node without edges is
  // known to have no positives.
  t.labeled_mask_.assign(t.num_nodes_, 1);
  t.labeled_.clear();
  for (NodeId u = 0; u < t.num_nodes_; ++u) t.labeled_.push_back(u);
  return t;
}

bool TaskSpec::indicator(NodeId u, NodeId v) const {
  if (kind_ == TaskKind::NodeClassification) return labels_[u] >= 0 && labels_[u] == labels_[v];
  return edges_.contains(pair_key(u, v));
}

std::vector<LabeledPair> training_pairs(const TaskSpec& task, std::optional<std::size_t> neg_cap,
                                        std::uint64_t seed) {
  const auto& vl = task.labeled();
  if (vl.size() < 2) throw DataError("training_pairs: need at least 2 labeled nodes");
  std::vector<LabeledPair> positives;
  std::size_t num_negatives = 0;
  for (NodeId u : vl)
    for (NodeId v : vl) {
      if (u == v) continue;
      if (task.indicator(u, v))
        positives.push_back({u, v, 1});
      else
        ++num_negatives;
    }

  std::size_t keep_neg = num_negatives;
  if (neg_cap) keep_neg = std::min(num_negatives, *neg_cap * positives.size());

  // Merge positives with a selection-sampled (Knuth's algorithm S) subset of
  // negatives, preserving (u, v) order.
  std::vector<LabeledPair> pairs;
  pairs.reserve(positives.size() + keep_neg);
  Rng rng(seed);
  std::size_t remaining = num_negatives, need = keep_neg;
  for (NodeId u : vl)
    for (NodeId v : vl) {
      if (u == v) continue;
      if (task.indicator(u, v)) {
        pairs.push_back({u, v, 1});
        continue;
      }
      bool take = need == remaining ||
                  (need > 0 && rng.uniform01() * static_cast<double>(remaining) < static_cast<double>(need));
      --remaining;
      if (take) {
        pairs.push_back({u, v, 0});
        --need;
      }
    }
  return pairs;
}

FiringTable compute_firing(const std::vector<LabeledPair>& pairs, const RelationBank& bank,
                           const std::vector<RelationId>& relations) {
  FiringTable table;
  table.relations = relations;
  for (RelationId id : relations) {
    const auto& s = bank.sim(id);
    const auto& eta = bank.threshold(id).eta;
    std::vector<std::uint8_t> fired(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) fired[i] = fires(s.at(pairs[i].u, pairs[i].v), eta[pairs[i].u]);
    table.fired.push_back(std::move(fired));
  }
  return table;
}

std::vector<RelationPrecision> relation_precisions(const std::vector<LabeledPair>& pairs, const RelationBank& bank,
                                                   const std::vector<RelationId>& relations) {
  if (pairs.empty()) throw DataError("order_relations: no training pairs");
  const FiringTable table = compute_firing(pairs, bank, relations);
  std::vector<RelationPrecision> out;
  for (std::size_t r = 0; r < relations.size(); ++r) {
    std::size_t fired = 0, hit = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (table.fired[r][i]) {
        ++fired;
        hit += pairs[i].y;
      }
    const double precision = fired ? static_cast<double>(hit) / static_cast<double>(fired) : 0.0;
    out.push_back({relations[r], precision, fired});
  }
  std::stable_sort(out.begin(), out.end(), [](const RelationPrecision& a, const RelationPrecision& b) {
    if (a.precision != b.precision) return a.precision > b.precision;
    return a.id < b.id;
  });
  return out;
}

std::vector<RelationId> order_relations(const std::vector<LabeledPair>& pairs, const RelationBank& bank,
                                        const std::vector<RelationId>& relations) {
  std::vector<RelationId> order;
  for (const auto& rp : relation_precisions(pairs, bank, relations)) order.push_back(rp.id);
  return order;
}

const RelStump& SamplerModel::stump(RelationId id) const {
  for (const auto& s : stumps)
    if (s.id == id) return s;
  throw DataError("sampler model has no stump for " + std::string(relation_name(id)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void BoostState::refresh(const std::vector<LabeledPair>& pairs) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double p = sigmoid(margin[i]);
    grad[i] = p - static_cast<double>(pairs[i].y);
    hess[i] = p * (1.0 - p);
  }
}

double newton_weight(double grad_sum, double hess_sum, double lambda) {
  const double denom = hess_sum + lambda;
  if (denom == 0.0) return 0.0;
  return -grad_sum / denom;
}

SamplerModel fit_sampler(const std::vector<LabeledPair>& pairs, const RelationBank& bank, double lambda,
                         const std::vector<RelationId>& order, TaskKind task, std::vector<BoostRound>* trace) {
  if (pairs.empty()) throw DataError("fit_sampler: empty pair list");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("fit_sampler: lambda must be >= 0");
  if (order.empty()) throw ConfigError("fit_sampler: no relations to fit");

  SamplerModel model;
  model.order = order;
  model.lambda = lambda;
  model.task = task;

  const FiringTable table = compute_firing(pairs, bank, order);
  BoostState state(pairs.size());
  for (std::size_t tau = 0; tau < order.size(); ++tau) {
    state.refresh(pairs);
    const auto& fired = table.fired[tau];
    CompensatedSum g0, h0, g1, h1;
    std::size_t c0 = 0, c1 = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (fired[i]) {
        g1.add(state.grad[i]);
        h1.add(state.hess[i]);
        ++c1;
      } else {
        g0.add(state.grad[i]);
        h0.add(state.hess[i]);
        ++c0;
      }
    }
    const double w0 = newton_weight(g0.value(), h0.value(), lambda);
    const double w1 = newton_weight(g1.value(), h1.value(), lambda);
    if (!std::isfinite(w0) || !std::isfinite(w1)) throw NumericError("fit_sampler: non-finite stump weight");
    model.stumps.push_back({order[tau], w0, w1});
    model.thresholds.push_back(bank.threshold(order[tau]));

    if (trace) {
      BoostRound round{order[tau], g0.value(), h0.value(), g1.value(), h1.value(), c0, c1, w0, w1, 0.0,
                       std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
      round.surrogate = round.grad_sum0 * w0 + 0.5 * (round.hess_sum0 + lambda) * w0 * w0 + round.grad_sum1 * w1 +
                        0.5 * (round.hess_sum1 + lambda) * w1 * w1;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        round.min_grad = std::min(round.min_grad, state.grad[i]);
        round.max_grad = std::max(round.max_grad, state.grad[i]);
        round.min_hess = std::min(round.min_hess, state.hess[i]);
        round.max_hess = std::max(round.max_hess, state.hess[i]);
      }
      trace->push_back(round);
    }

    for (std::size_t i = 0; i < pairs.size(); ++i) state.margin[i] += fired[i] ? w1 : w0;
  }
  return model;
}

double pair_margin(const SamplerModel& model, const RelationBank& bank, NodeId u, NodeId v) {
  double margin = 0.0;
  for (std::size_t r = 0; r < model.order.size(); ++r) {
    const double s = bank.sim(model.order[r]).at(u, v);
    margin += fires(s, model.thresholds[r].eta[u]) ? model.stumps[r].w1 : model.stumps[r].w0;
  }
  return margin;
}

double score_pair(const SamplerModel& model, const RelationBank& bank, NodeId u, NodeId v) {
  if (u == v) throw DataError("score_pair: u must differ from v");
  return sigmoid(pair_margin(model, bank, u, v));
}

std::vector<NodeId> firing_candidates(const SamplerModel& model, const RelationBank& bank, NodeId u) {
  std::vector<NodeId> cands;
  for (std::size_t r = 0; r < model.order.size(); ++r) {
    const double eta = model.thresholds[r].eta[u];
    bank.sim(model.order[r]).for_each_in_row(u, [&](NodeId v, double s) {
      if (v != u && fires(s, eta)) cands.push_back(v);
    });
  }
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  return cands;
}

std::vector<NodeId> sample_positives_xtcl(const SamplerModel& model, const RelationBank& bank, NodeId u,
                                          std::size_t B, CandidatePolicy policy) {
  if (B == 0) throw ConfigError("sample_positives: B must be >= 1");
  const std::size_t n = bank.num_nodes();
  if (n < 2) throw DataError("sample_positives: graph needs at least 2 nodes");
  std::vector<NodeId> cands;
  if (policy == CandidatePolicy::Sparse) cands = firing_candidates(model, bank, u);
  if (cands.empty()) {
    cands.reserve(n - 1);
    for (NodeId v = 0; v < n; ++v)
      if (v != u) cands.push_back(v);
  }
  // Margins are compared instead of sigmoids so that saturated scores keep
  // their order; sigmoid is monotone.
  std::vector<std::pair<double, NodeId>> scored;
  scored.reserve(cands.size());
  for (NodeId v : cands) scored.emplace_back(pair_margin(model, bank, u, v), v);
  const std::size_t k = std::min(B, scored.size());
  auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
  std::vector<NodeId> out;
  out.reserve(B);
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  while (out.size() < B) out.push_back(out.front());
  return out;
}

std::vector<std::pair<RelationId, double>> importance_weights(const SamplerModel& model) {
  std::vector<std::pair<RelationId, double>> out;
  for (const auto& s : model.stumps) out.emplace_back(s.id, std::max(std::abs(s.w0), std::abs(s.w1)));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

void save_sampler(const SamplerModel& model, const std::filesystem::path& path) {
  json header;
  header["format"] = "taskcl-xgs";
  header["version"] = kSamplerVersion;
  header["task"] = task_name(model.task);
  header["lambda"] = model.lambda;
  header["order"] = json::array();
  header["stumps"] = json::array();
  for (const auto& s : model.stumps) {
    header["order"].push_back(relation_name(s.id));
    header["stumps"].push_back({{"relation", relation_name(s.id)}, {"w0", s.w0}, {"w1", s.w1}});
  }
  header["threshold_blocks"] = model.thresholds.size();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os << header.dump() << '\n';
  for (const auto& t : model.thresholds) {
    os.write("TCLV", 4);
    io::write_u32(os, static_cast<std::uint32_t>(t.id));
    io::write_f64(os, t.percentile);
    io::write_u64(os, t.eta.size());
    for (double x : t.eta) io::write_f64(os, x);
  }
  if (!os) throw DataError("write failed: " + path.string());
}

SamplerModel load_sampler(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  const std::string corrupt = "corrupt sampler file: " + path.string();
  std::string line;
  if (!std::getline(is, line)) throw DataError(corrupt);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw DataError(corrupt);
  }
  if (!header.is_object() || header.value("format", "") != "taskcl-xgs") throw DataError(corrupt);
  if (!header.contains("version") || !header["version"].is_number_integer() ||
      header["version"].get<int>() != kSamplerVersion)
    throw DataError("unsupported sampler version in " + path.string());

  SamplerModel model;
  try {
    model.task = parse_task(header.at("task").get<std::string>());
    model.lambda = header.at("lambda").get<double>();
    for (const auto& s : header.at("stumps")) {
      auto id = parse_relation(s.at("relation").get<std::string>());
      if (!id) throw DataError(corrupt);
      model.stumps.push_back({*id, s.at("w0").get<double>(), s.at("w1").get<double>()});
      model.order.push_back(*id);
    }
  } catch (const json::exception&) {
    throw DataError(corrupt);
  } catch (const ConfigError&) {
    throw DataError(corrupt);
  }
  const auto blocks = header.value("threshold_blocks", std::size_t{0});
  if (blocks != model.stumps.size()) throw DataError(corrupt);
  for (std::size_t b = 0; b < blocks; ++b) {
    char magic[4] = {};
    is.read(magic, 4);
    if (is.gcount() != 4 || std::string_view(magic, 4) != "TCLV") throw DataError(corrupt);
    ThresholdVector t;
    try {
      t.id = static_cast<RelationId>(io::read_u32(is, path.string()));
      t.percentile = io::read_f64(is, path.string());
      const auto n = io::read_u64(is, path.string());
      if (n > (std::uint64_t{1} << 32)) throw DataError(corrupt);
      t.eta.resize(n);
      for (auto& x : t.eta) x = io::read_f64(is, path.string());
    } catch (const DataError&) {
      throw DataError(corrupt);
    }
    if (t.id != model.order[b]) throw DataError(corrupt);
    model.thresholds.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError(corrupt);
  return model;
}

}  // namespace taskcl
