#include "taskcl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "taskcl/error.hpp"
#include "taskcl/io.hpp"
#include "taskcl/rng.hpp"
#include "taskcl/synth.hpp"

namespace taskcl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: " + (where.empty() ? std::string("root") : where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("config: unknown key \"" + (where.empty() ? key : where + "." + key) + "\"");
  }
}

std::string qualified(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

template <typename T>
void read_number(const json& j, const std::string& where, const char* key, T& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned()))
      throw ConfigError("config: \"" + qualified(where, key) + "\" must be a non-negative integer");
    out = v.get<T>();
  } else {
    if (!v.is_number()) throw ConfigError("config: \"" + qualified(where, key) + "\" must be a number");
    out = v.get<T>();
  }
}

std::string read_string(const json& j, const std::string& where, const char* key) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError("config: \"" + qualified(where, key) + "\" must be a string");
  return v.get<std::string>();
}

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(std::string("config: ") + name + " must be >= 1");
}

std::uint64_t graph_fingerprint(const Graph& g) {
  std::string bytes;
  bytes.reserve(g.num_edges() * 8 + g.attributes().size() * 8 + 16);
  auto put = [&](const void* p, std::size_t len) { bytes.append(static_cast<const char*>(p), len); };
  const std::uint64_t n = g.num_nodes();
  put(&n, sizeof n);
  for (const auto& [u, v] : g.edges()) {
    put(&u, sizeof u);
    put(&v, sizeof v);
  }
  put(g.attributes().data().data(), g.attributes().size() * sizeof(double));
  return fnv1a64(bytes);
}

std::uint64_t label_fingerprint(const Graph& g, const LabelSplit* labels) {
  if (labels == nullptr || !g.has_labels()) return 0;
  std::string bytes;
  for (NodeId u : labels->train) {
    const int y = g.labels()[u];
    bytes.append(reinterpret_cast<const char*>(&u), sizeof u);
    bytes.append(reinterpret_cast<const char*>(&y), sizeof y);
  }
  return fnv1a64(bytes);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string relation_fingerprint(RelationId id, const RelationOptions& opts, std::uint64_t graph_fp,
                                 std::uint64_t label_fp) {
  std::ostringstream os;
  os << relation_name(id) << '|' << (opts.mode == SimMode::Sparse ? "sparse" : "dense") << '|' << graph_fp;
  if (id == RelationId::PageRank)
    os << '|' << opts.pagerank.alpha << '|' << opts.pagerank.tol << '|' << opts.pagerank.max_iter;
  if (requires_labels(id)) os << '|' << label_fp;
  return hex64(fnv1a64(os.str()));
}

json relation_stats(const SimMatrix& s, const ThresholdVector& t, const std::string& fingerprint) {
  double lo = 1.0, hi = 0.0;
  std::size_t nnz = 0;
  for (NodeId u = 0; u < s.size(); ++u)
    s.for_each_in_row(u, [&](NodeId, double x) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      nnz += x != 0.0;
    });
  if (s.stored() == 0) lo = hi = 0.0;
  CompensatedSum eta;
  for (double e : t.eta) eta.add(e);
  return json{{"name", relation_name(s.id())},
              {"file", relation_cache_path("", s.id()).string()},
              {"storage", s.is_sparse() ? "sparse" : "dense"},
              {"nnz", nnz},
              {"min", lo},
              {"max", hi},
              {"percentile", t.percentile},
              {"mean_threshold", t.eta.empty() ? 0.0 : eta.value() / static_cast<double>(t.eta.size())},
              {"converged", s.meta().converged},
              {"fingerprint", fingerprint}};
}

void check_embedding_rows(const Matrix& z, std::size_t n) {
  if (z.rows() != n)
    throw DataError("embeddings have " + std::to_string(z.rows()) + " rows, graph has " + std::to_string(n) + " nodes");
}

}  // namespace

// ---------------------------------------------------------------- RunConfig

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "", {"graph", "task", "relations", "mode", "seed", "out", "cache", "sampler", "train", "eval"});
  if (j.contains("graph")) c.graph = read_string(j, "", "graph");
  if (j.contains("task")) c.task = parse_task(read_string(j, "", "task"));
  if (j.contains("relations")) {
    const json& r = j.at("relations");
    if (r.is_string()) {
      c.relations = parse_relation_list(r.get<std::string>());
    } else if (r.is_array()) {
      std::string joined;
      for (const auto& e : r) {
        if (!e.is_string()) throw ConfigError("config: \"relations\" entries must be strings");
        joined += (joined.empty() ? "" : ",") + e.get<std::string>();
      }
      if (!joined.empty()) c.relations = parse_relation_list(joined);
    } else {
      throw ConfigError("config: \"relations\" must be a string or an array of strings");
    }
  }
  if (j.contains("mode")) {
    const std::string m = read_string(j, "", "mode");
    if (m == "sparse")
      c.mode = SimMode::Sparse;
    else if (m == "dense")
      c.mode = SimMode::Dense;
    else
      throw ConfigError("config: \"mode\" must be sparse or dense");
  }
  read_number(j, "", "seed", c.seed);
  if (j.contains("out")) c.out = read_string(j, "", "out");
  if (j.contains("cache")) c.cache = read_string(j, "", "cache");

  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    check_keys(s, "sampler", {"lambda", "percentile", "neg_cap", "candidates"});
    read_number(s, "sampler", "lambda", c.lambda);
    read_number(s, "sampler", "percentile", c.percentile);
    read_number(s, "sampler", "neg_cap", c.neg_cap);
    if (s.contains("candidates")) {
      const std::string p = read_string(s, "sampler", "candidates");
      if (p == "sparse")
        c.candidates = CandidatePolicy::Sparse;
      else if (p == "full")
        c.candidates = CandidatePolicy::Full;
      else
        throw ConfigError("config: \"sampler.candidates\" must be sparse or full");
    }
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train", {"strategy", "B", "K", "epochs", "lr", "temperature", "normalize", "hidden", "dim"});
    if (t.contains("strategy")) c.strategy = parse_strategy(read_string(t, "train", "strategy"));
    read_number(t, "train", "B", c.B);
    read_number(t, "train", "K", c.K);
    read_number(t, "train", "epochs", c.epochs);
    read_number(t, "train", "lr", c.lr);
    read_number(t, "train", "temperature", c.temperature);
    if (t.contains("normalize")) {
      if (!t.at("normalize").is_boolean()) throw ConfigError("config: \"train.normalize\" must be a boolean");
      c.normalize = t.at("normalize").get<bool>();
    }
    read_number(t, "train", "hidden", c.hidden);
    read_number(t, "train", "dim", c.dim);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval", {"train_fraction", "l2", "lr", "epochs"});
    read_number(e, "eval", "train_fraction", c.train_fraction);
    read_number(e, "eval", "l2", c.logreg.l2);
    read_number(e, "eval", "lr", c.logreg.lr);
    read_number(e, "eval", "epochs", c.logreg.epochs);
  }

  if (!(c.lambda >= 0.0)) throw ConfigError("config: sampler.lambda must be >= 0");
  if (!(c.percentile > 0.0 && c.percentile < 100.0)) throw ConfigError("config: sampler.percentile must be in (0, 100)");
  require_positive(c.B, "train.B");
  require_positive(c.K, "train.K");
  require_positive(c.epochs, "train.epochs");
  require_positive(c.hidden, "train.hidden");
  require_positive(c.dim, "train.dim");
  if (!(c.temperature > 0.0)) throw ConfigError("config: train.temperature must be > 0");
  if (!(c.lr >= 0.0)) throw ConfigError("config: train.lr must be >= 0");
  if (c.train_fraction != 0.0 && !(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw ConfigError("config: eval.train_fraction must be in (0, 1)");
  return c;
}

json to_json(const RunConfig& c) {
  json rel = json::array();
  for (RelationId id : c.relations) rel.push_back(relation_name(id));
  return json{{"graph", c.graph.generic_string()},
              {"task", task_name(c.task)},
              {"relations", rel},
              {"mode", c.mode == SimMode::Sparse ? "sparse" : "dense"},
              {"seed", c.seed},
              {"out", c.out.generic_string()},
              {"cache", c.cache.generic_string()},
              {"sampler",
               {{"lambda", c.lambda},
                {"percentile", c.percentile},
                {"neg_cap", c.neg_cap},
                {"candidates", c.candidates == CandidatePolicy::Sparse ? "sparse" : "full"}}},
              {"train",
               {{"strategy", strategy_name(c.strategy)},
                {"B", c.B},
                {"K", c.K},
                {"epochs", c.epochs},
                {"lr", c.lr},
                {"temperature", c.temperature},
                {"normalize", c.normalize},
                {"hidden", c.hidden},
                {"dim", c.dim}}},
              {"eval",
               {{"train_fraction", c.train_fraction},
                {"l2", c.logreg.l2},
                {"lr", c.logreg.lr},
                {"epochs", c.logreg.epochs}}}};
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(to_json(cfg).dump())); }

std::vector<RelationId> default_relations(TaskKind kind) {
  std::vector<RelationId> out;
  for (RelationId id : kAllRelations)
    if (kind == TaskKind::NodeClassification || !requires_labels(id)) out.push_back(id);
  return out;
}

double default_train_fraction(TaskKind kind) { return kind == TaskKind::NodeClassification ? 0.1 : 0.6; }

fs::path resolve_cache_dir(const fs::path& configured, const fs::path& out) {
  if (const char* env = std::getenv("TASKCL_CACHE"); env != nullptr && *env != '\0') return env;
  if (!configured.empty()) return configured;
  return out / "cache";
}

Seeds derive_seeds(std::uint64_t root) {
  return {root,
          substream_seed(root, "split"),
          substream_seed(root, "sampler"),
          substream_seed(root, "negatives"),
          substream_seed(root, "init"),
          substream_seed(root, "positives")};
}

json to_json(const Seeds& s) {
  return json{{"root", s.root},           {"split", s.split}, {"sampler", s.sampler},
              {"negatives", s.negatives}, {"init", s.init},   {"positives", s.positives}};
}

// ---------------------------------------------------------------- splits

Split make_split(const Graph& g, TaskKind kind, double train_fraction, std::uint64_t seed) {
  Split s;
  s.kind = kind;
  if (kind == TaskKind::NodeClassification)
    s.labels = split_labels(g, train_fraction, seed);
  else
    s.edges = split_edges(g, train_fraction, seed);
  return s;
}

void save_split(const Split& split, const fs::path& path) {
  json j{{"task", task_name(split.kind)}};
  auto edges_json = [](const std::vector<Edge>& es) {
    json a = json::array();
    for (auto [u, v] : es) a.push_back({u, v});
    return a;
  };
  if (split.labels) {
    j["seed"] = split.labels->seed;
    j["train"] = split.labels->train;
    j["test"] = split.labels->test;
  } else if (split.edges) {
    j["seed"] = split.edges->seed;
    j["train"] = edges_json(split.edges->train);
    j["test_positive"] = edges_json(split.edges->test_positive);
    j["test_negative"] = edges_json(split.edges->test_negative);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write split " + path.string());
  os << j.dump() << '\n';
}

Split load_split(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open split " + path.string());
  Split s;
  try {
    const json j = json::parse(is);
    s.kind = parse_task(j.at("task").get<std::string>());
    auto edges_of = [](const json& a) {
      std::vector<Edge> es;
      for (const auto& e : a) es.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
      return es;
    };
    if (s.kind == TaskKind::NodeClassification) {
      LabelSplit ls;
      ls.seed = j.at("seed").get<std::uint64_t>();
      ls.train = j.at("train").get<std::vector<NodeId>>();
      ls.test = j.at("test").get<std::vector<NodeId>>();
      s.labels = std::move(ls);
    } else {
      EdgeSplit es;
      es.seed = j.at("seed").get<std::uint64_t>();
      es.train = edges_of(j.at("train"));
      es.test_positive = edges_of(j.at("test_positive"));
      es.test_negative = edges_of(j.at("test_negative"));
      s.edges = std::move(es);
    }
  } catch (const json::exception& e) {
    throw DataError("corrupt split file " + path.string() + ": " + e.what());
  }
  return s;
}

TaskData bind_task(const Graph& g, const Split& split) {
  if (split.kind == TaskKind::NodeClassification) {
    if (!split.labels) throw DataError("node classification split has no label split");
    for (NodeId u : split.labels->train)
      if (u >= g.num_nodes()) throw DataError("split references node " + std::to_string(u) + " outside the graph");
    for (NodeId u : split.labels->test)
      if (u >= g.num_nodes()) throw DataError("split references node " + std::to_string(u) + " outside the graph");
    return TaskData{g, g, split, TaskSpec::node_classification(g, *split.labels)};
  }
  if (!split.edges) throw DataError("link prediction split has no edge split");
  Graph train_graph = g.with_edges(split.edges->train);
  TaskSpec task = TaskSpec::link_prediction(train_graph, *split.edges);
  return TaskData{g, std::move(train_graph), split, std::move(task)};
}

// ---------------------------------------------------------------- relations

RelationBank relations_with_cache(const TaskData& td, const std::vector<RelationId>& ids, const RelationOptions& opts,
                                  const fs::path& cache_dir, const fs::path& source, bool force,
                                  RelationCacheStats* stats) {
  const Graph& g = td.train_graph;
  const std::uint64_t graph_fp = graph_fingerprint(g);
  const std::uint64_t label_fp = label_fingerprint(g, td.labels());
  const fs::path index_path = cache_dir / "relations.json";

  json index = json::object();
  if (fs::exists(index_path)) {
    std::ifstream is(index_path);
    try {
      index = json::parse(is);
    } catch (const json::parse_error&) {
      index = json::object();
    }
    if (!index.is_object() || !index.contains("relations") || !index.at("relations").is_object())
      index = json::object();
  }
  if (!index.contains("relations")) index["relations"] = json::object();

  fs::file_time_type source_time{};
  const bool have_source = !source.empty() && fs::exists(source);
  if (have_source) source_time = fs::last_write_time(source);

  RelationBank bank;
  RelationCacheStats local;
  std::optional<SimMatrix> attr_dist;
  for (RelationId id : ids) {
    const std::string name(relation_name(id));
    if (requires_labels(id) && (td.labels() == nullptr || !g.has_labels()))
      throw DataError("relation " + name + ": relation requires labels");
    const std::string fp = relation_fingerprint(id, opts, graph_fp, label_fp);
    const fs::path file = relation_cache_path(cache_dir, id);
    bool reuse = false;
    if (!force && fs::exists(file) && index["relations"].contains(name) &&
        index["relations"][name].value("fingerprint", "") == fp)
      reuse = !have_source || fs::last_write_time(file) >= source_time;

    std::optional<SimMatrix> sim;
    if (reuse) {
      try {
        sim.emplace(load_relation(cache_dir, id));
        reuse = sim->size() == g.num_nodes() && sim->id() == id;
      } catch (const Error&) {
        reuse = false;
      }
    }
    if (!reuse) {
      const SimMatrix* ad = nullptr;
      if (id == RelationId::AttrLabelDist) {
        if (bank.contains(RelationId::AttrDist1)) {
          ad = &bank.sim(RelationId::AttrDist1);
        } else {
          attr_dist.emplace(attr_dist_sim(g, 1, opts.mode));
          ad = &*attr_dist;
        }
      }
      try {
        sim.emplace(compute_relation(g, id, td.labels(), opts, ad));
      } catch (const Error& e) {
        const std::string msg = e.what();
        const std::string prefixed = msg.rfind("relation " + name, 0) == 0 ? msg : "relation " + name + ": " + msg;
        switch (e.kind()) {
          case ErrorKind::Config: throw ConfigError(prefixed);
          case ErrorKind::Data: throw DataError(prefixed);
          case ErrorKind::Numeric: throw NumericError(prefixed);
        }
      }
      save_relation(cache_dir, *sim);
      ++local.computed;
    } else {
      ++local.reused;
    }
    ThresholdVector t = per_node_threshold(*sim, opts.percentile);
    index["relations"][name] = relation_stats(*sim, t, fp);
    bank.add(std::move(*sim), std::move(t));
  }
  index["num_nodes"] = g.num_nodes();
  fs::create_directories(cache_dir);
  std::ofstream os(index_path);
  os << index.dump(2) << '\n';
  if (stats) *stats = local;
  return bank;
}

// ---------------------------------------------------------------- sampler

SamplerFit train_sampler(const TaskData& td, const RelationBank& bank, const std::vector<RelationId>& relations,
                         double lambda, std::size_t neg_cap, std::uint64_t seed) {
  std::optional<std::size_t> cap;
  if (td.task.kind() == TaskKind::LinkPrediction && neg_cap > 0) cap = neg_cap;
  const auto pairs = training_pairs(td.task, cap, seed);
  SamplerFit fit;
  fit.num_pairs = pairs.size();
  fit.precisions = relation_precisions(pairs, bank, relations);
  const auto order = order_relations(pairs, bank, relations);
  fit.model = fit_sampler(pairs, bank, lambda, order, td.task.kind(), &fit.trace);
  return fit;
}

PositiveSource positive_source(Strategy strategy, const TaskData& td, const RelationBank& bank,
                               const std::vector<RelationId>& relations, const SamplerModel* model, std::size_t B,
                               std::uint64_t seed, CandidatePolicy policy) {
  const bool lp = td.task.kind() == TaskKind::LinkPrediction;
  auto epoch_seed = [seed](std::uint64_t epoch) { return substream_seed(seed, "epoch-" + std::to_string(epoch)); };
  switch (strategy) {
    case Strategy::SSCL:
      return {[&bank, relations, B, epoch_seed](std::uint64_t e) {
                return assign_positives_sscl(bank, relations, B, epoch_seed(e));
              },
              true};
    case Strategy::SCL:
      if (lp) return {[&td, B, seed](std::uint64_t) { return assign_positives_scl_links(td.train_graph, B, seed); }};
      return {[&td, B, seed](std::uint64_t) { return assign_positives_scl(td.graph, *td.labels(), B, seed); }};
    case Strategy::CeilingSCL:
      return {[&td, B, seed](std::uint64_t) { return assign_positives_ceiling(td.graph, td.task.kind(), B, seed); }};
    case Strategy::NaiveTCL:
      if (lp)
        return {[&td, &bank, relations, B, epoch_seed](std::uint64_t e) {
                  return assign_positives_naive_tcl_links(td.train_graph, bank, relations, B, epoch_seed(e));
                },
                true};
      return {[&td, &bank, relations, B, epoch_seed](std::uint64_t e) {
                return assign_positives_naive_tcl(td.graph, *td.labels(), bank, relations, B, epoch_seed(e));
              },
              true};
    case Strategy::XTCL:
      if (model == nullptr) throw ConfigError("xtcl strategy needs a trained sampler");
      return {[model, &bank, B, policy](std::uint64_t) { return assign_positives_xtcl(*model, bank, B, policy); }};
  }
  throw ConfigError("unknown strategy");
}

// ---------------------------------------------------------------- eval

EvalReport evaluate(const TaskData& td, const Matrix& z, const LogRegOptions& opts) {
  check_embedding_rows(z, td.graph.num_nodes());
  EvalReport r;
  if (td.task.kind() == TaskKind::NodeClassification) {
    const auto& ls = *td.labels();
    const auto& y = td.graph.labels();
    std::vector<int> y_train, y_test;
    for (NodeId u : ls.train) y_train.push_back(y[u]);
    for (NodeId u : ls.test) y_test.push_back(y[u]);
    const Classifier clf = fit_logreg(gather_rows(z, ls.train), y_train, opts, td.graph.num_classes());
    r.metric = "accuracy";
    r.value = accuracy(clf, gather_rows(z, ls.test), y_test);
    r.n_train = ls.train.size();
    r.n_test = ls.test.size();
  } else {
    const auto& es = *td.split.edges;
    r.metric = "auc";
    r.value = link_auc(z, es.test_positive, es.test_negative);
    r.n_train = es.train.size();
    r.n_test = es.test_positive.size() + es.test_negative.size();
  }
  return r;
}

json to_json(const EvalReport& r) {
  return json{{"metric", r.metric}, {"value", r.value}, {"n_train", r.n_train}, {"n_test", r.n_test}};
}

// ---------------------------------------------------------------- pipeline

namespace {

TrainConfig train_config_of(const RunConfig& cfg) {
  TrainConfig tc;
  tc.B = cfg.B;
  tc.K = cfg.K;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.seed = cfg.seed;
  tc.temperature = cfg.temperature;
  tc.normalize = cfg.normalize;
  tc.dims.hidden = cfg.hidden;
  tc.dims.output = cfg.dim;
  return tc;
}

bool needs_sampler(Strategy s) { return s == Strategy::XTCL; }

json importance_json(const std::vector<std::pair<RelationId, double>>& w) {
  json a = json::array();
  for (auto [id, v] : w) a.push_back({{"relation", relation_name(id)}, {"weight", v}});
  return a;
}

template <typename F>
auto run_stage(const char* stage, json& timing, F&& f) {
  const auto t0 = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timing[stage] = seconds_since(t0);
    } else {
      auto out = f();
      timing[stage] = seconds_since(t0);
      return out;
    }
  } catch (const Error& e) {
    const std::string msg = std::string("stage ") + stage + ": " + e.what();
    switch (e.kind()) {
      case ErrorKind::Config: throw ConfigError(msg);
      case ErrorKind::Data: throw DataError(msg);
      case ErrorKind::Numeric: throw NumericError(msg);
    }
    throw;
  }
}

}  // namespace

json run_pipeline(const RunConfig& cfg_in, const fs::path& manifest_dir) {
  RunConfig cfg = cfg_in;
  if (cfg.graph.empty()) throw ConfigError("config: \"graph\" is required");
  fs::path manifest = cfg.graph;
  if (manifest.is_relative() && !manifest_dir.empty()) manifest = manifest_dir / manifest;
  if (cfg.relations.empty()) cfg.relations = default_relations(cfg.task);
  const double fraction = cfg.train_fraction > 0.0 ? cfg.train_fraction : default_train_fraction(cfg.task);
  const Seeds seeds = derive_seeds(cfg.seed);
  const fs::path cache = resolve_cache_dir(cfg.cache, cfg.out);
  fs::create_directories(cfg.out);

  json timing = json::object();
  const Graph g = run_stage("load", timing, [&] { return load_graph(manifest); });
  const fs::path split_path = cfg.out / "split.json";
  const TaskData td = run_stage("split", timing, [&] {
    const Split split = make_split(g, cfg.task, fraction, seeds.split);
    save_split(split, split_path);
    return bind_task(g, split);
  });

  RelationOptions ropts;
  ropts.mode = cfg.mode;
  ropts.percentile = cfg.percentile;
  const RelationBank bank = run_stage(
      "relations", timing, [&] { return relations_with_cache(td, cfg.relations, ropts, cache, manifest, false); });

  std::optional<SamplerFit> fit;
  const fs::path sampler_path = cfg.out / "sampler.xgs";
  // The sampler is trained for every strategy so importance weights are
  // always reported; only XTCL consumes it for positives.
  fit = run_stage("sampler", timing, [&] {
    SamplerFit f = train_sampler(td, bank, cfg.relations, cfg.lambda, cfg.neg_cap, seeds.sampler);
    save_sampler(f.model, sampler_path);
    return f;
  });

  const PositiveSource source = positive_source(cfg.strategy, td, bank, cfg.relations,
                                                needs_sampler(cfg.strategy) ? &fit->model : nullptr, cfg.B,
                                                seeds.positives, cfg.candidates);
  const double precision = run_stage("positives", timing, [&] {
    return positive_precision(source.draw(0), TaskSpec::full_ground_truth(td.graph, cfg.task));
  });

  const CsrMatrix a_hat = normalized_adjacency(td.train_graph);
  const TrainResult trained =
      run_stage("embed", timing, [&] { return train_embeddings(td.train_graph, a_hat, train_config_of(cfg), source); });
  const fs::path emb_path = cfg.out / "embeddings.tclm";
  const fs::path loss_path = cfg.out / "loss.csv";
  const fs::path params_path = cfg.out / "encoder.ckpt";
  io::save_tclm(emb_path, trained.embeddings.z);
  write_loss_csv(trained.loss_trace, loss_path);
  save_params(trained.params, params_path);

  const EvalReport ev = run_stage("eval", timing, [&] { return evaluate(td, trained.embeddings.z, cfg.logreg); });

  json report;
  report["config"] = to_json(cfg);
  report["config_hash"] = config_hash(cfg);
  report["seeds"] = to_json(seeds);
  report["graph"] = {{"name", g.name()}, {"nodes", g.num_nodes()}, {"edges", g.num_edges()}};
  report["task"] = task_name(cfg.task);
  report["strategy"] = strategy_name(cfg.strategy);
  report["metrics"] = to_json(ev);
  report["metrics"]["seed"] = cfg.seed;
  report["positive_precision"] = precision;
  json order = json::array();
  for (RelationId id : fit->model.order) order.push_back(relation_name(id));
  report["sampler"] = {{"order", order},
                       {"pairs", fit->num_pairs},
                       {"lambda", fit->model.lambda},
                       {"importance_weights", importance_json(importance_weights(fit->model))}};
  report["loss"] = {{"first", trained.loss_trace.front()}, {"last", trained.loss_trace.back()}};
  report["artifacts"] = {{"split", split_path.generic_string()},
                         {"relations_index", (cache / "relations.json").generic_string()},
                         {"sampler", sampler_path.generic_string()},
                         {"embeddings", emb_path.generic_string()},
                         {"encoder", params_path.generic_string()},
                         {"loss_trace", loss_path.generic_string()}};
  report["timing"] = timing;
  std::ofstream os(cfg.out / "report.json");
  os << report.dump(2) << '\n';
  return report;
}

ExperimentResult run_experiment(const Graph& g, const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (cfg.relations.empty()) cfg.relations = default_relations(cfg.task);
  const double fraction = cfg.train_fraction > 0.0 ? cfg.train_fraction : default_train_fraction(cfg.task);
  const Seeds seeds = derive_seeds(cfg.seed);
  const TaskData td = bind_task(g, make_split(g, cfg.task, fraction, seeds.split));
  RelationOptions ropts;
  ropts.mode = cfg.mode;
  ropts.percentile = cfg.percentile;
  const RelationBank bank = compute_relations(td.train_graph, cfg.relations, td.labels(), ropts);
  const SamplerFit fit = train_sampler(td, bank, cfg.relations, cfg.lambda, cfg.neg_cap, seeds.sampler);
  const PositiveSource source =
      positive_source(cfg.strategy, td, bank, cfg.relations, &fit.model, cfg.B, seeds.positives, cfg.candidates);
  ExperimentResult r;
  r.positive_precision = positive_precision(source.draw(0), TaskSpec::full_ground_truth(td.graph, cfg.task));
  const CsrMatrix a_hat = normalized_adjacency(td.train_graph);
  const TrainResult trained = train_embeddings(td.train_graph, a_hat, train_config_of(cfg), source);
  r.eval = evaluate(td, trained.embeddings.z, cfg.logreg);
  r.importance = importance_weights(fit.model);
  r.loss_trace = trained.loss_trace;
  return r;
}

// ---------------------------------------------------------------- bench

std::vector<BenchRow> run_bench(const std::vector<std::size_t>& sizes, const std::vector<RelationId>& relations,
                                std::uint64_t seed, std::size_t repeats) {
  if (repeats == 0) throw ConfigError("bench: repeats must be >= 1");
  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    double best_gen = 1e300, best_rel = 1e300, best_fit = 1e300, best_pos = 1e300;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      auto t0 = Clock::now();
      const Graph g = random_graph(n, substream_seed(seed, "graph-" + std::to_string(n)));
      best_gen = std::min(best_gen, seconds_since(t0));

      const TaskData td = bind_task(g, make_split(g, TaskKind::NodeClassification, 0.1, substream_seed(seed, "split")));
      t0 = Clock::now();
      const RelationBank bank = compute_relations(td.train_graph, relations, td.labels(), {});
      best_rel = std::min(best_rel, seconds_since(t0));

      t0 = Clock::now();
      const SamplerFit fit = train_sampler(td, bank, relations, 1.0, 0, substream_seed(seed, "sampler"));
      best_fit = std::min(best_fit, seconds_since(t0));

      t0 = Clock::now();
      const auto assignment = assign_positives_xtcl(fit.model, bank, 5);
      best_pos = std::min(best_pos, seconds_since(t0));
      if (assignment.num_nodes() != n) throw DataError("bench: assignment size mismatch");
    }
    rows.push_back({n, "generate", best_gen});
    rows.push_back({n, "relations", best_rel});
    rows.push_back({n, "sampler", best_fit});
    rows.push_back({n, "positives", best_pos});
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "n,phase,seconds\n";
  os << std::setprecision(9);
  for (const auto& r : rows) os << r.n << ',' << r.phase << ',' << r.seconds << '\n';
}

void write_loss_csv(const std::vector<double>& trace, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < trace.size(); ++e) os << e << ',' << trace[e] << '\n';
}

void write_labels(const std::vector<int>& labels, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  for (std::size_t u = 0; u < labels.size(); ++u) os << u << ' ' << labels[u] << '\n';
}

}  // namespace taskcl
