#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "taskcl/error.hpp"
#include "taskcl/io.hpp"
#include "taskcl/pipeline.hpp"
#include "taskcl/rng.hpp"
#include "taskcl/synth.hpp"

namespace taskcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Options shared by commands that need a graph, a task split and relations.
struct TaskOpts {
  std::string graph;
  std::string task = "nc";
  std::string split;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::string relations;
  std::string cache;
  bool sparse = false;
  bool dense = false;
  double percentile = 99.0;
  bool dense_by_default = false;

  TaskKind kind() const { return parse_task(task); }
  SimMode mode() const {
    if (sparse && dense) throw ConfigError("--sparse and --dense are mutually exclusive");
    if (dense) return SimMode::Dense;
    if (sparse) return SimMode::Sparse;
    return dense_by_default ? SimMode::Dense : SimMode::Sparse;
  }
  std::vector<RelationId> relation_ids() const {
    return relations.empty() ? default_relations(kind()) : parse_relation_list(relations);
  }
  fs::path cache_dir() const { return cache.empty() ? resolve_cache_dir("", ".") : fs::path(cache); }
  RelationOptions relation_options() const {
    RelationOptions o;
    o.mode = mode();
    o.percentile = percentile;
    return o;
  }
};

void add_graph(CLI::App* cmd, TaskOpts& o) {
  cmd->add_option("--graph", o.graph, "Graph manifest (JSON)")->required();
}

void add_task(CLI::App* cmd, TaskOpts& o) {
  cmd->add_option("--task", o.task, "Downstream task: nc or lp")->check(CLI::IsMember({"nc", "lp"}));
  cmd->add_option("--split", o.split, "Split file from `taskcl split`; derived from the seed when absent");
  cmd->add_option("--fraction", o.fraction, "Train fraction when deriving a split (default 0.1 nc, 0.6 lp)");
  cmd->add_option("--seed", o.seed, "Root seed");
}

void add_relations(CLI::App* cmd, TaskOpts& o) {
  cmd->add_option("--relations", o.relations, "Comma-separated relation names or \"all\"");
  cmd->add_option("--cache", o.cache, "Similarity cache directory (default $TASKCL_CACHE or ./cache)");
  cmd->add_flag("--sparse", o.sparse, "Sparse similarity storage (default)");
  cmd->add_flag("--dense", o.dense, "Dense similarity storage");
  cmd->add_option("--percentile", o.percentile, "Threshold percentile")->check(CLI::Range(0.0, 100.0));
}

TaskData load_task(const TaskOpts& o, const Graph& g) {
  if (!o.split.empty()) {
    Split s = load_split(o.split);
    if (s.kind != o.kind()) throw ConfigError("split file is for task " + std::string(task_name(s.kind)));
    return bind_task(g, s);
  }
  const double f = o.fraction > 0.0 ? o.fraction : default_train_fraction(o.kind());
  return bind_task(g, make_split(g, o.kind(), f, derive_seeds(o.seed).split));
}

void require_labels_for(const Graph& g, const std::vector<RelationId>& ids) {
  if (g.has_labels()) return;
  for (RelationId id : ids)
    if (requires_labels(id)) throw DataError("relation " + std::string(relation_name(id)) + " needs node labels");
}

RelationBank load_bank(const TaskOpts& o, const TaskData& td, const std::vector<RelationId>& ids, bool force = false,
                       RelationCacheStats* stats = nullptr) {
  return relations_with_cache(td, ids, o.relation_options(), o.cache_dir(), o.graph, force, stats);
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t mult = 1;
    if (item.back() == 'k' || item.back() == 'K') {
      mult = 1000;
      item.pop_back();
    }
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v) * mult);
    } catch (const std::exception&) {
      throw ConfigError("--sizes: cannot parse \"" + item + "\"");
    }
  }
  if (out.empty()) throw ConfigError("--sizes: empty list");
  return out;
}

void write_json(const json& j, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << j.dump(2) << '\n';
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw DataError("cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Task-aware contrastive node embeddings"};
  app.name("taskcl");
  app.require_subcommand(1);
  app.set_version_flag("--version", "taskcl 0.1.0");

  // relations
  TaskOpts rel;
  bool rel_force = false;
  auto* c_rel = app.add_subcommand("relations", "Compute similarity relations into the cache");
  add_graph(c_rel, rel);
  add_task(c_rel, rel);
  add_relations(c_rel, rel);
  c_rel->add_flag("--force", rel_force, "Recompute even when cached");

  // split
  TaskOpts sp;
  std::string sp_out;
  auto* c_split = app.add_subcommand("split", "Write a train/test split");
  add_graph(c_split, sp);
  add_task(c_split, sp);
  c_split->add_option("--out", sp_out, "Output split file (JSON)")->required();

  // train-sampler
  TaskOpts ts;
  double ts_lambda = 1.0;
  std::size_t ts_neg_cap = 5;
  std::string ts_out, ts_trace;
  auto* c_ts = app.add_subcommand("train-sampler", "Fit the boosted relation sampler");
  add_graph(c_ts, ts);
  add_task(c_ts, ts);
  add_relations(c_ts, ts);
  c_ts->add_option("--lambda", ts_lambda, "L2 regularizer of the stump weights")->check(CLI::NonNegativeNumber);
  c_ts->add_option("--neg-cap", ts_neg_cap, "Negative pairs per positive pair for lp (0 keeps all)");
  c_ts->add_option("--out", ts_out, "Output sampler file (.xgs)")->required();
  c_ts->add_option("--trace", ts_trace, "Per-round boosting trace (JSON)");

  // sample
  TaskOpts sa;
  std::string sa_sampler, sa_out, sa_candidates = "sparse";
  std::size_t sa_B = 5;
  auto* c_sample = app.add_subcommand("sample", "Emit top-B sampler positives per node");
  add_graph(c_sample, sa);
  add_task(c_sample, sa);
  add_relations(c_sample, sa);
  c_sample->add_option("--sampler", sa_sampler, "Sampler file (.xgs)")->required();
  c_sample->add_option("--B", sa_B, "Positives per node")->check(CLI::PositiveNumber);
  c_sample->add_option("--candidates", sa_candidates, "Candidate policy: sparse or full")
      ->check(CLI::IsMember({"sparse", "full"}));
  c_sample->add_option("--out", sa_out, "Output file: one line \"u p1 .. pB\" per node")->required();

  // embed
  TaskOpts em;
  std::string em_strategy = "xtcl", em_sampler, em_out, em_loss, em_params, em_candidates = "sparse";
  std::size_t em_B = 5, em_K = 10, em_epochs = 100, em_hidden = 256, em_dim = 128, em_neg_cap = 5;
  double em_lr = 0.01, em_temperature = 1.0, em_lambda = 1.0;
  bool em_normalize = false;
  auto* c_embed = app.add_subcommand("embed", "Train GCN embeddings with a contrastive loss");
  add_graph(c_embed, em);
  add_task(c_embed, em);
  add_relations(c_embed, em);
  c_embed->add_option("--strategy", em_strategy, "Positive sampling: xtcl, sscl, scl, ceiling or naive")
      ->check(CLI::IsMember({"xtcl", "sscl", "scl", "ceiling", "naive"}));
  c_embed->add_option("--sampler", em_sampler, "Sampler file; xtcl trains one when absent");
  c_embed->add_option("--lambda", em_lambda, "Regularizer when a sampler is trained here")
      ->check(CLI::NonNegativeNumber);
  c_embed->add_option("--neg-cap", em_neg_cap, "Negative cap when a sampler is trained here");
  c_embed->add_option("--candidates", em_candidates, "XTCL candidate policy: sparse or full")
      ->check(CLI::IsMember({"sparse", "full"}));
  c_embed->add_option("--B", em_B, "Positives per node")->check(CLI::PositiveNumber);
  c_embed->add_option("--K", em_K, "Negatives per node")->check(CLI::PositiveNumber);
  c_embed->add_option("--epochs", em_epochs, "Training epochs")->check(CLI::PositiveNumber);
  c_embed->add_option("--lr", em_lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  c_embed->add_option("--temperature", em_temperature, "Softmax temperature")->check(CLI::PositiveNumber);
  c_embed->add_flag("--normalize", em_normalize, "L2-normalize embedding rows");
  c_embed->add_option("--hidden", em_hidden, "Hidden width")->check(CLI::PositiveNumber);
  c_embed->add_option("--dim", em_dim, "Embedding width")->check(CLI::PositiveNumber);
  c_embed->add_option("--out", em_out, "Output embeddings (TCLM)")->required();
  c_embed->add_option("--loss", em_loss, "Loss trace CSV (default <out>.loss.csv)");
  c_embed->add_option("--params", em_params, "Encoder checkpoint output");

  // eval
  TaskOpts ev;
  std::string ev_embeddings, ev_out;
  LogRegOptions ev_lr;
  auto* c_eval = app.add_subcommand("eval", "Evaluate embeddings on the downstream task");
  add_graph(c_eval, ev);
  add_task(c_eval, ev);
  c_eval->add_option("--embeddings", ev_embeddings, "Embeddings (TCLM)")->required();
  c_eval->add_option("--l2", ev_lr.l2, "Logistic regression L2 strength")->check(CLI::NonNegativeNumber);
  c_eval->add_option("--clf-epochs", ev_lr.epochs, "Logistic regression epochs");
  c_eval->add_option("--out", ev_out, "Report JSON (default stdout)");

  // perturb
  TaskOpts pe;
  std::string pe_relation = "attr_dist1", pe_out, pe_log;
  std::size_t pe_p = 1;
  double pe_q = 1.0;
  auto* c_perturb = app.add_subcommand("perturb", "Relabel nodes collectively along one relation");
  add_graph(c_perturb, pe);
  add_task(c_perturb, pe);
  c_perturb->add_option("--relation", pe_relation, "Relation driving the perturbation");
  c_perturb->add_option("--p", pe_p, "Number of nodes to visit");
  c_perturb->add_option("--q", pe_q, "Probability a similar node copies the label")->check(CLI::Range(0.0, 1.0));
  c_perturb->add_option("--cache", pe.cache, "Similarity cache directory");
  c_perturb->add_flag("--sparse", pe.sparse, "Sparse similarity storage");
  c_perturb->add_flag("--dense", pe.dense, "Dense similarity storage (default)");
  c_perturb->add_option("--percentile", pe.percentile, "Threshold percentile")->check(CLI::Range(0.0, 100.0));
  c_perturb->add_option("--out", pe_out, "Output labels (\"node label\" lines)")->required();
  c_perturb->add_option("--log", pe_log, "Relabel log (JSON)");
  pe.dense_by_default = true;

  // weights
  std::string we_sampler, we_out;
  auto* c_weights = app.add_subcommand("weights", "Print relation importance weights of a sampler");
  c_weights->add_option("--sampler", we_sampler, "Sampler file (.xgs)")->required();
  c_weights->add_option("--out", we_out, "Output CSV (default stdout)");

  // bench
  std::string be_sizes = "1k,2k,4k,8k", be_out, be_relations = "link,jaccard,topology,attr_sim,attr_dist1,label_dist2";
  std::uint64_t be_seed = 0;
  std::size_t be_repeats = 1;
  auto* c_bench = app.add_subcommand("bench", "Time the pipeline stages on random graphs");
  c_bench->add_option("--sizes", be_sizes, "Comma-separated node counts, k suffix allowed");
  c_bench->add_option("--relations", be_relations, "Relations to compute");
  c_bench->add_option("--seed", be_seed, "Root seed");
  c_bench->add_option("--repeats", be_repeats, "Repetitions per size; the minimum is kept")->check(CLI::PositiveNumber);
  c_bench->add_option("--out", be_out, "Output CSV (n,phase,seconds)")->required();

  // pipeline
  std::string pl_config, pl_graph, pl_out, pl_strategy, pl_task;
  std::optional<std::uint64_t> pl_seed;
  std::optional<std::size_t> pl_epochs;
  auto* c_pipe = app.add_subcommand("pipeline", "Run split, relations, sampler, embed and eval end to end");
  c_pipe->add_option("--config", pl_config, "Run config (JSON)");
  c_pipe->add_option("--graph", pl_graph, "Override config graph");
  c_pipe->add_option("--task", pl_task, "Override config task")->check(CLI::IsMember({"nc", "lp"}));
  c_pipe->add_option("--strategy", pl_strategy, "Override config strategy")
      ->check(CLI::IsMember({"xtcl", "sscl", "scl", "ceiling", "naive"}));
  c_pipe->add_option("--seed", pl_seed, "Override config seed");
  c_pipe->add_option("--epochs", pl_epochs, "Override config epochs");
  c_pipe->add_option("--out", pl_out, "Override config output directory");

  // generate
  std::string ge_kind = "sbm", ge_out, ge_name;
  std::size_t ge_n = 400;
  std::uint64_t ge_seed = 0;
  SbmConfig ge_sbm;
  auto* c_gen = app.add_subcommand("generate", "Write a synthetic graph (SBM or random) as a manifest");
  c_gen->add_option("--kind", ge_kind, "sbm or random")->check(CLI::IsMember({"sbm", "random"}));
  c_gen->add_option("--n", ge_n, "Node count (split evenly over two SBM blocks)");
  c_gen->add_option("--p-in", ge_sbm.p_in, "SBM within-block edge probability")->check(CLI::Range(0.0, 1.0));
  c_gen->add_option("--p-out", ge_sbm.p_out, "SBM cross-block edge probability")->check(CLI::Range(0.0, 1.0));
  c_gen->add_option("--seed", ge_seed, "Generator seed");
  c_gen->add_option("--name", ge_name, "Graph name (default sbm / random)");
  c_gen->add_option("--out", ge_out, "Output directory")->required();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.push_back("taskcl");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_rel) {
      const Graph g = load_graph(rel.graph);
      const auto ids = rel.relation_ids();
      require_labels_for(g, ids);
      const TaskData td = load_task(rel, g);
      RelationCacheStats stats;
      load_bank(rel, td, ids, rel_force, &stats);
      out << "relations: " << ids.size() << " (" << stats.computed << " computed, " << stats.reused
          << " cached) in " << rel.cache_dir().string() << '\n';
    } else if (*c_split) {
      const Graph g = load_graph(sp.graph);
      const double f = sp.fraction > 0.0 ? sp.fraction : default_train_fraction(sp.kind());
      const Split s = make_split(g, sp.kind(), f, derive_seeds(sp.seed).split);
      save_split(s, sp_out);
      out << "split written to " << sp_out << '\n';
    } else if (*c_ts) {
      const Graph g = load_graph(ts.graph);
      const TaskData td = load_task(ts, g);
      const auto ids = ts.relation_ids();
      const RelationBank bank = load_bank(ts, td, ids);
      const SamplerFit fit = train_sampler(td, bank, ids, ts_lambda, ts_neg_cap, derive_seeds(ts.seed).sampler);
      save_sampler(fit.model, ts_out);
      if (!ts_trace.empty()) {
        json rounds = json::array();
        for (const auto& r : fit.trace)
          rounds.push_back({{"relation", relation_name(r.id)},
                            {"w0", r.w0},
                            {"w1", r.w1},
                            {"count0", r.count0},
                            {"count1", r.count1},
                            {"grad_sum0", r.grad_sum0},
                            {"grad_sum1", r.grad_sum1},
                            {"hess_sum0", r.hess_sum0},
                            {"hess_sum1", r.hess_sum1},
                            {"surrogate", r.surrogate}});
        write_json(json{{"pairs", fit.num_pairs}, {"rounds", rounds}}, ts_trace, out);
      }
      out << "sampler: " << fit.num_pairs << " pairs, order";
      for (RelationId id : fit.model.order) out << ' ' << relation_name(id);
      out << '\n';
    } else if (*c_sample) {
      const Graph g = load_graph(sa.graph);
      const TaskData td = load_task(sa, g);
      const SamplerModel model = load_sampler(sa_sampler);
      const RelationBank bank = load_bank(sa, td, model.order);
      const auto policy = sa_candidates == "full" ? CandidatePolicy::Full : CandidatePolicy::Sparse;
      const PositiveAssignment a = assign_positives_xtcl(model, bank, sa_B, policy);
      std::ofstream os(sa_out);
      if (!os) throw DataError("cannot write " + sa_out);
      for (NodeId u = 0; u < a.num_nodes(); ++u) {
        os << u;
        for (NodeId v : a.positives[u]) os << ' ' << v;
        os << '\n';
      }
      out << "positives written to " << sa_out << '\n';
    } else if (*c_embed) {
      const Graph g = load_graph(em.graph);
      const TaskData td = load_task(em, g);
      const Strategy strategy = parse_strategy(em_strategy);
      const Seeds seeds = derive_seeds(em.seed);
      auto ids = em.relation_ids();
      std::optional<SamplerModel> model;
      if (strategy == Strategy::XTCL && !em_sampler.empty()) {
        model = load_sampler(em_sampler);
        ids = model->order;
      }
      const RelationBank bank = load_bank(em, td, ids);
      if (strategy == Strategy::XTCL && !model)
        model = train_sampler(td, bank, ids, em_lambda, em_neg_cap, seeds.sampler).model;
      const auto policy = em_candidates == "full" ? CandidatePolicy::Full : CandidatePolicy::Sparse;
      const PositiveSource source =
          positive_source(strategy, td, bank, ids, model ? &*model : nullptr, em_B, seeds.positives, policy);
      TrainConfig tc;
      tc.B = em_B;
      tc.K = em_K;
      tc.epochs = em_epochs;
      tc.lr = em_lr;
      tc.seed = em.seed;
      tc.temperature = em_temperature;
      tc.normalize = em_normalize;
      tc.dims.hidden = em_hidden;
      tc.dims.output = em_dim;
      const TrainResult r = train_embeddings(td.train_graph, normalized_adjacency(td.train_graph), tc, source);
      io::save_tclm(em_out, r.embeddings.z);
      write_loss_csv(r.loss_trace, em_loss.empty() ? em_out + ".loss.csv" : em_loss);
      if (!em_params.empty()) save_params(r.params, em_params);
      out << "embeddings " << r.embeddings.z.rows() << "x" << r.embeddings.z.cols() << " written to " << em_out
          << " (final loss " << std::setprecision(6) << r.loss_trace.back() << ")\n";
    } else if (*c_eval) {
      const Graph g = load_graph(ev.graph);
      const TaskData td = load_task(ev, g);
      const Matrix z = io::load_tclm(ev_embeddings);
      const EvalReport r = evaluate(td, z, ev_lr);
      json j = to_json(r);
      j["seed"] = ev.seed;
      write_json(j, ev_out, out);
    } else if (*c_perturb) {
      const Graph g = load_graph(pe.graph);
      if (!g.has_labels()) throw DataError("perturb: graph has no labels");
      const auto id = parse_relation(pe_relation);
      if (!id) throw ConfigError("unknown relation \"" + pe_relation + "\"");
      const TaskData td = load_task(pe, g);
      const RelationBank bank = load_bank(pe, td, {*id});
      PerturbConfig cfg;
      cfg.relation = *id;
      cfg.budget = pe_p;
      cfg.ratio = pe_q;
      cfg.seed = substream_seed(pe.seed, "perturb");
      const PerturbResult r = perturb_labels(g.labels(), bank.sim(*id), bank.threshold(*id), cfg);
      write_labels(r.labels, pe_out);
      std::size_t changed = 0;
      for (std::size_t u = 0; u < r.labels.size(); ++u) changed += r.labels[u] != g.labels()[u];
      if (!pe_log.empty()) {
        json events = json::array();
        for (const auto& e : r.log) events.push_back({e.source, e.target, e.label});
        write_json(json{{"visited", r.visited}, {"restarts", r.restarts}, {"changed", changed}, {"events", events}},
                   pe_log, out);
      }
      out << "perturbed: visited " << r.visited.size() << ", changed " << changed << ", restarts " << r.restarts
          << '\n';
    } else if (*c_weights) {
      const SamplerModel model = load_sampler(we_sampler);
      std::ostringstream csv;
      csv << "relation,weight\n" << std::setprecision(17);
      for (auto [id, w] : importance_weights(model)) csv << relation_name(id) << ',' << w << '\n';
      if (we_out.empty()) {
        out << csv.str();
      } else {
        std::ofstream os(we_out);
        if (!os) throw DataError("cannot write " + we_out);
        os << csv.str();
      }
    } else if (*c_bench) {
      const auto rows = run_bench(parse_sizes(be_sizes), parse_relation_list(be_relations), be_seed, be_repeats);
      write_bench_csv(rows, be_out);
      for (const auto& r : rows) out << r.n << ' ' << r.phase << ' ' << r.seconds << '\n';
    } else if (*c_gen) {
      Graph g;
      if (ge_kind == "sbm") {
        ge_sbm.block_sizes = {ge_n / 2, ge_n - ge_n / 2};
        ge_sbm.seed = ge_seed;
        g = sbm_graph(ge_sbm);
      } else {
        g = random_graph(ge_n, ge_seed);
      }
      const std::string name = ge_name.empty() ? ge_kind : ge_name;
      g = Graph(g.edges(), g.attributes(), g.labels(), g.num_classes(), name);
      const fs::path manifest = save_graph(g, ge_out);
      out << "graph " << g.num_nodes() << " nodes, " << g.num_edges() << " edges: " << manifest.string() << '\n';
    } else if (*c_pipe) {
      RunConfig cfg;
      fs::path base;
      if (!pl_config.empty()) {
        cfg = load_run_config(pl_config);
        base = fs::path(pl_config).parent_path();
      }
      if (!pl_graph.empty()) {
        cfg.graph = pl_graph;
        base.clear();
      }
      if (!pl_task.empty()) cfg.task = parse_task(pl_task);
      if (!pl_strategy.empty()) cfg.strategy = parse_strategy(pl_strategy);
      if (pl_seed) cfg.seed = *pl_seed;
      if (pl_epochs) {
        if (*pl_epochs == 0) throw ConfigError("--epochs must be >= 1");
        cfg.epochs = *pl_epochs;
      }
      if (!pl_out.empty()) cfg.out = pl_out;
      const json report = run_pipeline(cfg, base);
      out << report["metrics"]["metric"].get<std::string>() << ' ' << std::setprecision(6)
          << report["metrics"]["value"].get<double>() << " (report " << (cfg.out / "report.json").string() << ")\n";
    }
  } catch (const Error& e) {
    err << "taskcl: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "taskcl: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Data);
  }
  return 0;
}

}  // namespace taskcl::cli
