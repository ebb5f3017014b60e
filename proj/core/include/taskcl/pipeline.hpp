#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskcl/contrastive.hpp"
#include "taskcl/eval.hpp"
#include "taskcl/graph.hpp"
#include "taskcl/relations.hpp"
#include "taskcl/sampler.hpp"

namespace taskcl {

// Every knob of an end-to-end run. JSON layout:
//   {graph, task, relations, mode, seed, out, cache,
//    sampler: {lambda, percentile, neg_cap, candidates},
//    train:   {strategy, B, K, epochs, lr, temperature, normalize, hidden, dim},
//    eval:    {train_fraction, l2, lr, epochs}}
struct RunConfig {
  std::filesystem::path graph;
  TaskKind task = TaskKind::NodeClassification;
  std::vector<RelationId> relations;  // empty: default_relations(task)
  SimMode mode = SimMode::Sparse;
  std::uint64_t seed = 0;
  std::filesystem::path out = "taskcl-out";
  std::filesystem::path cache;  // empty: <out>/cache, TASKCL_CACHE wins over both

  double lambda = 1.0;
  double percentile = 99.0;
  std::size_t neg_cap = 5;  // LP only; 0 keeps every negative pair
  CandidatePolicy candidates = CandidatePolicy::Sparse;

  Strategy strategy = Strategy::XTCL;
  std::size_t B = 5;
  std::size_t K = 10;
  std::size_t epochs = 100;
  double lr = 0.01;
  double temperature = 1.0;
  bool normalize = false;
  std::size_t hidden = 256;
  std::size_t dim = 128;

  double train_fraction = 0.0;  // 0: 0.1 for nc, 0.6 for lp
  LogRegOptions logreg{};
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);
// Hex FNV-1a of the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

std::vector<RelationId> default_relations(TaskKind kind);
double default_train_fraction(TaskKind kind);
std::filesystem::path resolve_cache_dir(const std::filesystem::path& configured, const std::filesystem::path& out);

struct Seeds {
  std::uint64_t root, split, sampler, negatives, init, positives;
};
Seeds derive_seeds(std::uint64_t root);
nlohmann::json to_json(const Seeds& s);

// A task split as stored on disk.
struct Split {
  TaskKind kind = TaskKind::NodeClassification;
  std::optional<LabelSplit> labels;
  std::optional<EdgeSplit> edges;
  friend bool operator==(const Split&, const Split&) = default;
};
Split make_split(const Graph& g, TaskKind kind, double train_fraction, std::uint64_t seed);
void save_split(const Split& split, const std::filesystem::path& path);
Split load_split(const std::filesystem::path& path);

// The graph a task trains on: for link prediction only training edges remain.
struct TaskData {
  Graph graph;
  Graph train_graph;
  Split split;
  TaskSpec task;
  const LabelSplit* labels() const { return split.labels ? &*split.labels : nullptr; }
};
TaskData bind_task(const Graph& g, const Split& split);

// Relations on td.train_graph, reusing `<cache>/<name>.sim` when its recorded
// fingerprint matches and the file is newer than `source` (the manifest).
// The index written to `<cache>/relations.json` is returned via `index`.
struct RelationCacheStats {
  std::size_t computed = 0;
  std::size_t reused = 0;
};
RelationBank relations_with_cache(const TaskData& td, const std::vector<RelationId>& ids, const RelationOptions& opts,
                                  const std::filesystem::path& cache_dir, const std::filesystem::path& source,
                                  bool force, RelationCacheStats* stats = nullptr);

struct SamplerFit {
  SamplerModel model;
  std::vector<RelationPrecision> precisions;
  std::vector<BoostRound> trace;
  std::size_t num_pairs = 0;
};
SamplerFit train_sampler(const TaskData& td, const RelationBank& bank, const std::vector<RelationId>& relations,
                         double lambda, std::size_t neg_cap, std::uint64_t seed);

PositiveSource positive_source(Strategy strategy, const TaskData& td, const RelationBank& bank,
                               const std::vector<RelationId>& relations, const SamplerModel* model, std::size_t B,
                               std::uint64_t seed, CandidatePolicy policy = CandidatePolicy::Sparse);

struct EvalReport {
  std::string metric;  // "accuracy" or "auc"
  double value = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};
EvalReport evaluate(const TaskData& td, const Matrix& z, const LogRegOptions& opts = {});
nlohmann::json to_json(const EvalReport& r);

// split -> relations -> sampler -> positives -> embed -> eval. Artifacts go to
// cfg.out; the report is also written to <out>/report.json. Wall-clock numbers
// live under the "timing" key only.
nlohmann::json run_pipeline(const RunConfig& cfg, const std::filesystem::path& manifest_dir = {});

// Same stages on an in-memory graph with no artifacts; used by experiments.
struct ExperimentResult {
  EvalReport eval;
  double positive_precision = 0.0;
  std::vector<std::pair<RelationId, double>> importance;
  std::vector<double> loss_trace;
};
ExperimentResult run_experiment(const Graph& g, const RunConfig& cfg);

struct BenchRow {
  std::size_t n;
  std::string phase;
  double seconds;
};
// Random graphs with |E| = 2|V| at each size: generation, relations, sampler
// training (pairs + ordering + boosting), XTCL positives.
std::vector<BenchRow> run_bench(const std::vector<std::size_t>& sizes, const std::vector<RelationId>& relations,
                                std::uint64_t seed, std::size_t repeats = 1);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

void write_loss_csv(const std::vector<double>& trace, const std::filesystem::path& path);
void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);

}  // namespace taskcl
