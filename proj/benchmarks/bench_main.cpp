#include <benchmark/benchmark.h>

#include "taskcl/contrastive.hpp"
#include "taskcl/encoder.hpp"
#include "taskcl/pipeline.hpp"
#include "taskcl/relations.hpp"
#include "taskcl/sampler.hpp"
#include "taskcl/synth.hpp"

using namespace taskcl;

namespace {

const std::vector<RelationId> kRelations{RelationId::Link, RelationId::JaccardSim, RelationId::TopologySim,
                                         RelationId::AttrSim, RelationId::AttrDist1};

struct Prepared {
  TaskData td;
  RelationBank bank;
};

Prepared prepare(std::size_t n) {
  const Graph g = random_graph(n, 1);
  TaskData td = bind_task(g, make_split(g, TaskKind::NodeClassification, 0.1, 2));
  RelationBank bank = compute_relations(td.train_graph, kRelations, td.labels(), {});
  return {std::move(td), std::move(bank)};
}

void BM_Relations(benchmark::State& state) {
  const Graph g = random_graph(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(compute_relations(g, kRelations, nullptr, {}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Relations)->RangeMultiplier(2)->Range(1000, 8000)->Complexity();

void BM_SamplerFit(benchmark::State& state) {
  const auto p = prepare(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(train_sampler(p.td, p.bank, kRelations, 1.0, 0, 3));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SamplerFit)->RangeMultiplier(2)->Range(1000, 8000)->Complexity();

void BM_XtclPositives(benchmark::State& state) {
  const auto p = prepare(static_cast<std::size_t>(state.range(0)));
  const auto fit = train_sampler(p.td, p.bank, kRelations, 1.0, 0, 3);
  for (auto _ : state) benchmark::DoNotOptimize(assign_positives_xtcl(fit.model, p.bank, 5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_XtclPositives)->RangeMultiplier(2)->Range(1000, 8000)->Complexity();

void BM_GcnForwardBackward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Graph g = random_graph(n, 1);
  const CsrMatrix a = normalized_adjacency(g);
  const Matrix ax = propagate_input(a, g.attributes());
  const EncoderParams params = init_params({g.attribute_dim(), 256, 128}, 4);
  const Matrix dz(n, 128, 1e-3);
  ForwardCache cache;
  for (auto _ : state) {
    gcn_forward_propagated(a, ax, params, false, &cache);
    benchmark::DoNotOptimize(gcn_backward(a, params, cache, dz));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GcnForwardBackward)->RangeMultiplier(2)->Range(500, 4000)->Complexity();

void BM_ContrastiveLossGrad(benchmark::State& state) {
  const std::size_t n = 2000, d = 128;
  Rng rng(5);
  Matrix z(n, d);
  for (double& v : z.data()) v = rng.uniform(-1, 1);
  Matrix dz(n, d);
  const std::vector<NodeId> pos{1, 2, 3, 4, 5};
  const auto neg = sample_negatives(n, 0, static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(contrastive_loss_grad(z, 0, pos, neg, 1.0, 1.0, dz));
}
BENCHMARK(BM_ContrastiveLossGrad)->Arg(10)->Arg(100);

}  // namespace
BENCHMARK_MAIN();
