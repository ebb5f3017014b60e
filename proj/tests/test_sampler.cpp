#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "support/fixtures.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"
#include "taskcl/error.hpp"
#include "taskcl/sampler.hpp"

using namespace taskcl;

namespace {

struct Rel {
  RelationId id;
  std::vector<std::tuple<NodeId, NodeId, double>> entries;
};

// Bank of hand-filled dense relations with a constant threshold.
RelationBank hand_bank(std::size_t n, const std::vector<Rel>& rels, double eta = 0.5) {
  RelationBank bank;
  for (const auto& r : rels) {
    Matrix m(n, n);
    for (auto [u, v, x] : r.entries) m(u, v) = x;
    bank.add(SimMatrix(r.id, std::move(m)), ThresholdVector{r.id, std::vector<double>(n, eta), 99.0});
  }
  return bank;
}

SamplerModel hand_model(std::vector<RelStump> stumps, const RelationBank& bank) {
  SamplerModel m;
  for (const auto& s : stumps) {
    m.order.push_back(s.id);
    m.thresholds.push_back(bank.threshold(s.id));
  }
  m.stumps = std::move(stumps);
  return m;
}

// y = 1 on the three fired pairs, y = 0 on the two others.
std::vector<LabeledPair> hand_pairs() { return {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 0}, {1, 4, 0}}; }
RelationBank hand_fire_bank() { return hand_bank(5, {{RelationId::Link, {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}}}}); }

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("training pairs follow the class indicator") {
    auto g = fixture::make(4, {{0, 1}}, std::vector<int>{0, 0, 1, 2}, 3);
    LabelSplit s{{0, 1, 2}, {3}, 0};
    auto pairs = training_pairs(TaskSpec::node_classification(g, s), std::nullopt, 1);
    CHECK(pairs.size() == 6);
    for (const auto& p : pairs) {
      const bool same = (p.u == 0 && p.v == 1) || (p.u == 1 && p.v == 0);
      CHECK(p.y == (same ? 1 : 0));
    }
  }

  TEST_CASE("training pairs follow training edges for link prediction") {
    auto g = fixture::make(4, {{0, 1}, {2, 3}, {1, 2}});
    EdgeSplit s{{{0, 1}, {2, 3}}, {{1, 2}}, {{0, 3}}, 0};
    auto task = TaskSpec::link_prediction(g, s);
    CHECK(task.labeled().size() == 4);
    auto pairs = training_pairs(task, std::nullopt, 1);
    CHECK(pairs.size() == 12);
    for (const auto& p : pairs) {
      const bool edge = std::min(p.u, p.v) == 0 ? std::max(p.u, p.v) == 1 : (std::min(p.u, p.v) == 2 && std::max(p.u, p.v) == 3);
      CHECK(p.y == (edge ? 1 : 0));
    }
  }

  TEST_CASE("negative cap keeps exactly cap times the positives") {
    auto g = fixture::make(4, {{0, 1}}, std::vector<int>{0, 0, 1, 2}, 3);
    LabelSplit s{{0, 1, 2, 3}, {}, 0};
    auto task = TaskSpec::node_classification(g, s);
    auto pairs = training_pairs(task, 1, 4);
    CHECK(std::count_if(pairs.begin(), pairs.end(), [](auto& p) { return p.y == 1; }) == 2);
    CHECK(std::count_if(pairs.begin(), pairs.end(), [](auto& p) { return p.y == 0; }) == 2);
    CHECK(training_pairs(task, 1, 4) == pairs);
    LabelSplit one{{0}, {1, 2, 3}, 0};
    CHECK_THROWS(training_pairs(TaskSpec::node_classification(g, one), std::nullopt, 1));
  }

  TEST_CASE("relations are ordered by firing precision") {
    std::vector<LabeledPair> pairs{{0, 1, 1}, {0, 2, 1}, {0, 3, 0}, {1, 2, 1}, {1, 3, 0}};
    auto bank = hand_bank(6, {{RelationId::JaccardSim, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}}},
                              {RelationId::Link, {{1, 2, 1}, {1, 3, 1}}},
                              {RelationId::AttrSim, {}}});
    auto prec = relation_precisions(pairs, bank, {RelationId::Link, RelationId::AttrSim, RelationId::JaccardSim});
    REQUIRE(prec.size() == 3);
    CHECK(prec[0].id == RelationId::JaccardSim);
    CHECK(prec[0].precision == doctest::Approx(2.0 / 3.0));
    CHECK(prec[1].id == RelationId::Link);
    CHECK(prec[1].precision == doctest::Approx(0.5));
    CHECK(prec[2].id == RelationId::AttrSim);
    CHECK(prec[2].precision == 0.0);
    CHECK(prec[2].fired == 0);
  }

  TEST_CASE("equal precision falls back to enum order") {
    std::vector<LabeledPair> pairs{{0, 1, 1}, {0, 2, 0}};
    auto bank = hand_bank(3, {{RelationId::PageRank, {{0, 1, 1}}}, {RelationId::Link, {{0, 1, 1}}}});
    auto order = order_relations(pairs, bank, {RelationId::PageRank, RelationId::Link});
    CHECK(order == std::vector<RelationId>{RelationId::Link, RelationId::PageRank});
  }

  TEST_CASE("newton weights hand values") {
    auto bank = hand_fire_bank();
    std::vector<BoostRound> trace;
    auto m = fit_sampler(hand_pairs(), bank, 1.0, {RelationId::Link}, TaskKind::NodeClassification, &trace);
    REQUIRE(trace.size() == 1);
    CHECK(std::abs(trace[0].grad_sum1 + 1.5) <= 1e-15);
    CHECK(std::abs(trace[0].hess_sum1 - 0.75) <= 1e-15);
    CHECK(std::abs(trace[0].grad_sum0 - 1.0) <= 1e-15);
    CHECK(std::abs(trace[0].hess_sum0 - 0.5) <= 1e-15);
    CHECK(std::abs(m.stumps[0].w1 - 1.5 / 1.75) <= 1e-12);
    CHECK(std::abs(m.stumps[0].w1 - 0.857143) <= 1e-6);
    CHECK(std::abs(m.stumps[0].w0 + 1.0 / 1.5) <= 1e-12);
    CHECK(std::abs(m.stumps[0].w0 + 0.666667) <= 1e-6);
  }

  TEST_CASE("empty partitions give zero weight") {
    auto bank = hand_bank(3, {{RelationId::Link, {}}});
    auto m = fit_sampler({{0, 1, 1}, {1, 2, 0}}, bank, 1.0, {RelationId::Link});
    CHECK(m.stumps[0].w1 == 0.0);
    CHECK(newton_weight(0.0, 0.0, 1.0) == 0.0);
    CHECK(newton_weight(0.0, 0.0, 0.0) == 0.0);
    CHECK_THROWS(fit_sampler({}, bank, 1.0, {RelationId::Link}));
    CHECK_THROWS(fit_sampler({{0, 1, 1}}, bank, -1.0, {RelationId::Link}));
  }

  TEST_CASE("score hand values") {
    auto bank = hand_bank(3, {{RelationId::Link, {{0, 1, 1}}}, {RelationId::JaccardSim, {{0, 1, 1}}}});
    auto two = hand_model({{RelationId::Link, 0.0, 0.857143}, {RelationId::JaccardSim, 0.0, 0.5}}, bank);
    CHECK(std::abs(score_pair(two, bank, 0, 1) - 0.795295) <= 1e-6);
    CHECK(std::abs(score_pair(two, bank, 0, 1) - oracle::sigmoid(1.357143)) <= 1e-15);
    auto one = hand_model({{RelationId::Link, -0.666667, 0.857143}}, bank);
    CHECK(std::abs(score_pair(one, bank, 0, 2) - 0.33924) <= 1e-5);
    auto zero = hand_model({{RelationId::Link, 0.0, 0.0}}, bank);
    CHECK(score_pair(zero, bank, 1, 2) == 0.5);
    CHECK_THROWS(score_pair(zero, bank, 1, 1));
  }

  TEST_CASE("score does not depend on relation summation order") {
    auto inst = instance::make(11);
    auto m = fit_sampler(inst.pairs, inst.bank, 1.0, inst.relations);
    auto r = m;
    std::reverse(r.order.begin(), r.order.end());
    std::reverse(r.stumps.begin(), r.stumps.end());
    std::reverse(r.thresholds.begin(), r.thresholds.end());
    for (NodeId u = 0; u < 5; ++u)
      for (NodeId v = 0; v < inst.graph.num_nodes(); ++v) {
        if (u == v) continue;
        const double a = score_pair(m, inst.bank, u, v), b = score_pair(r, inst.bank, u, v);
        CHECK(std::abs(a - b) <= 1e-15);
        CHECK(a > 0.0);
        CHECK(a < 1.0);
      }
  }

  TEST_CASE("xtcl sampling picks the dominant candidate and breaks ties by id") {
    auto bank = hand_bank(4, {{RelationId::Link, {{0, 2, 1}, {0, 3, 1}}}, {RelationId::JaccardSim, {{0, 3, 1}}}});
    auto m = hand_model({{RelationId::Link, 0.0, 1.0}, {RelationId::JaccardSim, 0.0, 1.0}}, bank);
    CHECK(sample_positives_xtcl(m, bank, 0, 1) == std::vector<NodeId>{3});
    auto tied = hand_model({{RelationId::Link, 0.0, 1.0}, {RelationId::JaccardSim, 0.0, 0.0}}, bank);
    CHECK(sample_positives_xtcl(tied, bank, 0, 2) == std::vector<NodeId>{2, 3});
    // Fewer candidates than B: the top one is repeated.
    CHECK(sample_positives_xtcl(m, bank, 0, 4) == std::vector<NodeId>{3, 2, 3, 3});
    // No candidates under the sparse policy: all other nodes, lowest id first.
    CHECK(sample_positives_xtcl(m, bank, 1, 2) == std::vector<NodeId>{0, 2});
    CHECK_THROWS(sample_positives_xtcl(m, bank, 0, 0));
  }

  TEST_CASE("full-policy sampling equals brute-force top-B") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      auto inst = instance::make(40 + seed);
      auto m = fit_sampler(inst.pairs, inst.bank, inst.lambda, inst.relations);
      const std::size_t n = inst.graph.num_nodes();
      const std::size_t B = 1 + seed % 6;
      for (NodeId u = 0; u < n; ++u) {
        std::vector<std::pair<double, NodeId>> scored;
        for (NodeId v = 0; v < n; ++v) {
          if (v == u) continue;
          double margin = 0;
          for (const auto& s : m.stumps) {
            const double x = inst.bank.sim(s.id).at(u, v);
            margin += x > 0.0 && x >= inst.bank.threshold(s.id).eta[u] ? s.w1 : s.w0;
          }
          scored.emplace_back(-oracle::sigmoid(margin), v);
        }
        std::sort(scored.begin(), scored.end());
        std::vector<NodeId> want;
        for (std::size_t i = 0; i < B; ++i) want.push_back(scored[i].second);
        CHECK(sample_positives_xtcl(m, inst.bank, u, B, CandidatePolicy::Full) == want);
      }
    }
  }

  TEST_CASE("sparse policy draws only from firing candidates") {
    auto inst = instance::make(3);
    auto m = fit_sampler(inst.pairs, inst.bank, 1.0, inst.relations);
    for (NodeId u = 0; u < inst.graph.num_nodes(); ++u) {
      auto cand = firing_candidates(m, inst.bank, u);
      std::set<NodeId> cs(cand.begin(), cand.end());
      CHECK(cs.count(u) == 0);
      for (NodeId v : sample_positives_xtcl(m, inst.bank, u, 3)) {
        CHECK(v != u);
        if (!cs.empty()) CHECK(cs.count(v) == 1);
      }
    }
  }

  TEST_CASE("importance weights") {
    SamplerModel m;
    m.stumps = {{RelationId::Link, -0.666667, 0.857143}, {RelationId::PageRank, 0.0, 0.0},
                {RelationId::AttrSim, 1.2, -0.1}};
    m.order = {RelationId::Link, RelationId::PageRank, RelationId::AttrSim};
    auto w = importance_weights(m);
    REQUIRE(w.size() == 3);
    CHECK(w[0] == std::pair{RelationId::AttrSim, 1.2});
    CHECK(w[1] == std::pair{RelationId::Link, 0.857143});
    CHECK(w[2] == std::pair{RelationId::PageRank, 0.0});
  }

  TEST_CASE("sampler files round trip and reject corruption") {
    auto inst = instance::make(5);
    auto m = fit_sampler(inst.pairs, inst.bank, 0.5, inst.relations, TaskKind::LinkPrediction);
    auto dir = fixture::temp_dir("sampler");
    save_sampler(m, dir / "m.xgs");
    CHECK(load_sampler(dir / "m.xgs") == m);

    const auto full = std::filesystem::file_size(dir / "m.xgs");
    std::filesystem::copy_file(dir / "m.xgs", dir / "t.xgs");
    std::filesystem::resize_file(dir / "t.xgs", full - 5);
    CHECK_THROWS_WITH_AS(load_sampler(dir / "t.xgs"), doctest::Contains("corrupt sampler file"), DataError);

    std::ifstream is(dir / "m.xgs", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    const auto at = bytes.find("\"version\":");
    REQUIRE(at != std::string::npos);
    bytes.replace(at, 11, "\"version\":9");
    std::ofstream(dir / "v.xgs", std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_sampler(dir / "v.xgs"), DataError);
  }

  TEST_CASE("boosted weights match an independent reference fit") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      auto inst = instance::make(seed);
      auto ref = instance::reference_fit(inst);
      auto order = order_relations(inst.pairs, inst.bank, inst.relations);
      CHECK(order == ref.order);
      std::vector<BoostRound> trace;
      auto m = fit_sampler(inst.pairs, inst.bank, inst.lambda, order, TaskKind::NodeClassification, &trace);
      REQUIRE(m.stumps.size() == ref.weights.size());
      for (std::size_t r = 0; r < ref.weights.size(); ++r) {
        CHECK(std::abs(m.stumps[r].w0 - ref.weights[r].w0) <= 1e-9);
        CHECK(std::abs(m.stumps[r].w1 - ref.weights[r].w1) <= 1e-9);
        const auto& t = trace[r];
        CHECK(std::abs(m.stumps[r].w0 - oracle::minimize_quadratic(t.grad_sum0, t.hess_sum0, inst.lambda)) <= 1e-9);
        CHECK(std::abs(m.stumps[r].w1 - oracle::minimize_quadratic(t.grad_sum1, t.hess_sum1, inst.lambda)) <= 1e-9);
      }
    }
  }

  TEST_CASE("each round lowers the surrogate and keeps derivatives in range") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      auto inst = instance::make(seed);
      std::vector<BoostRound> trace;
      fit_sampler(inst.pairs, inst.bank, inst.lambda, inst.relations, TaskKind::NodeClassification, &trace);
      for (const auto& t : trace) {
        if (t.w0 == 0.0 && t.w1 == 0.0)
          CHECK(t.surrogate == 0.0);
        else
          CHECK(t.surrogate < 0.0);
        CHECK(t.min_grad > -1.0);
        CHECK(t.max_grad < 1.0);
        CHECK(t.min_hess > 0.0);
        CHECK(t.max_hess <= 0.25);
        CHECK(t.count0 + t.count1 == inst.pairs.size());
      }
    }
  }

  TEST_CASE("fit and sampling are deterministic") {
    auto a = instance::make(77), b = instance::make(77);
    CHECK(a.pairs == b.pairs);
    auto ma = fit_sampler(a.pairs, a.bank, 1.0, a.relations);
    auto mb = fit_sampler(b.pairs, b.bank, 1.0, b.relations);
    CHECK(ma == mb);
    for (NodeId u = 0; u < a.graph.num_nodes(); ++u)
      CHECK(sample_positives_xtcl(ma, a.bank, u, 5) == sample_positives_xtcl(mb, b.bank, u, 5));
  }
}
