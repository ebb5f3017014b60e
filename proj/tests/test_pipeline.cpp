#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "support/fixtures.hpp"
#include "taskcl/error.hpp"
#include "taskcl/io.hpp"
#include "taskcl/pipeline.hpp"

using namespace taskcl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

fs::path bundled_sbm() { return fs::path(TASKCL_SOURCE_DIR) / "data" / "sbm" / "sbm.json"; }

fs::path labeled_triangle(const fs::path& dir) {
  auto g = fixture::make(3, {{0, 1}, {1, 2}, {0, 2}}, std::vector<int>{0, 1, 0}, 2,
                         Matrix(3, 2, std::vector<double>{1, 0, 0, 1, 1, 1}));
  return save_graph(g, dir);
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
  ~ScopedEnv() { ::unsetenv(name_); }
  ScopedEnv(const ScopedEnv&) = delete;
  ScopedEnv& operator=(const ScopedEnv&) = delete;

 private:
  const char* name_;
};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("run configs validate keys and types") {
    auto cfg = run_config_from_json(json::parse(R"({"graph": "g.json", "task": "lp", "seed": 4,
      "sampler": {"lambda": 2}, "train": {"strategy": "sscl", "B": 3}, "eval": {"train_fraction": 0.5}})"));
    CHECK(cfg.task == TaskKind::LinkPrediction);
    CHECK(cfg.lambda == 2.0);
    CHECK(cfg.strategy == Strategy::SSCL);
    CHECK(cfg.B == 3);
    CHECK(run_config_from_json(to_json(cfg)).B == 3);
    CHECK(to_json(run_config_from_json(to_json(cfg))) == to_json(cfg));
    CHECK_THROWS_WITH_AS(run_config_from_json(json::parse(R"({"graf": "g.json"})")), doctest::Contains("graf"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(run_config_from_json(json::parse(R"({"train": {"batch": 3}})")),
                         doctest::Contains("train.batch"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"seed": "x"})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"train": {"strategy": "magic"}})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"sampler": {"lambda": -1}})")), ConfigError);
  }

  TEST_CASE("config hash tracks content") {
    RunConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 1;
    CHECK(config_hash(a) != config_hash(b));
  }

  TEST_CASE("seed substreams are distinct and stable") {
    auto s = derive_seeds(7);
    std::set<std::uint64_t> all{s.split, s.sampler, s.negatives, s.init, s.positives};
    CHECK(all.size() == 5);
    CHECK(derive_seeds(7).init == s.init);
    CHECK(derive_seeds(8).init != s.init);
  }

  TEST_CASE("split files round trip") {
    auto g = fixture::random_small(30, 0.2, 3);
    auto dir = fixture::temp_dir("split");
    for (TaskKind k : {TaskKind::NodeClassification, TaskKind::LinkPrediction}) {
      auto s = make_split(g, k, default_train_fraction(k), 5);
      save_split(s, dir / "s.json");
      CHECK(load_split(dir / "s.json") == s);
    }
    std::ofstream(dir / "bad.json") << "{\"task\": \"nc\", \"train\": [1, \"x\"]}";
    CHECK_THROWS_AS(load_split(dir / "bad.json"), DataError);
  }

  TEST_CASE("link prediction trains on training edges only") {
    auto g = fixture::random_small(30, 0.25, 4);
    auto td = bind_task(g, make_split(g, TaskKind::LinkPrediction, 0.6, 1));
    CHECK(td.train_graph.num_edges() == td.split.edges->train.size());
    for (auto e : td.split.edges->test_positive) CHECK_FALSE(td.train_graph.has_edge(e.first, e.second));
  }

  TEST_CASE("relations command writes every relation and an index") {
    auto dir = fixture::temp_dir("cli-rel");
    auto manifest = labeled_triangle(dir);
    auto r = cli_run({"relations", "--graph", manifest.string(), "--relations", "all", "--fraction", "0.5",
                      "--cache", (dir / "cache").string()});
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "cache")) files += e.path().extension() == ".sim";
    CHECK(files == 9);
    auto index = json::parse(slurp(dir / "cache" / "relations.json"));
    CHECK(index["relations"].size() == 9);
    for (const auto& [name, entry] : index["relations"].items()) {
      CHECK(entry.contains("nnz"));
      CHECK(entry.contains("min"));
      CHECK(entry.contains("max"));
      CHECK(entry["percentile"] == 99.0);
    }
    CHECK(r.out.find("9 computed") != std::string::npos);

    auto again = cli_run({"relations", "--graph", manifest.string(), "--relations", "all", "--fraction", "0.5",
                          "--cache", (dir / "cache").string()});
    CHECK(again.code == 0);
    CHECK(again.out.find("0 computed, 9 cached") != std::string::npos);
    auto forced = cli_run({"relations", "--graph", manifest.string(), "--relations", "all", "--fraction", "0.5",
                           "--cache", (dir / "cache").string(), "--force"});
    CHECK(forced.out.find("9 computed") != std::string::npos);
  }

  TEST_CASE("cache directory comes from the environment when not given") {
    auto dir = fixture::temp_dir("cli-env");
    auto manifest = labeled_triangle(dir);
    ScopedEnv env("TASKCL_CACHE", (dir / "envcache").string());
    auto r = cli_run({"relations", "--graph", manifest.string(), "--relations", "link", "--fraction", "0.5"});
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "envcache" / "link.sim"));
  }

  TEST_CASE("label relations without labels name the relation") {
    auto dir = fixture::temp_dir("cli-nolabels");
    auto manifest = save_graph(fixture::triangle(), dir);
    auto r = cli_run({"relations", "--graph", manifest.string(), "--relations", "link,label_dist2", "--task", "lp",
                      "--cache", (dir / "cache").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("label_dist2") != std::string::npos);
  }

  TEST_CASE("exit codes") {
    auto dir = fixture::temp_dir("cli-exit");
    CHECK(cli_run({"relations", "--bogus"}).code == 2);
    CHECK(cli_run({}).code == 2);
    CHECK(cli_run({"relations", "--graph", (dir / "missing.json").string()}).code == 3);
    std::ofstream(dir / "cfg.json") << R"({"graph": "g.json", "train": {"strategy": "magic"}})";
    CHECK(cli_run({"pipeline", "--config", (dir / "cfg.json").string()}).code == 2);
    auto manifest = save_graph(fixture::random_small(20, 0.3, 2), dir);
    auto r = cli_run({"embed", "--graph", manifest.string(), "--strategy", "sscl", "--relations", "link", "--cache",
                      (dir / "cache").string(), "--lr", "1e300", "--epochs", "20", "--hidden", "4", "--dim", "2",
                      "--out", (dir / "z.tclm").string()});
    CAPTURE(r.err);
    CHECK(r.code == 4);
    CHECK(cli_run({"--help"}).code == 0);
  }

  TEST_CASE("help lists every flag exactly once") {
    for (std::string sub : {"relations", "split", "train-sampler", "sample", "embed", "eval", "perturb", "weights",
                            "bench", "generate", "pipeline"}) {
      auto r = cli_run({sub, "--help"});
      CAPTURE(sub);
      REQUIRE(r.code == 0);
      std::map<std::string, int> count;
      static const std::regex flag(R"(--[a-z][a-z0-9-]*)");
      for (auto it = std::sregex_iterator(r.out.begin(), r.out.end(), flag); it != std::sregex_iterator(); ++it)
        ++count[it->str()];
      CHECK(count.size() >= 2);
      for (const auto& [name, c] : count) {
        CAPTURE(name);
        CHECK(c == 1);
      }
    }
  }

  TEST_CASE("stage commands chain into an evaluation") {
    auto dir = fixture::temp_dir("cli-chain");
    auto g = bundled_sbm().string();
    auto cache = (dir / "cache").string();
    CHECK(cli_run({"split", "--graph", g, "--seed", "2", "--out", (dir / "split.json").string()}).code == 0);
    const std::vector<std::string> common{"--graph", g, "--split", (dir / "split.json").string(), "--cache", cache};
    auto with = [&](std::vector<std::string> a) {
      a.insert(a.begin() + 1, common.begin(), common.end());
      return cli_run(a);
    };
    CHECK(with({"train-sampler", "--out", (dir / "s.xgs").string()}).code == 0);
    CHECK(with({"sample", "--sampler", (dir / "s.xgs").string(), "--B", "3", "--out", (dir / "pos.txt").string()})
              .code == 0);
    std::ifstream pos(dir / "pos.txt");
    std::string line;
    std::getline(pos, line);
    CHECK(std::count(line.begin(), line.end(), ' ') == 3);
    auto em = with({"embed", "--sampler", (dir / "s.xgs").string(), "--epochs", "10", "--hidden", "16", "--dim", "8",
                    "--out", (dir / "z.tclm").string()});
    CAPTURE(em.err);
    CHECK(em.code == 0);
    CHECK(io::load_tclm(dir / "z.tclm").rows() == 400);
    CHECK(fs::exists(dir / "z.tclm.loss.csv"));
    auto ev = cli_run({"eval", "--graph", g, "--split", (dir / "split.json").string(), "--embeddings",
                       (dir / "z.tclm").string()});
    CHECK(ev.code == 0);
    auto report = json::parse(ev.out);
    CHECK(report["metric"] == "accuracy");
    CHECK(report["value"].get<double>() > 0.5);
    auto w = cli_run({"weights", "--sampler", (dir / "s.xgs").string()});
    CHECK(w.code == 0);
    CHECK(w.out.rfind("relation,weight\n", 0) == 0);
  }

  TEST_CASE("perturb and bench commands write their outputs") {
    auto dir = fixture::temp_dir("cli-misc");
    auto g = bundled_sbm().string();
    auto r = cli_run({"perturb", "--graph", g, "--cache", (dir / "cache").string(), "--p", "80", "--q", "0.5",
                      "--out", (dir / "labels.txt").string(), "--log", (dir / "log.json").string()});
    CAPTURE(r.err);
    CHECK(r.code == 0);
    std::ifstream is(dir / "labels.txt");
    std::size_t lines = 0;
    for (std::string l; std::getline(is, l);) ++lines;
    CHECK(lines == 400);
    auto b = cli_run({"bench", "--sizes", "200,400", "--relations", "link,jaccard", "--out", (dir / "t.csv").string()});
    CHECK(b.code == 0);
    auto csv = slurp(dir / "t.csv");
    CHECK(csv.rfind("n,phase,seconds\n", 0) == 0);
    CHECK(csv.find("400,sampler,") != std::string::npos);
  }

  TEST_CASE("pipeline report has every key and is reproducible") {
    auto dir = fixture::temp_dir("cli-pipeline");
    const auto out = (dir / "run").string();
    auto first = cli_run({"pipeline", "--graph", bundled_sbm().string(), "--seed", "5", "--out", out});
    CAPTURE(first.err);
    REQUIRE(first.code == 0);
    auto report = json::parse(slurp(dir / "run" / "report.json"));
    for (const char* key : {"config", "config_hash", "seeds", "graph", "task", "strategy", "metrics",
                            "positive_precision", "sampler", "loss", "artifacts", "timing"})
      CHECK(report.contains(key));
    CHECK(report["sampler"]["importance_weights"].size() == 9);
    CHECK(report["metrics"]["value"].get<double>() > 0.8);

    std::map<std::string, std::string> bytes;
    for (const auto& e : fs::directory_iterator(dir / "run"))
      if (e.is_regular_file() && e.path().filename() != "report.json") bytes[e.path().filename()] = slurp(e.path());
    report.erase("timing");
    fs::remove_all(dir / "run" / "cache");
    auto second = cli_run({"pipeline", "--graph", bundled_sbm().string(), "--seed", "5", "--out", out});
    REQUIRE(second.code == 0);
    for (const auto& [name, content] : bytes) {
      CAPTURE(name);
      CHECK(slurp(dir / "run" / name) == content);
    }
    auto again = json::parse(slurp(dir / "run" / "report.json"));
    again.erase("timing");
    CHECK(again == report);
  }
}
