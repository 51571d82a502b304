#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "mgcsl/graph_sim.hpp"

using namespace mgcsl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mgcsl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++n;
  }
  return n;
}

opt::HyperParams tiny_params() {
  opt::HyperParams hp;
  hp.q = 2;
  hp.mlp_hidden = 3;
  hp.max_outer = 2;
  hp.inner_max_evals = 20;
  return hp;
}

cli::BenchOptions tiny_bench(const fs::path& out) {
  cli::BenchOptions o;
  o.dims = {4};
  o.seeds = 2;
  o.n = 40;
  o.hp = tiny_params();
  o.threads = 1;
  o.out = out;
  return o;
}

}  // namespace

TEST(Generate, WritesReplicatesWithTruth) {
  cli::GenerateOptions o;
  o.d = 5;
  o.n = 30;
  o.reps = 2;
  o.out = scratch_dir("gen");
  cli::run_generate(o);
  EXPECT_TRUE(fs::exists(o.out / "config.json"));
  for (const char* name : {"rep000", "rep001"}) {
    const auto ds = sim::read_dataset(o.out / (std::string(name) + ".csv"));
    EXPECT_EQ(ds.X.rows(), 30);
    EXPECT_EQ(ds.X.cols(), 5);
    ASSERT_TRUE(ds.truth.has_value());
    EXPECT_TRUE(ds.truth->is_acyclic());
  }
  EXPECT_NE(slurp(o.out / "rep000.csv"), slurp(o.out / "rep001.csv"));
  const auto config = nlohmann::json::parse(slurp(o.out / "config.json"));
  EXPECT_EQ(config.at("command"), "generate");
  EXPECT_EQ(config.at("options").at("reps"), 2);
}

TEST(Generate, ZeroReplicatesWritesNothing) {
  cli::GenerateOptions o;
  o.reps = 0;
  o.out = scratch_dir("gen0") / "inner";
  cli::run_generate(o);
  EXPECT_FALSE(fs::exists(o.out));
}

TEST(Generate, MacroDecompositionWidensColumns) {
  cli::GenerateOptions o;
  o.graph = "sf";
  o.d = 20;
  o.n = 50;
  o.macros = 2;
  o.micro_per_macro = 8;
  o.gp_features = 100;
  o.out = scratch_dir("genmacro");
  cli::run_generate(o);
  const auto ds = sim::read_dataset(o.out / "rep000.csv");
  EXPECT_EQ(ds.X.cols(), 34);
  EXPECT_EQ(ds.truth->macros.size(), 2u);
}

TEST(Generate, RejectsBadOptions) {
  cli::GenerateOptions o;
  o.reps = -1;
  EXPECT_THROW(cli::run_generate(o), cli::UsageError);
  o.reps = 1;
  o.d = 3;
  o.macros = 4;
  EXPECT_THROW(cli::run_generate(o), cli::UsageError);
}

TEST(FitAndEval, EndToEnd) {
  const fs::path root = scratch_dir("fit");
  cli::GenerateOptions g;
  g.d = 4;
  g.n = 50;
  g.out = root / "data";
  cli::run_generate(g);

  for (auto kind : {acyclic::ConstraintKind::kSchurEigen, acyclic::ConstraintKind::kTraceExp}) {
    cli::FitOptions f;
    f.data = g.out / "rep000.csv";
    f.hp = tiny_params();
    f.hp.constraint = kind;
    f.out = root / acyclic::to_string(kind);
    const auto r = cli::run_fit(f);
    EXPECT_EQ(r.C.rows(), 4);
    for (const char* file : {"config.json", "fit.json", "graph_c.csv", "graph_sa.csv", "timing.json"}) {
      EXPECT_TRUE(fs::exists(f.out / file)) << file;
    }
    const auto fit_json = nlohmann::json::parse(slurp(f.out / "fit.json"));
    EXPECT_TRUE(fit_json.contains("config"));

    cli::EvalOptions e;
    e.estimate = f.out / "graph_c.csv";
    e.truth = f.data;
    e.out = f.out / "eval";
    const auto m = cli::run_eval(e);
    EXPECT_TRUE(fs::exists(e.out / "metrics.json"));
    EXPECT_GE(m.shd, 0);

    e.estimate = f.out / "graph_sa.csv";
    e.project_macros = true;
    EXPECT_NO_THROW(cli::run_eval(e));
  }
}

TEST(Eval, IdentityScoresPerfectly) {
  const fs::path root = scratch_dir("evalid");
  const auto truth = sim::gen_er_dag(6, 2.0, 3);
  sim::write_truth(truth, root / "truth.json");
  eval::write_graph(CausalGraph::micro(truth.adjacency()), root / "est.csv");

  cli::EvalOptions e;
  e.estimate = root / "est.csv";
  e.truth = root / "truth.json";
  e.out = root / "out";
  const auto m = cli::run_eval(e);
  EXPECT_EQ(m.shd, 0);
  EXPECT_EQ(m.precision, truth.edges.empty() ? 0.0 : 1.0);

  e.project_macros = true;
  EXPECT_EQ(cli::run_eval(e).shd, 0);
}

TEST(Bench, EmptyGridWritesHeadersOnly) {
  auto o = tiny_bench(scratch_dir("benchempty"));
  o.seeds = 0;
  const auto r = cli::run_bench(o);
  EXPECT_TRUE(r.replicates.empty());
  EXPECT_EQ(line_count(o.out / "detail.csv"), 1);
  EXPECT_EQ(line_count(o.out / "summary.csv"), 1);
}

TEST(Bench, OneCellTwoSeeds) {
  auto o = tiny_bench(scratch_dir("bench"));
  const auto r = cli::run_bench(o);
  ASSERT_EQ(r.replicates.size(), 2u);
  for (const auto& rep : r.replicates) EXPECT_TRUE(rep.ok) << rep.error;
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].replicates, 2);
  EXPECT_EQ(r.cells[0].failures, 0);
  EXPECT_DOUBLE_EQ(r.cells[0].runtime_ratio_vs_schur, 1.0);
  EXPECT_EQ(line_count(o.out / "detail.csv"), 3);
  EXPECT_EQ(line_count(o.out / "summary.csv"), 2);
  EXPECT_TRUE(fs::exists(o.out / "summary.json"));
  EXPECT_TRUE(fs::exists(o.out / "er_d4_schur" / "seed0" / "metrics.json"));
  EXPECT_TRUE(fs::exists(o.out / "er_d4_schur" / "seed1" / "graph_c.csv"));
}

TEST(Bench, ReplicateIsReproducible) {
  const fs::path root = scratch_dir("repro");
  auto o = tiny_bench(root);
  const auto a = cli::run_replicate(o, "er", 5, "schur", 7, root / "a");
  const auto b = cli::run_replicate(o, "er", 5, "schur", 7, root / "b");
  ASSERT_TRUE(a.ok && b.ok);
  EXPECT_EQ(cli::comparable_metrics(a.metrics_json), cli::comparable_metrics(b.metrics_json));
  EXPECT_EQ(slurp(root / "a" / "graph_c.csv"), slurp(root / "b" / "graph_c.csv"));
}

TEST(Bench, RejectsUnknownGraphKind) {
  auto o = tiny_bench(scratch_dir("benchbad"));
  o.graphs = {"grid"};
  EXPECT_THROW(cli::run_bench(o), cli::UsageError);
}

TEST(Bench, PoolSizePrecedence) {
  ::unsetenv("MGCSL_THREADS");
  EXPECT_EQ(cli::pool_size(3), 3);
  EXPECT_GE(cli::pool_size(0), 1);
  ::setenv("MGCSL_THREADS", "2", 1);
  EXPECT_EQ(cli::pool_size(5), 2);
  ::unsetenv("MGCSL_THREADS");
}
