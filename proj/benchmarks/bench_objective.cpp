#include <benchmark/benchmark.h>

#include "mgcsl/graph_sim.hpp"
#include "mgcsl/optimizer.hpp"

using namespace mgcsl;

namespace {

void objective_eval(benchmark::State& state, acyclic::ConstraintKind kind) {
  const int d = static_cast<int>(state.range(0));
  sim::SemOptions so;
  so.random_features = true;
  const Matrix X = sim::sample_gp_sem(sim::gen_er_dag(d, 2.0, 1), 1000, so, 2).X;
  opt::HyperParams hp;
  hp.constraint = kind;
  opt::FitObjective obj(X, hp);
  obj.set_duals(1.0, 1.0);
  const Vector theta = obj.initial_parameters().flatten();
  Vector grad(theta.size());
  for (auto _ : state) benchmark::DoNotOptimize(obj.value_and_gradient(theta, grad));
}

void BM_ObjectiveSchur(benchmark::State& state) { objective_eval(state, acyclic::ConstraintKind::kSchurEigen); }
void BM_ObjectiveTraceExp(benchmark::State& state) { objective_eval(state, acyclic::ConstraintKind::kTraceExp); }

}  // namespace

BENCHMARK(BM_ObjectiveSchur)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ObjectiveTraceExp)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
