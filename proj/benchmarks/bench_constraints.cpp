#include <random>

#include <benchmark/benchmark.h>

#include "mgcsl/acyclicity.hpp"

using namespace mgcsl;

namespace {

Matrix dense_weights(int d) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(d));
  std::uniform_real_distribution<double> u(0.0, 0.3);
  Matrix C(d, d);
  for (Eigen::Index i = 0; i < C.size(); ++i) C.data()[i] = u(rng);
  return C;
}

void BM_Schur(benchmark::State& state) {
  const Matrix C = dense_weights(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(acyclic::h_schur(C).value);
}

void BM_TraceExp(benchmark::State& state) {
  const Matrix C = dense_weights(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(acyclic::h_trace_exp(C).value);
}

}  // namespace

BENCHMARK(BM_Schur)->Arg(10)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TraceExp)->Arg(10)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
