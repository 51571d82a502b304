#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgcsl/eval.hpp"
#include "mgcsl/optimizer.hpp"

namespace mgcsl::cli {

using nlohmann::json;

// Raised for bad flag combinations; main maps it to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GenerateOptions {
  std::string graph = "er";  // er | sf
  int d = 20;
  double degree = 2.0;
  std::string sem = "gp-add";  // gp | gp-add
  int n = 1000;
  int macros = 0;
  int micro_per_macro = 8;
  int reps = 1;
  std::uint64_t seed = 0;
  int gp_features = 0;  // 0 = exact GP draws
  std::filesystem::path out = "generate_out";
};

struct FitOptions {
  std::filesystem::path data;
  opt::HyperParams hp;
  std::filesystem::path out = "fit_out";
};

struct EvalOptions {
  std::filesystem::path estimate;
  std::filesystem::path truth;
  bool project_macros = false;
  std::filesystem::path out = "eval_out";
};

struct BenchOptions {
  std::vector<std::string> graphs = {"er"};
  std::vector<int> dims = {20};
  std::vector<std::string> constraints = {"schur"};
  int seeds = 5;
  std::uint64_t seed_base = 0;
  double degree = 2.0;
  std::string sem = "gp-add";
  int n = 1000;
  int gp_features = 0;
  opt::HyperParams hp;  // constraint and seed are set per replicate
  int threads = 0;      // 0 = MGCSL_THREADS or hardware concurrency
  bool keep_artifacts = false;
  std::filesystem::path out = "bench_out";
};

// One (graph, d, constraint, seed) run of a bench grid.
struct Replicate {
  std::string graph;
  int d = 0;
  std::string constraint;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  eval::MetricsReport metrics;
  std::string reason;
  double final_h = 0.0;
  std::string metrics_json;  // exact text written to metrics.json
};

struct CellSummary {
  std::string graph;
  int d = 0;
  std::string constraint;
  int replicates = 0;
  int failures = 0;
  double precision_mean = 0, precision_std = 0;
  double recall_mean = 0, recall_std = 0;
  double f1_mean = 0, f1_std = 0;
  double shd_mean = 0, shd_std = 0;
  double runtime_mean = 0, runtime_std = 0;
  double runtime_ratio_vs_schur = 0;  // NaN without a schur cell of the same graph and d
};

struct BenchResult {
  std::vector<Replicate> replicates;
  std::vector<CellSummary> cells;
};

json generate_config(const GenerateOptions& o);
json fit_config(const FitOptions& o);
json eval_config(const EvalOptions& o);
json bench_config(const BenchOptions& o);

void run_generate(const GenerateOptions& o);
opt::FitResult run_fit(const FitOptions& o);
eval::MetricsReport run_eval(const EvalOptions& o);
BenchResult run_bench(const BenchOptions& o);

/// Runs a single bench replicate in `dir` without touching the summary files.
Replicate run_replicate(const BenchOptions& o, const std::string& graph, int d,
                        const std::string& constraint, std::uint64_t seed,
                        const std::filesystem::path& dir);

/// Metrics JSON with the wall-clock field removed, for reproducibility checks.
json comparable_metrics(const std::string& metrics_json);

/// MGCSL_THREADS when set and positive, else `requested` when positive, else
/// the hardware concurrency (at least 1).
int pool_size(int requested);

}  // namespace mgcsl::cli
