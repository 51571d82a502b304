#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mgcsl/acyclicity.hpp"
#include "mgcsl/errors.hpp"
#include "mgcsl/version.hpp"

namespace {

using namespace mgcsl;

// Flags shared by fit and bench.
void add_hyperparameter_flags(CLI::App& cmd, opt::HyperParams& hp, std::string& scaling, std::string& activation) {
  cmd.add_option("--alpha1", hp.alpha1, "encoder L1 weight")->capture_default_str();
  cmd.add_option("--alpha2", hp.alpha2, "MLP weight penalty")->capture_default_str();
  cmd.add_option("--eta", hp.eta, "penalty growth factor")->capture_default_str();
  cmd.add_option("--rho", hp.rho, "required constraint decrease ratio")->capture_default_str();
  cmd.add_option("--epsilon", hp.epsilon, "edge threshold")->capture_default_str();
  cmd.add_option("--mu0", hp.mu0, "initial penalty")->capture_default_str();
  cmd.add_option("--h-tol", hp.h_tolerance, "constraint tolerance")->capture_default_str();
  cmd.add_option("--max-outer", hp.max_outer, "outer iterations")->capture_default_str();
  cmd.add_option("--inner-evals", hp.inner_max_evals, "objective evaluations per inner solve")
      ->capture_default_str();
  cmd.add_option("--q", hp.q, "macro-variable slots")->capture_default_str();
  cmd.add_option("--mlp-hidden", hp.mlp_hidden, "hidden units per MLP")->capture_default_str();
  cmd.add_option("--scaling", scaling, "column preprocessing")
      ->check(CLI::IsMember({"none", "center", "zscore"}))
      ->capture_default_str();
  cmd.add_flag("--sign-split", hp.sign_split, "store MLP first layers as bounded nonnegative halves");
  cmd.add_option("--activation", activation, "sigmoid or tanh")
      ->check(CLI::IsMember({"sigmoid", "tanh"}))
      ->capture_default_str();
}

void finish_hyperparameters(opt::HyperParams& hp, const std::string& scaling, const std::string& activation) {
  hp.scaling = opt::scaling_from_string(scaling);
  hp.activation = activation == "tanh" ? ad::Activation::kTanh : ad::Activation::kSigmoid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-granularity causal structure learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version_string()));

  cli::GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "simulate datasets with ground-truth graphs");
  generate->add_option("--graph", gen.graph, "er or sf")->check(CLI::IsMember({"er", "sf"}))->capture_default_str();
  generate->add_option("--d", gen.d, "number of variables")->capture_default_str();
  generate->add_option("--degree", gen.degree, "expected degree")->capture_default_str();
  generate->add_option("--sem", gen.sem, "gp or gp-add")->check(CLI::IsMember({"gp", "gp-add"}))->capture_default_str();
  generate->add_option("--n", gen.n, "samples")->capture_default_str();
  generate->add_option("--macros", gen.macros, "columns to decompose into micro-variables")->capture_default_str();
  generate->add_option("--micro-per-macro", gen.micro_per_macro)->capture_default_str();
  generate->add_option("--reps", gen.reps, "replicates")->capture_default_str();
  generate->add_option("--seed", gen.seed)->capture_default_str();
  generate->add_option("--gp-features", gen.gp_features, "random Fourier features per GP draw, 0 for exact")
      ->capture_default_str();
  generate->add_option("--out", gen.out, "output directory")->capture_default_str();

  cli::FitOptions fit;
  std::string fit_scaling = opt::to_string(fit.hp.scaling);
  std::string fit_activation = "sigmoid";
  std::string fit_constraint = "schur";
  auto* fit_cmd = app.add_subcommand("fit", "learn a graph from a dataset CSV");
  fit_cmd->add_option("--data", fit.data, "dataset CSV")->required();
  fit_cmd->add_option("--constraint", fit_constraint)->check(CLI::IsMember({"schur", "exp"}))->capture_default_str();
  fit_cmd->add_option("--seed", fit.hp.seed)->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "output directory")->capture_default_str();
  add_hyperparameter_flags(*fit_cmd, fit.hp, fit_scaling, fit_activation);

  cli::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "score an estimated graph against the truth");
  eval_cmd->add_option("--est", ev.estimate, "estimated graph CSV")->required();
  eval_cmd->add_option("--truth", ev.truth, "truth JSON, or the dataset CSV next to it")->required();
  eval_cmd->add_flag("--project-macros", ev.project_macros, "expand macro edges onto member micro-variables");
  eval_cmd->add_option("--out", ev.out, "output directory")->capture_default_str();

  cli::BenchOptions bench;
  std::string bench_scaling = opt::to_string(bench.hp.scaling);
  std::string bench_activation = "sigmoid";
  auto* bench_cmd = app.add_subcommand("bench", "generate, fit and score over a grid");
  bench_cmd->add_option("--graphs", bench.graphs)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--dims", bench.dims)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--constraints", bench.constraints)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--seeds", bench.seeds, "replicates per cell")->capture_default_str();
  bench_cmd->add_option("--seed-base", bench.seed_base)->capture_default_str();
  bench_cmd->add_option("--degree", bench.degree)->capture_default_str();
  bench_cmd->add_option("--sem", bench.sem)->check(CLI::IsMember({"gp", "gp-add"}))->capture_default_str();
  bench_cmd->add_option("--n", bench.n)->capture_default_str();
  bench_cmd->add_option("--gp-features", bench.gp_features)->capture_default_str();
  bench_cmd->add_option("--threads", bench.threads, "worker pool size (MGCSL_THREADS overrides)");
  bench_cmd->add_flag("--keep-artifacts", bench.keep_artifacts, "also write datasets and fit results");
  bench_cmd->add_option("--out", bench.out, "output directory")->capture_default_str();
  add_hyperparameter_flags(*bench_cmd, bench.hp, bench_scaling, bench_activation);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) {
      cli::run_generate(gen);
    } else if (*fit_cmd) {
      finish_hyperparameters(fit.hp, fit_scaling, fit_activation);
      fit.hp.constraint = acyclic::constraint_from_string(fit_constraint);
      cli::run_fit(fit);
    } else if (*eval_cmd) {
      cli::run_eval(ev);
    } else if (*bench_cmd) {
      finish_hyperparameters(bench.hp, bench_scaling, bench_activation);
      cli::run_bench(bench);
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
