#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "mgcsl/acyclicity.hpp"
#include "mgcsl/errors.hpp"
#include "mgcsl/graph_sim.hpp"
#include "mgcsl/serialize.hpp"
#include "mgcsl/version.hpp"

namespace mgcsl::cli {

namespace fs = std::filesystem;

namespace {

std::mutex log_mutex;

void log(const std::string& line) {
  std::lock_guard lock(log_mutex);
  std::cerr << line << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

json envelope(const std::string& command, json options) {
  return {{"command", command}, {"version", std::string(version_string())}, {"options", std::move(options)}};
}

void write_config(const fs::path& dir, const json& config) {
  write_text(dir / "config.json", config.dump(2));
}

json hp_json(const opt::HyperParams& hp) { return json::parse(io::hyperparams_to_json(hp)); }

sim::GroundTruthGraph make_graph(const std::string& kind, int d, double degree, std::uint64_t seed) {
  if (kind == "er") return sim::gen_er_dag(d, degree, seed);
  if (kind == "sf") return sim::gen_sf_dag(d, degree, seed);
  throw UsageError("--graph must be er or sf, got '" + kind + "'");
}

sim::SemOptions sem_options(const std::string& sem, int gp_features) {
  sim::SemOptions so;
  if (sem == "gp") {
    so.additive = false;
  } else if (sem != "gp-add") {
    throw UsageError("--sem must be gp or gp-add, got '" + sem + "'");
  }
  if (gp_features < 0) throw UsageError("--gp-features must be >= 0");
  so.random_features = gp_features > 0;
  if (gp_features > 0) so.num_features = gp_features;
  return so;
}

std::string rep_name(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "rep%03d", k);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string cell_dir_name(const std::string& graph, int d, const std::string& constraint) {
  return graph + "_d" + std::to_string(d) + "_" + constraint;
}

}  // namespace

int pool_size(int requested) {
  if (const char* env = std::getenv("MGCSL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------

json generate_config(const GenerateOptions& o) {
  return envelope("generate", {{"graph", o.graph},
                               {"d", o.d},
                               {"degree", o.degree},
                               {"sem", o.sem},
                               {"n", o.n},
                               {"macros", o.macros},
                               {"micro_per_macro", o.micro_per_macro},
                               {"reps", o.reps},
                               {"seed", o.seed},
                               {"gp_features", o.gp_features},
                               {"out", o.out.string()}});
}

void run_generate(const GenerateOptions& o) {
  if (o.reps < 0) throw UsageError("--reps must be >= 0");
  if (o.macros < 0 || o.micro_per_macro < 1) {
    throw UsageError("--macros must be >= 0 and --micro-per-macro >= 1");
  }
  if (o.macros > o.d) throw UsageError("--macros cannot exceed --d");
  const sim::SemOptions so = sem_options(o.sem, o.gp_features);
  const json config = generate_config(o);
  if (o.reps == 0) return;
  write_config(o.out, config);
  for (int k = 0; k < o.reps; ++k) {
    const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(k);
    const sim::GroundTruthGraph g = make_graph(o.graph, o.d, o.degree, seed);
    sim::Dataset ds = sim::sample_gp_sem(g, o.n, so, seed + 1000);
    if (o.macros > 0) ds = sim::decompose_macro(ds, o.macros, o.micro_per_macro, seed + 2000);
    json prov = json::parse(ds.provenance.empty() ? "{}" : ds.provenance);
    prov["config"] = config;
    prov["replicate"] = k;
    ds.provenance = prov.dump();
    const fs::path path = o.out / (rep_name(k) + ".csv");
    sim::write_dataset(ds, path);
    log("generate: wrote " + path.string() + " (" + std::to_string(ds.d()) + " columns, " +
        std::to_string(ds.truth ? ds.truth->edges.size() : 0) + " edges)");
  }
}

// ---------------------------------------------------------------------------

json fit_config(const FitOptions& o) {
  return envelope("fit", {{"data", o.data.string()}, {"hyperparameters", hp_json(o.hp)}, {"out", o.out.string()}});
}

opt::FitResult run_fit(const FitOptions& o) {
  if (o.data.empty()) throw UsageError("--data is required");
  const sim::Dataset ds = sim::read_dataset(o.data);
  const json config = fit_config(o);
  write_config(o.out, config);

  const auto progress = [](const opt::TraceEntry& t) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "fit: outer %d h=%.4g mu=%.3g gamma=%.3g objective=%.6g evals=%d (%s)",
                  t.outer, t.h, t.mu, t.gamma, t.objective, t.inner_evaluations, t.inner_stop.c_str());
    log(buf);
  };
  opt::FitResult r = opt::fit(ds.X, o.hp, progress);

  const int d = static_cast<int>(ds.d());
  const CausalGraph micro = eval::postprocess(r.C, o.hp.epsilon);
  const SupportMatrix support = support_from_contribution(r.A, o.hp.support_threshold);
  const CausalGraph multi = eval::postprocess(r.S, o.hp.epsilon, support);
  eval::write_graph(micro, o.out / "graph_c.csv", ds.columns);
  eval::write_graph(multi, o.out / "graph_sa.csv", ds.columns);

  const json extra = {{"config", config},
                      {"version", std::string(version_string())},
                      {"d", d},
                      {"graph_c_edges", micro.num_edges()},
                      {"graph_sa_edges", multi.num_edges()},
                      {"graph_c_is_dag", acyclic::is_dag_exact(micro)},
                      {"graph_sa_is_acyclic", acyclic::mg_is_acyclic(multi)}};
  write_text(o.out / "fit.json", io::fit_result_to_json(r, extra.dump()));
  write_text(o.out / "timing.json",
             json{{"wall_clock_seconds", r.seconds}, {"config", config}, {"version", std::string(version_string())}}
                 .dump(2));
  log("fit: " + r.reason + " after " + std::to_string(r.trace.size()) + " outer iterations, " +
      std::to_string(r.seconds) + " s, " + std::to_string(micro.num_edges()) + " edges");
  return r;
}

// ---------------------------------------------------------------------------

json eval_config(const EvalOptions& o) {
  return envelope("eval", {{"estimate", o.estimate.string()},
                           {"truth", o.truth.string()},
                           {"project_macros", o.project_macros},
                           {"out", o.out.string()}});
}

eval::MetricsReport run_eval(const EvalOptions& o) {
  if (o.estimate.empty() || o.truth.empty()) throw UsageError("--est and --truth are required");
  CausalGraph est = eval::read_graph(o.estimate);
  fs::path truth_path = o.truth;
  if (truth_path.extension() == ".csv") truth_path = sim::truth_path_for(truth_path);
  const sim::GroundTruthGraph truth = sim::read_truth(truth_path);
  if (o.project_macros) est = eval::project_multigranularity(est);
  const json config = eval_config(o);
  write_config(o.out, config);
  const eval::MetricsReport m = eval::metrics(est, truth);
  const json extra = {{"config", config}, {"version", std::string(version_string())}};
  write_text(o.out / "metrics.json", io::metrics_to_json(m, extra.dump()));
  log("eval: precision " + csv_number(m.precision) + " recall " + csv_number(m.recall) + " shd " +
      std::to_string(m.shd));
  return m;
}

// ---------------------------------------------------------------------------

json bench_config(const BenchOptions& o) {
  json hp = hp_json(o.hp);
  hp.erase("constraint");
  hp.erase("seed");
  return envelope("bench", {{"graphs", o.graphs},
                            {"dims", o.dims},
                            {"constraints", o.constraints},
                            {"seeds", o.seeds},
                            {"seed_base", o.seed_base},
                            {"degree", o.degree},
                            {"sem", o.sem},
                            {"n", o.n},
                            {"gp_features", o.gp_features},
                            {"hyperparameters", hp},
                            {"keep_artifacts", o.keep_artifacts},
                            {"out", o.out.string()}});
}

Replicate run_replicate(const BenchOptions& o, const std::string& graph, int d, const std::string& constraint,
                        std::uint64_t seed, const fs::path& dir) {
  Replicate rep;
  rep.graph = graph;
  rep.d = d;
  rep.constraint = constraint;
  rep.seed = seed;
  try {
    opt::HyperParams hp = o.hp;
    hp.constraint = acyclic::constraint_from_string(constraint);
    hp.seed = seed;
    const sim::GroundTruthGraph g = make_graph(graph, d, o.degree, seed);
    const sim::Dataset ds = sim::sample_gp_sem(g, o.n, sem_options(o.sem, o.gp_features), seed + 1000);
    if (o.keep_artifacts) sim::write_dataset(ds, dir / "data.csv");

    const opt::FitResult r = opt::fit(ds.X, hp);
    const CausalGraph est = eval::postprocess(r.C, hp.epsilon);
    rep.metrics = eval::metrics(est, g);
    rep.metrics.runtime_seconds = r.seconds;
    rep.reason = r.reason;
    rep.final_h = r.final_h;

    const json cell = {{"graph", graph}, {"d", d}, {"constraint", constraint}, {"seed", seed}};
    const json extra = {{"cell", cell},
                        {"reason", r.reason},
                        {"final_h", r.final_h},
                        {"config", bench_config(o)},
                        {"version", std::string(version_string())}};
    rep.metrics_json = io::metrics_to_json(rep.metrics, extra.dump());
    write_text(dir / "metrics.json", rep.metrics_json);
    eval::write_graph(est, dir / "graph_c.csv", ds.columns);
    if (o.keep_artifacts) write_text(dir / "fit.json", io::fit_result_to_json(r, json{{"cell", cell}}.dump()));
    rep.ok = true;
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  return rep;
}

BenchResult run_bench(const BenchOptions& o) {
  if (o.seeds < 0) throw UsageError("--seeds must be >= 0");
  for (const auto& c : o.constraints) acyclic::constraint_from_string(c);
  for (const auto& g : o.graphs) {
    if (g != "er" && g != "sf") throw UsageError("--graphs entries must be er or sf, got '" + g + "'");
  }
  sem_options(o.sem, o.gp_features);
  o.hp.validate();

  const json config = bench_config(o);
  write_config(o.out, config);

  struct Job {
    std::string graph;
    int d;
    std::string constraint;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& g : o.graphs) {
    for (int d : o.dims) {
      for (const auto& c : o.constraints) {
        for (int k = 0; k < o.seeds; ++k) jobs.push_back({g, d, c, o.seed_base + static_cast<std::uint64_t>(k)});
      }
    }
  }

  BenchResult result;
  result.replicates.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const fs::path dir =
          o.out / cell_dir_name(job.graph, job.d, job.constraint) / ("seed" + std::to_string(job.seed));
      log("bench: start " + cell_dir_name(job.graph, job.d, job.constraint) + " seed " + std::to_string(job.seed));
      result.replicates[i] = run_replicate(o, job.graph, job.d, job.constraint, job.seed, dir);
      const Replicate& r = result.replicates[i];
      log("bench: done  " + cell_dir_name(job.graph, job.d, job.constraint) + " seed " +
          std::to_string(job.seed) +
          (r.ok ? " shd " + std::to_string(r.metrics.shd) + " time " + csv_number(r.metrics.runtime_seconds) + " s"
                : " FAILED: " + r.error));
    }
  };
  const int threads = std::min<int>(pool_size(o.threads), std::max<int>(1, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Aggregate per cell, in grid order.
  std::map<std::tuple<std::string, int, std::string>, std::size_t> index;
  for (const Replicate& r : result.replicates) {
    const auto key = std::make_tuple(r.graph, r.d, r.constraint);
    if (!index.count(key)) {
      index[key] = result.cells.size();
      CellSummary cell;
      cell.graph = r.graph;
      cell.d = r.d;
      cell.constraint = r.constraint;
      result.cells.push_back(cell);
    }
  }
  for (CellSummary& cell : result.cells) {
    std::vector<double> p, rc, f1, shd, rt;
    for (const Replicate& r : result.replicates) {
      if (r.graph != cell.graph || r.d != cell.d || r.constraint != cell.constraint) continue;
      ++cell.replicates;
      if (!r.ok) {
        ++cell.failures;
        continue;
      }
      p.push_back(r.metrics.precision);
      rc.push_back(r.metrics.recall);
      f1.push_back(r.metrics.f1);
      shd.push_back(r.metrics.shd);
      rt.push_back(r.metrics.runtime_seconds);
    }
    cell.precision_mean = mean_of(p), cell.precision_std = std_of(p);
    cell.recall_mean = mean_of(rc), cell.recall_std = std_of(rc);
    cell.f1_mean = mean_of(f1), cell.f1_std = std_of(f1);
    cell.shd_mean = mean_of(shd), cell.shd_std = std_of(shd);
    cell.runtime_mean = mean_of(rt), cell.runtime_std = std_of(rt);
  }
  for (CellSummary& cell : result.cells) {
    cell.runtime_ratio_vs_schur = std::numeric_limits<double>::quiet_NaN();
    const auto it = index.find(std::make_tuple(cell.graph, cell.d, std::string("schur")));
    if (it != index.end()) {
      const double base = result.cells[it->second].runtime_mean;
      if (base > 0.0) cell.runtime_ratio_vs_schur = cell.runtime_mean / base;
    }
  }

  std::ostringstream detail;
  detail << "graph,d,constraint,seed,status,precision,recall,f1,shd,runtime_seconds,estimated_edges,true_edges,"
            "reason,final_h,error\n";
  for (const Replicate& r : result.replicates) {
    detail << r.graph << ',' << r.d << ',' << r.constraint << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      detail << csv_number(r.metrics.precision) << ',' << csv_number(r.metrics.recall) << ','
             << csv_number(r.metrics.f1) << ',' << r.metrics.shd << ',' << csv_number(r.metrics.runtime_seconds)
             << ',' << r.metrics.estimated_edges << ',' << r.metrics.true_edges << ',' << r.reason << ','
             << csv_number(r.final_h) << ",\n";
    } else {
      detail << ",,,,,,,,," << csv_quote(r.error) << '\n';
    }
  }
  write_text(o.out / "detail.csv", detail.str());

  std::ostringstream summary;
  summary << "graph,d,constraint,replicates,failures,precision_mean,precision_std,recall_mean,recall_std,f1_mean,"
             "f1_std,shd_mean,shd_std,runtime_mean,runtime_std,runtime_ratio_vs_schur\n";
  json cells = json::array();
  for (const CellSummary& c : result.cells) {
    summary << c.graph << ',' << c.d << ',' << c.constraint << ',' << c.replicates << ',' << c.failures << ','
            << csv_number(c.precision_mean) << ',' << csv_number(c.precision_std) << ','
            << csv_number(c.recall_mean) << ',' << csv_number(c.recall_std) << ',' << csv_number(c.f1_mean)
            << ',' << csv_number(c.f1_std) << ',' << csv_number(c.shd_mean) << ',' << csv_number(c.shd_std)
            << ',' << csv_number(c.runtime_mean) << ',' << csv_number(c.runtime_std) << ','
            << csv_number(c.runtime_ratio_vs_schur) << '\n';
    const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    cells.push_back({{"graph", c.graph},
                     {"d", c.d},
                     {"constraint", c.constraint},
                     {"replicates", c.replicates},
                     {"failures", c.failures},
                     {"precision", {{"mean", num(c.precision_mean)}, {"std", c.precision_std}}},
                     {"recall", {{"mean", num(c.recall_mean)}, {"std", c.recall_std}}},
                     {"f1", {{"mean", num(c.f1_mean)}, {"std", c.f1_std}}},
                     {"shd", {{"mean", num(c.shd_mean)}, {"std", c.shd_std}}},
                     {"runtime_seconds", {{"mean", num(c.runtime_mean)}, {"std", c.runtime_std}}},
                     {"runtime_ratio_vs_schur", num(c.runtime_ratio_vs_schur)}});
  }
  write_text(o.out / "summary.csv", summary.str());
  write_text(o.out / "summary.json",
             json{{"config", config}, {"version", std::string(version_string())}, {"cells", cells}}.dump(2));
  return result;
}

json comparable_metrics(const std::string& metrics_json) {
  json j = json::parse(metrics_json);
  j.erase("runtime_seconds");
  return j;
}

}  // namespace mgcsl::cli
