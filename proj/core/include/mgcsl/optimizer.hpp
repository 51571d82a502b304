#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mgcsl/abstraction.hpp"
#include "mgcsl/acyclicity.hpp"
#include "mgcsl/orientation.hpp"

namespace mgcsl::opt {

// ---------------------------------------------------------------------------
// Limited-memory quasi-Newton inner solver

struct LbfgsOptions {
  int memory = 10;
  /// Objective/gradient evaluations allowed; 0 returns the start point.
  int max_evals = 500;
  double pgtol = 1e-5;
  double ftol = 2.2e-9;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 20;
};

struct LbfgsResult {
  Vector x;
  double f = 0.0;  // NaN when no evaluation was made
  int evaluations = 0;
  int iterations = 0;
  /// Line search failed even after a memory reset.
  bool line_search_warning = false;
  std::string stop_reason;
  /// Best objective seen after each evaluation.
  std::vector<double> best_history;
};

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Box constraints; an empty Bounds means unbounded. Fixing an entry is
/// lower = upper.
struct Bounds {
  Vector lower;
  Vector upper;

  bool empty() const { return lower.size() == 0; }
  static Bounds unbounded(Eigen::Index n);
};

/// Limited-memory quasi-Newton with a strong-Wolfe line search along the
/// projected path. Entries sitting on a bound with the gradient pushing
/// outward are held fixed for the step. Returns the best point seen;
/// non-finite trial values are treated as too-long steps.
LbfgsResult inner_minimize(const Objective& objective, const Vector& x0, const LbfgsOptions& options = {},
                           const Bounds& bounds = {});

// ---------------------------------------------------------------------------
// Augmented Lagrangian outer loop

/// Column preprocessing applied to X before fitting.
enum class Scaling { kNone, kCenter, kZScore };
const char* to_string(Scaling s);
/// "none", "center" or "zscore"; throws ConfigError otherwise.
Scaling scaling_from_string(const std::string& s);
Matrix apply_scaling(const Matrix& X, Scaling s);

struct HyperParams {
  double alpha1 = 0.1;
  double alpha2 = 0.01;
  double eta = 300.0;
  double rho = 0.25;
  double mu0 = 1e-3;
  double gamma0 = 0.0;
  double h_tolerance = 0.1;
  double mu_max = 1e16;
  double epsilon = 0.2;
  int max_outer = 25;
  int inner_max_evals = 500;
  acyclic::ConstraintKind constraint = acyclic::ConstraintKind::kSchurEigen;
  std::uint64_t seed = 0;

  int q = 5;
  int sae_hidden = 0;  // 0 means round(0.75 d)
  int mlp_hidden = 10;
  ad::Activation activation = ad::Activation::kSigmoid;
  Scaling scaling = Scaling::kNone;
  /// Store MLP first layers as nonnegative halves pos - neg under bounds.
  bool sign_split = false;
  double support_threshold = 0.01;

  /// Throws ConfigError on values outside the documented ranges.
  void validate() const;
};

struct TraceEntry {
  int outer = 0;
  double mu = 0.0;
  double gamma = 0.0;
  double h = 0.0;
  double objective = 0.0;
  int inner_evaluations = 0;
  bool line_search_warning = false;
  std::string inner_stop;
  std::vector<double> inner_best;  // best-so-far objective per evaluation
};

struct AugLagState {
  double mu = 0.0;
  double gamma = 0.0;
  int kappa = 0;
  double h_prev = 0.0;
  std::vector<TraceEntry> trace;
};

/// mu' = eta mu if h_now > rho h_prev; gamma' = gamma + mu h_now (old mu);
/// h_prev' = h_now; kappa' = kappa + 1.
AugLagState update_duals(const AugLagState& state, double h_now, const HyperParams& hp);

struct FitResult {
  sae::SaeModel sae;
  orient::MlpBank bank;
  Matrix C;  // d x d
  Matrix S;  // (d+q) x d
  Matrix A;  // d x q
  std::vector<TraceEntry> trace;
  double seconds = 0.0;
  bool converged = false;
  std::string reason;  // "h_tolerance", "mu_max" or "max_outer"
  double final_h = 0.0;
  double initial_h = 0.0;
  HyperParams hp;
};

using ProgressFn = std::function<void(const TraceEntry&)>;

/// Jointly fits the SAE and the MLP bank under the chosen acyclicity
/// constraint. Deterministic given (X, hp).
FitResult fit(const Matrix& X, const HyperParams& hp, const ProgressFn& progress = {});

/// The full augmented objective as a reusable graph, exposed for tests and
/// benchmarks.
class FitObjective {
 public:
  FitObjective(const Matrix& X, const HyperParams& hp);
  ~FitObjective();
  FitObjective(const FitObjective&) = delete;
  FitObjective& operator=(const FitObjective&) = delete;

  ad::Graph& graph();
  ad::Expr root() const;
  ad::Expr constraint_node() const;
  ad::Expr micro_adjacency() const;

  void set_duals(double mu, double gamma);
  /// Initial parameters (SAE then bank), seeded from hp.seed.
  const ad::ParameterSet& initial_parameters() const;
  ad::ParameterSet& parameters();

  double value_and_gradient(const Vector& theta, Vector& grad);
  double value(const Vector& theta);
  /// Label of the first non-finite named term after the last evaluation, or "".
  std::string non_finite_term() const;
  /// Box constraints of the flat parameter vector: sign-split halves are
  /// nonnegative, self-input entries are fixed at zero.
  const Bounds& bounds() const;
  /// Clamps theta into bounds().
  void project(Vector& theta) const;

  const sae::SaeModel& sae_shape() const;
  const orient::MlpBank& bank_shape() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mgcsl::opt
