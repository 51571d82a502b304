#include "mgcsl/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "mgcsl/errors.hpp"

namespace mgcsl::opt {

using ad::Expr;

void HyperParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("HyperParams: ") + what);
  };
  require(alpha1 >= 0.0, "alpha1 must be >= 0");
  require(alpha2 >= 0.0, "alpha2 must be >= 0");
  require(eta > 1.0, "eta must be > 1");
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  require(mu0 > 0.0, "mu0 must be > 0");
  require(gamma0 >= 0.0, "gamma0 must be >= 0");
  require(h_tolerance >= 0.0, "h_tolerance must be >= 0");
  require(mu_max > 0.0, "mu_max must be > 0");
  require(epsilon >= 0.0, "epsilon must be >= 0");
  require(max_outer >= 0, "max_outer must be >= 0");
  require(inner_max_evals >= 0, "inner_max_evals must be >= 0");
  require(q >= 1, "q must be >= 1");
  require(sae_hidden >= 0, "sae_hidden must be >= 0");
  require(mlp_hidden >= 1, "mlp_hidden must be >= 1");
  require(support_threshold >= 0.0, "support_threshold must be >= 0");
}

const char* to_string(Scaling s) {
  switch (s) {
    case Scaling::kNone: return "none";
    case Scaling::kCenter: return "center";
    case Scaling::kZScore: return "zscore";
  }
  return "center";
}

Scaling scaling_from_string(const std::string& s) {
  if (s == "none") return Scaling::kNone;
  if (s == "center") return Scaling::kCenter;
  if (s == "zscore") return Scaling::kZScore;
  throw ConfigError("unknown scaling '" + s + "' (expected none, center or zscore)");
}

Matrix apply_scaling(const Matrix& X, Scaling s) {
  switch (s) {
    case Scaling::kNone: return X;
    case Scaling::kCenter: return X.rowwise() - X.colwise().mean();
    case Scaling::kZScore: return linalg::standardize_columns(X);
  }
  return X;
}

AugLagState update_duals(const AugLagState& state, double h_now, const HyperParams& hp) {
  AugLagState next = state;
  next.mu = h_now > hp.rho * state.h_prev ? hp.eta * state.mu : state.mu;
  next.gamma = state.gamma + state.mu * h_now;
  next.h_prev = h_now;
  next.kappa = state.kappa + 1;
  return next;
}

// ---------------------------------------------------------------------------

struct FitObjective::Impl {
  ad::Graph g;
  sae::SaeModel sae_shape;
  orient::MlpBank bank_shape;
  ad::ParameterSet initial;
  ad::ParameterSet params;
  ad::ParameterSet grads;
  Expr root, H, C, mu_half, gamma;
  std::vector<Expr> terms;
  Bounds bounds;
};

FitObjective::FitObjective(const Matrix& X, const HyperParams& hp) : impl_(std::make_unique<Impl>()) {
  hp.validate();
  if (X.rows() < 2 || X.cols() < 2) throw ConfigError("fit: need n >= 2 and d >= 2");
  linalg::require_finite(X, "fit");
  Impl& s = *impl_;
  ad::Graph& g = s.g;
  const int d = static_cast<int>(X.cols());
  const int hidden = hp.sae_hidden > 0 ? hp.sae_hidden : sae::default_hidden(d);

  s.sae_shape = sae::SaeModel::random(d, hidden, hp.q, hp.seed);
  s.sae_shape.activation = hp.activation;
  s.bank_shape = orient::MlpBank::random(d, hp.q, hp.mlp_hidden, hp.seed ^ 0x9e3779b97f4a7c15ULL);
  s.bank_shape.activation = hp.activation;
  s.sae_shape.export_to(s.initial);
  s.bank_shape.export_to(s.initial, hp.sign_split);
  s.params = s.initial;
  s.grads = s.initial.zeros_like();

  const Matrix data = apply_scaling(X, hp.scaling);
  Expr x = g.constant(data);
  Expr ones = g.constant(Matrix::Ones(X.rows(), 1));
  sae::SaeNodes enc = sae::build_sae(g, x, ones, s.sae_shape);
  orient::BankNodes bank = orient::build_bank(g, s.bank_shape, true,
                                                 hp.sign_split ? orient::FirstLayerForm::kSignSplit
                                                               : orient::FirstLayerForm::kPlain);
  const Expr parts[] = {x, enc.Z};
  orient::build_bank_forward(g, bank, g.concat_cols(parts), ones, s.bank_shape);

  Expr l1 = sae::abstraction_loss(g, enc, x, hp.alpha1);
  Expr l2 = orient::orientation_loss(g, bank, x, enc.A, s.bank_shape, hp.alpha2);
  s.C = orient::wam_micro(g, bank, enc.A, s.bank_shape);
  const acyclic::ConstraintKind kind = hp.constraint;
  s.H = g.external(
      s.C,
      [kind](const Matrix& C) {
        acyclic::ConstraintEval e = acyclic::evaluate_constraint(kind, C);
        return ad::ExternalValue{e.value, std::move(e.grad_wrt_C)};
      },
      "acyclicity constraint");
  s.mu_half = g.scalar(0.5 * hp.mu0);
  s.gamma = g.scalar(hp.gamma0);
  Expr penalty = g.hadamard(s.mu_half, g.hadamard(s.H, s.H)) + g.hadamard(s.gamma, s.H);
  g.set_label(penalty, "augmented penalty");
  s.root = l1 + l2 + penalty;
  g.set_label(s.root, "objective");

  for (Expr e : {enc.Z, enc.Y, enc.A, bank.Xhat, l1, l2, s.C, s.H, penalty}) s.terms.push_back(e);

  s.bounds = Bounds::unbounded(s.params.num_entries());
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < s.params.size(); ++k) {
    const std::string& name = s.params.name(k);
    const Matrix& m = s.params[k];
    const bool half = name.rfind("mlp.w1p[", 0) == 0 || name.rfind("mlp.w1n[", 0) == 0;
    if (half || name.rfind("mlp.w1[", 0) == 0) {
      const int j = std::stoi(name.substr(half ? 8 : 7));
      if (half) s.bounds.lower.segment(offset, m.size()).setZero();
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        s.bounds.lower(offset + c * m.rows() + j) = 0.0;
        s.bounds.upper(offset + c * m.rows() + j) = 0.0;
      }
    }
    offset += m.size();
  }
}

FitObjective::~FitObjective() = default;

ad::Graph& FitObjective::graph() { return impl_->g; }
Expr FitObjective::root() const { return impl_->root; }
Expr FitObjective::constraint_node() const { return impl_->H; }
Expr FitObjective::micro_adjacency() const { return impl_->C; }
const ad::ParameterSet& FitObjective::initial_parameters() const { return impl_->initial; }
ad::ParameterSet& FitObjective::parameters() { return impl_->params; }
const sae::SaeModel& FitObjective::sae_shape() const { return impl_->sae_shape; }
const orient::MlpBank& FitObjective::bank_shape() const { return impl_->bank_shape; }

void FitObjective::set_duals(double mu, double gamma) {
  impl_->g.set_constant(impl_->mu_half, 0.5 * mu);
  impl_->g.set_constant(impl_->gamma, gamma);
}

double FitObjective::value_and_gradient(const Vector& theta, Vector& grad) {
  Impl& s = *impl_;
  s.params.unflatten(theta);
  const double f = s.g.value_and_gradients(s.root, s.params, s.grads);
  grad = s.grads.flatten();
  return f;
}

double FitObjective::value(const Vector& theta) {
  Impl& s = *impl_;
  s.params.unflatten(theta);
  return s.g.evaluate(s.root, s.params);
}

std::string FitObjective::non_finite_term() const {
  for (Expr e : impl_->terms) {
    if (!impl_->g.value(e).allFinite()) return impl_->g.label(e);
  }
  if (!impl_->g.value(impl_->root).allFinite()) return impl_->g.label(impl_->root);
  return {};
}

const Bounds& FitObjective::bounds() const { return impl_->bounds; }

void FitObjective::project(Vector& theta) const {
  theta = theta.cwiseMax(impl_->bounds.lower).cwiseMin(impl_->bounds.upper);
}

// ---------------------------------------------------------------------------

namespace {

void extract(FitResult& out, const FitObjective& obj, const ad::ParameterSet& params) {
  out.sae = obj.sae_shape();
  out.sae.import_from(params);
  out.bank = obj.bank_shape();
  out.bank.import_from(params);
  out.bank.enforce_self_pin();
  out.A = sae::contribution_matrix(out.sae);
  out.C = orient::wam_micro(out.bank, out.A);
  out.S = orient::wam_multigran(out.bank);
}

}  // namespace

FitResult fit(const Matrix& X, const HyperParams& hp, const ProgressFn& progress) {
  const auto start = std::chrono::steady_clock::now();
  FitObjective obj(X, hp);
  FitResult out;
  out.hp = hp;

  AugLagState state;
  state.mu = hp.mu0;
  state.gamma = hp.gamma0;
  Vector theta = obj.initial_parameters().flatten();
  obj.project(theta);
  ad::ParameterSet params = obj.initial_parameters();
  params.unflatten(theta);
  extract(out, obj, params);
  state.h_prev = acyclic::evaluate_constraint(hp.constraint, out.C).value;
  out.initial_h = state.h_prev;
  out.final_h = state.h_prev;

  LbfgsOptions options;
  options.max_evals = hp.inner_max_evals;
  const Objective objective = [&obj](const Vector& x, Vector& g) { return obj.value_and_gradient(x, g); };

  if (hp.max_outer == 0) out.reason = "max_outer";
  while (out.reason.empty()) {
    obj.set_duals(state.mu, state.gamma);
    LbfgsResult inner = inner_minimize(objective, theta, options, obj.bounds());
    if (inner.stop_reason == "non-finite start") {
      obj.value(inner.x);
      const std::string term = obj.non_finite_term();
      throw NumericError("fit: objective is not finite (term '" + (term.empty() ? "objective" : term) + "')");
    }
    theta = inner.x;
    params.unflatten(theta);
    extract(out, obj, params);
    const double h_now = acyclic::evaluate_constraint(hp.constraint, out.C).value;
    out.final_h = h_now;

    TraceEntry entry;
    entry.outer = state.kappa + 1;
    entry.mu = state.mu;
    entry.gamma = state.gamma;
    entry.h = h_now;
    entry.objective = std::isfinite(inner.f) ? inner.f : obj.value(theta);
    entry.inner_evaluations = inner.evaluations;
    entry.line_search_warning = inner.line_search_warning;
    entry.inner_stop = inner.stop_reason;
    entry.inner_best = std::move(inner.best_history);
    if (progress) progress(entry);
    state.trace.push_back(std::move(entry));

    state = update_duals(state, h_now, hp);
    if (h_now <= hp.h_tolerance) {
      out.converged = true;
      out.reason = "h_tolerance";
    } else if (state.mu >= hp.mu_max) {
      out.reason = "mu_max";
    } else if (state.kappa >= hp.max_outer) {
      out.reason = "max_outer";
    }
  }
  out.trace = std::move(state.trace);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace mgcsl::opt
