#pragma once

#include <string>

#include "mgcsl/causal_graph.hpp"
#include "mgcsl/linalg.hpp"

namespace mgcsl::acyclic {

enum class ConstraintKind { kSchurEigen, kTraceExp };

const char* to_string(ConstraintKind kind);
/// Accepts "schur" and "exp"; throws ConfigError otherwise.
ConstraintKind constraint_from_string(const std::string& name);

struct ConstraintEval {
  double value = 0.0;
  Matrix grad_wrt_C;
  ConstraintKind kind = ConstraintKind::kSchurEigen;
  linalg::ComplexSpectrum spectrum;  // Schur kind only
  /// Schur kind only: gradient set to zero because the spectrum vanished or
  /// the eigenvectors were too ill-conditioned.
  bool degenerate = false;
};

/// Spectrum below this modulus counts as nilpotent.
inline constexpr double kNilpotentModulus = 1e-9;
/// Eigenvector condition estimate above which the Schur gradient is zeroed.
inline constexpr double kMaxEigenvectorCondition = 1e14;

/// tr(exp(C o C)) - d with gradient 2 C o exp(C o C)^T.
ConstraintEval h_trace_exp(const Matrix& C);

/// Sum of squared eigenvalue moduli of C o C. Gradient by first-order
/// eigenvalue perturbation: with right eigenvectors V and U = V^-1,
/// dH/dD = 2 Re((V diag(conj lambda) U)^T) and dH/dC = 2 C o dH/dD.
ConstraintEval h_schur(const Matrix& C);

ConstraintEval evaluate_constraint(ConstraintKind kind, const Matrix& C);

struct GradCheckReport {
  double max_relative_error = 0.0;
  bool skipped = false;
};

/// Central differences of the constraint value against grad_wrt_C, entry by
/// entry. Entry error is |fd - analytic| / max(|fd|, |analytic|, 1e-3 max|analytic|).
/// Skipped (error 0) when the Schur gradient is degenerate at C.
GradCheckReport grad_check_constraint(ConstraintKind kind, const Matrix& C, double h);

/// Kahn's algorithm over a square 0/1 (nonzero = edge) matrix.
bool is_dag_exact(const Eigen::MatrixXi& adjacency);
bool is_dag_exact(const CausalGraph& g);

/// Acyclicity of a graph with macro nodes: every micro edge, member -> macro
/// for each member, and every macro -> micro edge go into one auxiliary graph,
/// which must be a DAG. `support` is d x (number of macros). Throws
/// ConfigError when a macro with empty support has an edge.
bool mg_is_acyclic(const CausalGraph& g, const SupportMatrix& support);
/// Uses g.macro_members as the support.
bool mg_is_acyclic(const CausalGraph& g);

/// Adjacency of the auxiliary graph used by mg_is_acyclic.
Eigen::MatrixXi auxiliary_graph(const CausalGraph& g, const std::vector<std::vector<int>>& members);

}  // namespace mgcsl::acyclic
