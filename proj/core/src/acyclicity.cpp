#include "mgcsl/acyclicity.hpp"

#include <cmath>
#include <queue>

#include "mgcsl/errors.hpp"
#include "scc.hpp"

namespace mgcsl::acyclic {

const char* to_string(ConstraintKind kind) {
  return kind == ConstraintKind::kTraceExp ? "exp" : "schur";
}

ConstraintKind constraint_from_string(const std::string& name) {
  if (name == "schur") return ConstraintKind::kSchurEigen;
  if (name == "exp") return ConstraintKind::kTraceExp;
  throw ConfigError("unknown constraint '" + name + "' (expected schur or exp)");
}

namespace {

// Node sets of the strongly connected components of D's nonzero pattern.
// Ordering the nodes by component makes D block triangular, so its spectrum
// and the trace of e^D split over the diagonal blocks. Evaluating the blocks
// separately keeps both values exact on DAGs, where a full eigensolve of a
// permuted nilpotent matrix is accurate only to about eps^(1/d).
std::vector<std::vector<int>> diagonal_blocks(const Matrix& D) {
  const int n = static_cast<int>(D.rows());
  std::vector<std::vector<int>> out(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i != j && D(i, j) != 0.0) out[i].push_back(j);
    }
  }
  const std::vector<int> comp = detail::components(out);
  std::vector<std::vector<int>> blocks;
  for (int v = 0; v < n; ++v) {
    if (comp[v] >= static_cast<int>(blocks.size())) blocks.resize(comp[v] + 1);
    blocks[comp[v]].push_back(v);
  }
  return blocks;
}

Matrix block_of(const Matrix& D, const std::vector<int>& nodes) {
  const Eigen::Index k = static_cast<Eigen::Index>(nodes.size());
  Matrix b(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index c = 0; c < k; ++c) b(a, c) = D(nodes[a], nodes[c]);
  }
  return b;
}

}  // namespace

ConstraintEval h_trace_exp(const Matrix& C) {
  linalg::require_square(C, "h_trace_exp");
  linalg::require_finite(C, "h_trace_exp");
  ConstraintEval out;
  out.kind = ConstraintKind::kTraceExp;
  const Matrix D = C.cwiseProduct(C);
  const Matrix E = linalg::matrix_exponential(D);
  const auto blocks = diagonal_blocks(D);
  if (blocks.size() <= 1) {
    out.value = std::max(0.0, E.trace() - static_cast<double>(C.rows()));
  } else {
    double value = 0.0;
    for (const auto& nodes : blocks) {
      if (nodes.size() == 1) {
        value += std::expm1(D(nodes[0], nodes[0]));
      } else {
        value += linalg::matrix_exponential(block_of(D, nodes)).trace() - static_cast<double>(nodes.size());
      }
    }
    out.value = std::max(0.0, value);
  }
  out.grad_wrt_C = 2.0 * C.cwiseProduct(E.transpose());
  return out;
}

ConstraintEval h_schur(const Matrix& C) {
  linalg::require_square(C, "h_schur");
  linalg::require_finite(C, "h_schur");
  ConstraintEval out;
  out.kind = ConstraintKind::kSchurEigen;
  const Eigen::Index d = C.rows();
  out.grad_wrt_C = Matrix::Zero(d, d);
  if (d == 0) return out;

  const Matrix D = C.cwiseProduct(C);
  const auto blocks = diagonal_blocks(D);
  if (blocks.size() > 1) {
    for (const auto& nodes : blocks) {
      if (nodes.size() == 1) {
        out.spectrum.values.emplace_back(D(nodes[0], nodes[0]), 0.0);
      } else {
        const auto part = linalg::eigenvalues(block_of(D, nodes));
        out.spectrum.values.insert(out.spectrum.values.end(), part.values.begin(), part.values.end());
      }
    }
    out.value = out.spectrum.squared_norm();
  }

  double largest = 0.0;
  for (const auto& v : out.spectrum.values) largest = std::max(largest, std::abs(v));
  if (blocks.size() > 1 && largest < kNilpotentModulus) {
    out.degenerate = true;
    return out;
  }
  linalg::EigenDecomposition eig = linalg::eigen_decomposition(D);
  if (blocks.size() <= 1) {
    out.value = eig.spectrum.squared_norm();
    out.spectrum = eig.spectrum;
    largest = 0.0;
    for (const auto& v : out.spectrum.values) largest = std::max(largest, std::abs(v));
    if (largest < kNilpotentModulus) {
      out.degenerate = true;
      return out;
    }
  }
  Eigen::PartialPivLU<ComplexMatrix> lu(eig.vectors);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / kMaxEigenvectorCondition)) {
    out.degenerate = true;
    return out;
  }
  const ComplexMatrix U = lu.inverse();
  Eigen::VectorXcd weights(d);
  for (Eigen::Index i = 0; i < d; ++i) weights(i) = std::conj(eig.spectrum.values[static_cast<std::size_t>(i)]);
  const ComplexMatrix G = eig.vectors * weights.asDiagonal() * U;
  const Matrix grad_D = 2.0 * G.transpose().real();
  out.grad_wrt_C = 2.0 * C.cwiseProduct(grad_D);
  if (!out.grad_wrt_C.allFinite()) {
    out.grad_wrt_C.setZero();
    out.degenerate = true;
  }
  return out;
}

ConstraintEval evaluate_constraint(ConstraintKind kind, const Matrix& C) {
  return kind == ConstraintKind::kTraceExp ? h_trace_exp(C) : h_schur(C);
}

GradCheckReport grad_check_constraint(ConstraintKind kind, const Matrix& C, double h) {
  if (!(h > 0.0)) throw ConfigError("grad_check_constraint: h must be positive");
  GradCheckReport report;
  const ConstraintEval at = evaluate_constraint(kind, C);
  if (at.degenerate) {
    report.skipped = true;
    return report;
  }
  const double floor = std::max(1e-12, 1e-3 * at.grad_wrt_C.cwiseAbs().maxCoeff());
  Matrix probe = C;
  for (Eigen::Index j = 0; j < C.cols(); ++j) {
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = evaluate_constraint(kind, probe).value;
      probe(i, j) = orig - h;
      const double down = evaluate_constraint(kind, probe).value;
      probe(i, j) = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = at.grad_wrt_C(i, j);
      const double err = std::abs(fd - an) / std::max({floor, std::abs(fd), std::abs(an)});
      report.max_relative_error = std::max(report.max_relative_error, err);
    }
  }
  return report;
}

bool is_dag_exact(const Eigen::MatrixXi& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw DimensionError("is_dag_exact: adjacency must be square");
  const Eigen::Index n = adjacency.rows();
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (adjacency(i, j) != 0) ++indegree[static_cast<std::size_t>(j)];
    }
  }
  std::queue<Eigen::Index> ready;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (indegree[static_cast<std::size_t>(v)] == 0) ready.push(v);
  }
  Eigen::Index consumed = 0;
  while (!ready.empty()) {
    const Eigen::Index v = ready.front();
    ready.pop();
    ++consumed;
    for (Eigen::Index w = 0; w < n; ++w) {
      if (adjacency(v, w) != 0 && --indegree[static_cast<std::size_t>(w)] == 0) ready.push(w);
    }
  }
  return consumed == n;
}

bool is_dag_exact(const CausalGraph& g) { return is_dag_exact(g.adjacency); }

Eigen::MatrixXi auxiliary_graph(const CausalGraph& g, const std::vector<std::vector<int>>& members) {
  const int n = g.num_nodes();
  if (g.adjacency.rows() != n || g.adjacency.cols() != n) {
    throw ShapeError("auxiliary_graph: adjacency does not match d + macros");
  }
  if (static_cast<int>(members.size()) != g.num_macros()) {
    throw ShapeError("auxiliary_graph: support has " + std::to_string(members.size()) +
                     " macros, graph has " + std::to_string(g.num_macros()));
  }
  Eigen::MatrixXi aux = (g.adjacency.array() != 0).cast<int>();
  for (int u = 0; u < g.num_macros(); ++u) {
    const int node = g.d + u;
    const bool has_edge = aux.row(node).any() || aux.col(node).any();
    if (members[static_cast<std::size_t>(u)].empty()) {
      if (has_edge) throw ConfigError("macro " + std::to_string(u) + " has edges but empty support");
      continue;
    }
    for (int m : members[static_cast<std::size_t>(u)]) {
      if (m < 0 || m >= g.d) throw ConfigError("macro member index out of range");
      aux(m, node) = 1;
    }
  }
  return aux;
}

bool mg_is_acyclic(const CausalGraph& g, const SupportMatrix& support) {
  if (g.num_macros() == 0 && support.cols() == 0) return is_dag_exact(g.adjacency);
  if (support.rows() != g.d) throw ShapeError("mg_is_acyclic: support must have d rows");
  return is_dag_exact(auxiliary_graph(g, members_from_support(support)));
}

bool mg_is_acyclic(const CausalGraph& g) {
  if (g.num_macros() == 0) return is_dag_exact(g.adjacency);
  return is_dag_exact(auxiliary_graph(g, g.macro_members));
}

}  // namespace mgcsl::acyclic
