#include "mgcsl/linalg.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "mgcsl/errors.hpp"

namespace mgcsl::linalg {

std::complex<double> ComplexSpectrum::sum() const {
  std::complex<double> total{0.0, 0.0};
  for (const auto& v : values) total += v;
  return total;
}

double ComplexSpectrum::squared_norm() const {
  double total = 0.0;
  for (const auto& v : values) total += std::norm(v);
  return total;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": matrix contains non-finite entries");
  }
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

namespace {

Eigen::EigenSolver<Matrix> run_solver(const Matrix& m, bool with_vectors, const char* what) {
  require_square(m, what);
  require_finite(m, what);
  Eigen::EigenSolver<Matrix> solver;
  solver.setMaxIterations(kQrSweepsPerRow * std::max<Eigen::Index>(1, m.rows()));
  solver.compute(m, with_vectors);
  if (solver.info() != Eigen::Success) {
    throw NumericError(std::string(what) + ": Schur QR iteration did not converge within " +
                       std::to_string(kQrSweepsPerRow) + " sweeps per row");
  }
  return solver;
}

ComplexSpectrum to_spectrum(const Eigen::VectorXcd& ev) {
  ComplexSpectrum s;
  s.values.assign(ev.data(), ev.data() + ev.size());
  return s;
}

}  // namespace

ComplexSpectrum eigenvalues(const Matrix& m) {
  if (m.rows() == 0 && m.cols() == 0) return {};
  auto solver = run_solver(m, false, "eigenvalues");
  return to_spectrum(solver.eigenvalues());
}

EigenDecomposition eigen_decomposition(const Matrix& m) {
  if (m.rows() == 0 && m.cols() == 0) return {};
  auto solver = run_solver(m, true, "eigen_decomposition");
  return {to_spectrum(solver.eigenvalues()), solver.eigenvectors()};
}

Matrix matrix_exponential(const Matrix& m) {
  require_square(m, "matrix_exponential");
  require_finite(m, "matrix_exponential");
  if (m.rows() == 0) return m;
  return m.exp();
}

Matrix cholesky(const Matrix& m, double base_jitter, double* jitter_used) {
  require_square(m, "cholesky");
  require_finite(m, "cholesky");
  const Eigen::Index n = m.rows();
  if (n > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ShapeError("cholesky: matrix is not symmetric within 1e-10");
  }

  auto attempt = [&](double jitter, Matrix& out) {
    Matrix shifted = m;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) return false;
    out = llt.matrixL();
    return out.allFinite();
  };

  Matrix lower;
  if (attempt(base_jitter, lower)) {
    if (jitter_used) *jitter_used = base_jitter;
    return lower;
  }
  for (double jitter : kJitterLadder) {
    if (jitter <= base_jitter) continue;
    if (attempt(jitter, lower)) {
      if (jitter_used) *jitter_used = jitter;
      return lower;
    }
  }
  throw NumericError("cholesky: matrix is not positive definite after diagonal jitter " +
                     std::to_string(kJitterLadder[std::size(kJitterLadder) - 1]));
}

Matrix standardize_columns(const Matrix& m) {
  Matrix out = m;
  const double n = static_cast<double>(m.rows());
  if (m.rows() == 0) return out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    out.col(j).array() -= mean;
    const double sd = std::sqrt(out.col(j).squaredNorm() / n);
    if (sd > 1e-12 * (1.0 + std::abs(mean))) out.col(j) /= sd;
  }
  return out;
}

}  // namespace mgcsl::linalg
