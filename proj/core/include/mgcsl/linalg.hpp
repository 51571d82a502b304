#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace mgcsl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

namespace linalg {

/// Eigenvalues of a real square matrix, with multiplicity. Non-real values
/// come in conjugate pairs.
struct ComplexSpectrum {
  std::vector<std::complex<double>> values;

  std::size_t size() const { return values.size(); }
  std::complex<double> sum() const;
  /// Sum of squared moduli.
  double squared_norm() const;
};

/// Spectrum plus right eigenvectors (columns, unit 2-norm).
struct EigenDecomposition {
  ComplexSpectrum spectrum;
  ComplexMatrix vectors;
};

/// QR sweeps allowed per row before the Schur reduction gives up.
inline constexpr int kQrSweepsPerRow = 100;

/// Cholesky jitter ladder, tried in order after a plain attempt fails.
inline constexpr double kJitterLadder[] = {1e-10, 1e-8, 1e-6, 1e-4};

/// Throws NumericError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

/// Throws DimensionError if m is not square.
void require_square(const Matrix& m, const char* what);

/// All eigenvalues via Hessenberg reduction and shifted QR (Schur form).
/// Throws DimensionError for non-square input and NumericError when the QR
/// iteration does not converge within kQrSweepsPerRow * n sweeps.
ComplexSpectrum eigenvalues(const Matrix& m);

/// Eigenvalues and right eigenvectors; same failure modes as eigenvalues().
EigenDecomposition eigen_decomposition(const Matrix& m);

/// e^m by Pade scaling-and-squaring.
Matrix matrix_exponential(const Matrix& m);

/// Lower-triangular L with L L^T = m + jitter I. A plain factorization is
/// tried first (with `base_jitter` on the diagonal); on failure each rung of
/// kJitterLadder not smaller than base_jitter is tried in turn. Throws
/// NumericError when even the last rung fails. `jitter_used`, when non-null,
/// receives the diagonal shift that succeeded.
Matrix cholesky(const Matrix& m, double base_jitter = 0.0, double* jitter_used = nullptr);

/// Per-column z-score (population standard deviation). Constant columns are
/// only centered.
Matrix standardize_columns(const Matrix& m);

}  // namespace linalg
}  // namespace mgcsl
