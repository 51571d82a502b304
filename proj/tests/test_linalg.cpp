#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "mgcsl/errors.hpp"
#include "mgcsl/linalg.hpp"

using namespace mgcsl;

namespace {

std::vector<double> sorted_real(const linalg::ComplexSpectrum& s) {
  std::vector<double> out;
  for (const auto& v : s.values) out.push_back(v.real());
  std::sort(out.begin(), out.end());
  return out;
}

Matrix random_matrix(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Plain power series, independent of the Pade path.
Matrix taylor_exp(const Matrix& m, int terms) {
  Matrix sum = Matrix::Identity(m.rows(), m.cols());
  Matrix term = sum;
  for (int k = 1; k < terms; ++k) {
    term = term * m / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST(Eigenvalues, SwapMatrixHasPlusMinusOne) {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  const auto ev = sorted_real(linalg::eigenvalues(m));
  EXPECT_NEAR(ev[0], -1.0, 1e-12);
  EXPECT_NEAR(ev[1], 1.0, 1e-12);
}

TEST(Eigenvalues, ZeroAndDiagonal) {
  for (const auto& v : linalg::eigenvalues(Matrix::Zero(3, 3)).values) EXPECT_EQ(std::abs(v), 0.0);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2, 3;
  const auto ev = sorted_real(linalg::eigenvalues(d));
  EXPECT_NEAR(ev[0], 2.0, 1e-12);
  EXPECT_NEAR(ev[1], 3.0, 1e-12);
}

TEST(Eigenvalues, RotationGivesConjugatePair) {
  Matrix m(2, 2);
  m << 0, -1, 1, 0;
  const auto s = linalg::eigenvalues(m);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_NEAR(std::abs(s.values[0].imag()), 1.0, 1e-12);
  EXPECT_NEAR(s.values[0].imag(), -s.values[1].imag(), 1e-12);
  EXPECT_NEAR(s.squared_norm(), 2.0, 1e-12);
}

TEST(Eigenvalues, SumMatchesTrace) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = random_matrix(1 + trial % 12, rng);
    const auto s = linalg::eigenvalues(m);
    const double tr = m.trace();
    EXPECT_NEAR(s.sum().real(), tr, 1e-8 * (1 + std::abs(tr)));
    EXPECT_NEAR(s.sum().imag(), 0.0, 1e-8 * (1 + std::abs(tr)));
  }
}

TEST(Eigenvalues, StrictlyTriangularIsNilpotent) {
  std::mt19937_64 rng(3);
  for (int n = 2; n <= 30; ++n) {
    const Matrix m = random_matrix(n, rng).triangularView<Eigen::StrictlyUpper>();
    for (const auto& v : linalg::eigenvalues(m).values) EXPECT_LE(std::abs(v), 1e-12);
  }
}

TEST(Eigenvalues, PermutedSmallNilpotentStaysNearZero) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 3;
    Matrix m = random_matrix(n, rng).triangularView<Eigen::StrictlyUpper>();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    for (int i = 0; i < n; ++i) p.indices()(i) = perm[i];
    const Matrix pm = p * m * p.transpose();
    // Rounding moves a nilpotent spectrum by about eps^(1/n).
    for (const auto& v : linalg::eigenvalues(pm).values) EXPECT_LE(std::abs(v), 1e-3);
  }
}

TEST(Eigenvalues, RejectsNonSquareAndNonFinite) {
  EXPECT_THROW(linalg::eigenvalues(Matrix::Zero(2, 3)), DimensionError);
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = std::nan("");
  EXPECT_THROW(linalg::eigenvalues(m), NumericError);
}

TEST(EigenDecomposition, ReconstructsMatrix) {
  std::mt19937_64 rng(11);
  const Matrix m = random_matrix(6, rng);
  const auto e = linalg::eigen_decomposition(m);
  ComplexMatrix lambda = ComplexMatrix::Zero(6, 6);
  for (int i = 0; i < 6; ++i) lambda(i, i) = e.spectrum.values[i];
  const ComplexMatrix lhs = m.cast<std::complex<double>>() * e.vectors;
  EXPECT_LT((lhs - e.vectors * lambda).norm(), 1e-9);
}

TEST(MatrixExponential, Anchors) {
  EXPECT_TRUE(linalg::matrix_exponential(Matrix::Zero(3, 3)).isApprox(Matrix::Identity(3, 3)));
  const Matrix e = linalg::matrix_exponential(Matrix::Identity(2, 2));
  EXPECT_NEAR(e(0, 0), std::exp(1.0), 1e-14);
  EXPECT_NEAR(e(1, 1), std::exp(1.0), 1e-14);
  EXPECT_NEAR(e(0, 1), 0.0, 1e-14);
  Matrix n(2, 2);
  n << 0, 1, 0, 0;
  Matrix expected(2, 2);
  expected << 1, 1, 0, 1;
  EXPECT_LT((linalg::matrix_exponential(n) - expected).norm(), 1e-14);
}

TEST(MatrixExponential, AgreesWithTaylorSeries) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix m = random_matrix(1 + trial % 8, rng);
    m *= (0.1 + 1.9 * (trial % 10) / 9.0) / m.norm();  // Frobenius norm in [0.1, 2]
    EXPECT_LT((linalg::matrix_exponential(m) - taylor_exp(m, 30)).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Cholesky, HandValues) {
  EXPECT_TRUE(linalg::cholesky(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4, 9;
  const Matrix ld = linalg::cholesky(d);
  EXPECT_NEAR(ld(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(ld(1, 1), 3.0, 1e-14);
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const Matrix l = linalg::cholesky(m);
  EXPECT_NEAR(l(0, 0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(l(1, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(l(1, 1), std::sqrt(1.5), 1e-12);
  EXPECT_EQ(l(0, 1), 0.0);
}

TEST(Cholesky, RecoversRandomFactor) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 9;
    Matrix l = random_matrix(n, rng).triangularView<Eigen::Lower>();
    for (int i = 0; i < n; ++i) l(i, i) = pos(rng);
    const Matrix got = linalg::cholesky(l * l.transpose());
    EXPECT_LT((got - l).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Cholesky, JitterLadderRescuesSingularKernel) {
  const Matrix ones = Matrix::Ones(4, 4);  // rank one, PSD
  double used = -1.0;
  const Matrix l = linalg::cholesky(ones, 0.0, &used);
  EXPECT_GT(used, 0.0);
  EXPECT_LT((l * l.transpose() - ones).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Cholesky, ErrorsOnIndefiniteAndAsymmetric) {
  Matrix neg = -Matrix::Identity(2, 2);
  EXPECT_THROW(linalg::cholesky(neg), NumericError);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(linalg::cholesky(asym), ShapeError);
  EXPECT_THROW(linalg::cholesky(Matrix::Zero(2, 3)), DimensionError);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  std::mt19937_64 rng(1);
  Matrix m = random_matrix(50, rng).leftCols(3) * 4.0;
  m.col(2).setConstant(7.0);
  const Matrix z = linalg::standardize_columns(m);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
    EXPECT_NEAR(z.col(j).squaredNorm() / 50.0, 1.0, 1e-12);
  }
  EXPECT_NEAR(z.col(2).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}
