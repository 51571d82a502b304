#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mgcsl/autodiff.hpp"
#include "mgcsl/errors.hpp"

using namespace mgcsl;
using ad::Expr;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

TEST(Evaluate, SquareSigmoidAndL11) {
  ad::Graph g;
  Expr p = g.parameter("p", 1, 1);
  Expr root = g.squared_frobenius(p);
  ad::ParameterSet params;
  params.add("p", scalar(3.0));
  EXPECT_DOUBLE_EQ(g.evaluate(root, params), 9.0);

  ad::Graph g2;
  Expr s = g2.sigmoid(g2.scalar(0.0));
  EXPECT_DOUBLE_EQ(g2.evaluate(s, {}), 0.5);

  ad::Graph g3;
  Matrix m(2, 2);
  m << 1, -2, 3, 0;
  EXPECT_DOUBLE_EQ(g3.evaluate(g3.l11_norm(g3.constant(m)), {}), 6.0);
}

TEST(Gradients, ScalarAnchors) {
  ad::Graph g;
  Expr x = g.parameter("x", 1, 1);
  Expr sq = g.squared_frobenius(x);
  Expr sig = g.sum(g.sigmoid(x));
  Expr ab = g.sum(g.abs(x));
  ad::ParameterSet params;
  params.add("x", scalar(3.0));
  EXPECT_DOUBLE_EQ(g.gradients(sq, params)["x"](0, 0), 6.0);
  params["x"](0, 0) = 0.0;
  EXPECT_DOUBLE_EQ(g.gradients(sig, params)["x"](0, 0), 0.25);
  EXPECT_DOUBLE_EQ(g.gradients(ab, params)["x"](0, 0), 0.0);
}

TEST(Gradients, RowNormAtZeroRowIsZero) {
  ad::Graph g;
  Expr w = g.parameter("w", 2, 3);
  Expr root = g.sum(g.row_norm(w));
  ad::ParameterSet params;
  Matrix v = Matrix::Zero(2, 3);
  v.row(1) << 3, 4, 0;
  params.add("w", v);
  const Matrix grad = g.gradients(root, params)["w"];
  EXPECT_TRUE(grad.row(0).isZero(0.0));
  EXPECT_NEAR(grad(1, 0), 0.6, 1e-15);
  EXPECT_NEAR(grad(1, 1), 0.8, 1e-15);
}

TEST(Gradients, GroupedRowNormValue) {
  ad::Graph g;
  Matrix v(1, 4);
  v << 3, 4, 0, 2;
  Expr n = g.row_norm(g.constant(v), 2);
  ASSERT_EQ(n.cols(), 2);
  g.evaluate(g.sum(n), {});
  EXPECT_DOUBLE_EQ(g.value(n)(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(g.value(n)(0, 1), 2.0);
}

TEST(Gradients, UnusedParameterGetsZero) {
  ad::Graph g;
  Expr a = g.parameter("a", 1, 1);
  g.parameter("b", 2, 2);
  Expr root = g.squared_frobenius(a);
  ad::ParameterSet params;
  params.add("a", scalar(1.5));
  params.add("b", Matrix::Ones(2, 2));
  const auto grads = g.gradients(root, params);
  EXPECT_TRUE(grads["b"].isZero(0.0));
  EXPECT_DOUBLE_EQ(grads["a"](0, 0), 3.0);
}

TEST(FiniteDifference, QuadraticIsExact) {
  ad::Graph g;
  Expr x = g.parameter("x", 3, 2);
  Matrix a = Matrix::Random(2, 2);
  Expr root = g.squared_frobenius(g.matmul(x, g.constant(a)));
  ad::ParameterSet params;
  params.add("x", Matrix::Random(3, 2));
  const auto report = ad::finite_difference_check(g, root, params, 1e-5);
  EXPECT_LT(report.max_relative_error, 1e-6);
  EXPECT_EQ(report.checked, 6);
}

TEST(FiniteDifference, KinkAtZeroIsSkipped) {
  ad::Graph g;
  Expr x = g.parameter("x", 1, 3);
  Expr root = g.l11_norm(x) + g.squared_frobenius(x);
  ad::ParameterSet params;
  Matrix v(1, 3);
  v << 0.0, 0.7, -1.2;
  params.add("x", v);
  const auto report = ad::finite_difference_check(g, root, params, 1e-5);
  EXPECT_EQ(report.skipped, 1);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

// Every op in one smooth composition, against central differences.
TEST(FiniteDifference, SmoothCompositionProperty) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    ad::Graph g;
    Expr w = g.parameter("w", 4, 3);
    Expr b = g.parameter("b", 1, 3);
    Expr v = g.parameter("v", 3, 2);
    Expr x = g.constant(random_matrix(5, 4, rng));
    Expr ones = g.constant(Matrix::Ones(5, 1));
    Expr h1 = g.sigmoid(g.matmul(x, w) + g.matmul(ones, b));
    Expr h2 = g.tanh(g.matmul(h1, v));
    const Expr cols[] = {h2, g.scale(h1, 0.5)};
    Expr cat = g.concat_cols(cols);
    const Expr rows[] = {g.slice(cat, 0, 0, 2, 5), g.slice(cat, 3, 0, 2, 5)};
    Expr stacked = g.concat_rows(rows);
    Expr hv = g.hadamard(stacked, stacked) - g.scale(stacked, 0.3);
    Expr root = g.sum(g.row_norm(hv + g.constant(Matrix::Constant(4, 5, 2.0)), 5)) +
                g.squared_frobenius(g.sub(w, g.constant(Matrix::Constant(4, 3, 0.1))));
    ad::ParameterSet params;
    params.add("w", random_matrix(4, 3, rng));
    params.add("b", random_matrix(1, 3, rng));
    params.add("v", random_matrix(3, 2, rng));
    ad::FiniteDifferenceOptions opt;
    opt.error_floor = 1e-6;
    const auto report = ad::finite_difference_check(g, root, params, 1e-5, opt);
    EXPECT_LT(report.max_relative_error, 1e-4) << "trial " << trial;
    EXPECT_EQ(report.skipped, 0);
  }
}

TEST(External, ValueAndGradientFlowThrough) {
  ad::Graph g;
  Expr w = g.parameter("w", 2, 2);
  Expr e = g.external(
      g.scale(w, 2.0),
      [](const Matrix& m) { return ad::ExternalValue{m.squaredNorm(), 2.0 * m}; }, "norm");
  ad::ParameterSet params;
  params.add("w", Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(g.evaluate(e, params), 8.0);
  const Matrix grad = g.gradients(e, params)["w"];
  EXPECT_TRUE(grad.isApprox(8.0 * Matrix::Identity(2, 2)));
  EXPECT_EQ(g.label(e), "norm");
}

TEST(Constants, ReplacedBetweenEvaluations) {
  ad::Graph g;
  Expr c = g.scalar(2.0);
  Expr x = g.parameter("x", 1, 1);
  Expr root = g.hadamard(c, g.squared_frobenius(x));
  ad::ParameterSet params;
  params.add("x", scalar(3.0));
  EXPECT_DOUBLE_EQ(g.evaluate(root, params), 18.0);
  g.set_constant(c, 0.5);
  EXPECT_DOUBLE_EQ(g.evaluate(root, params), 4.5);
}

TEST(Shapes, CheckedAtConstruction) {
  ad::Graph g;
  Expr a = g.constant(Matrix::Zero(2, 3));
  Expr b = g.constant(Matrix::Zero(2, 2));
  EXPECT_THROW(g.matmul(a, b), ShapeError);
  EXPECT_THROW(g.add(a, b), ShapeError);
  EXPECT_THROW(g.slice(a, 1, 1, 2, 2), ShapeError);
  EXPECT_THROW(g.row_norm(a, 2), ShapeError);
  EXPECT_THROW(g.evaluate(a, {}), ShapeError);
}

TEST(ParameterSetTest, FlattenRoundTrip) {
  ad::ParameterSet p;
  p.add("a", Matrix::Random(2, 3));
  p.add("b", Matrix::Random(1, 1));
  const Vector flat = p.flatten();
  ASSERT_EQ(flat.size(), 7);
  ad::ParameterSet q = p.zeros_like();
  q.unflatten(flat);
  EXPECT_EQ(q["a"], p["a"]);
  EXPECT_EQ(q["b"], p["b"]);
  EXPECT_THROW(q.unflatten(Vector::Zero(3)), ShapeError);
}

TEST(Determinism, RepeatedEvaluationIsBitIdentical) {
  std::mt19937_64 rng(1);
  ad::Graph g;
  Expr w = g.parameter("w", 6, 6);
  Expr root = g.sum(g.sigmoid(g.matmul(w, w)));
  ad::ParameterSet params;
  params.add("w", random_matrix(6, 6, rng));
  const double a = g.evaluate(root, params);
  const Matrix ga = g.gradients(root, params)["w"];
  EXPECT_EQ(a, g.evaluate(root, params));
  EXPECT_EQ(ga, g.gradients(root, params)["w"]);
}
