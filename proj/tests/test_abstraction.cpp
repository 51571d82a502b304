#include <cmath>

#include <gtest/gtest.h>

#include "mgcsl/abstraction.hpp"
#include "mgcsl/errors.hpp"

using namespace mgcsl;

namespace {

// d = 1, hidden = 2, q = 1 encoder with |W1| |W2| = 2 * 1 + 1 * 4.
sae::SaeModel hand_model() {
  sae::SaeModel m = sae::SaeModel::zeros(1, 2, 1);
  m.enc1[0] << 2.0, -1.0;
  m.enc2[0] << 1.0, -4.0;
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Sae, DefaultHidden) {
  EXPECT_EQ(sae::default_hidden(20), 15);
  EXPECT_EQ(sae::default_hidden(1), 1);
}

TEST(Sae, ZeroParametersGiveHalfPerVariable) {
  const int d = 4;
  const auto m = sae::SaeModel::zeros(d, 3, 2);
  const Matrix X = Matrix::Random(5, d);
  const auto out = sae::sae_forward(X, m);
  ASSERT_EQ(out.Z.rows(), 5);
  ASSERT_EQ(out.Z.cols(), 2);
  EXPECT_TRUE(out.Z.isApprox(Matrix::Constant(5, 2, 0.5 * d)));
  EXPECT_TRUE(out.Y.isApprox(Matrix::Constant(5, d, 0.5)));
}

TEST(Sae, HandEncoderValue) {
  sae::SaeModel m = sae::SaeModel::zeros(1, 1, 1);
  m.enc1[0](0, 0) = 1.0;
  m.enc2[0](0, 0) = 1.0;
  m.enc2_bias[0](0, 0) = -0.5;
  Matrix X(1, 1);
  X << 0.0;
  // act(act(0) * 1 - 0.5) = sigmoid(0)
  EXPECT_NEAR(sae::sae_forward(X, m).Z(0, 0), 0.5, 1e-12);
  m.enc2_bias[0](0, 0) = 0.0;
  EXPECT_NEAR(sae::sae_forward(X, m).Z(0, 0), sigmoid(0.5), 1e-12);
  EXPECT_NEAR(sae::sae_forward(X, m).Z(0, 0), 0.62246, 1e-5);
}

TEST(Sae, ContributionMatrixHandValue) {
  const Matrix A = sae::contribution_matrix(hand_model());
  ASSERT_EQ(A.rows(), 1);
  ASSERT_EQ(A.cols(), 1);
  EXPECT_DOUBLE_EQ(A(0, 0), 6.0);
}

TEST(Sae, ContributionMatrixIsNonnegative) {
  const auto m = sae::SaeModel::random(6, 4, 3, 11);
  const Matrix A = sae::contribution_matrix(m);
  EXPECT_EQ(A.rows(), 6);
  EXPECT_EQ(A.cols(), 3);
  EXPECT_GE(A.minCoeff(), 0.0);
}

TEST(Sae, LossHandValues) {
  Matrix X(1, 1);
  X << 1.5;
  const auto zero = sae::SaeModel::zeros(1, 2, 1);
  // (1/2) * (1.5 - 0.5)^2 with no weights.
  EXPECT_DOUBLE_EQ(sae::abstraction_loss(X, zero, 0.1), 0.5);
  // Zero decoder keeps Y = 0.5; encoder L1 = 3 + 5 = 8.
  EXPECT_NEAR(sae::abstraction_loss(X, hand_model(), 0.1), 1.3, 1e-12);
  EXPECT_NEAR(sae::abstraction_loss(X, hand_model(), 0.0), 0.5, 1e-12);
}

TEST(Sae, GraphMatchesEagerComputation) {
  for (auto act : {ad::Activation::kSigmoid, ad::Activation::kTanh}) {
    auto m = sae::SaeModel::random(5, 4, 2, 3);
    m.activation = act;
    const Matrix X = Matrix::Random(7, 5);

    ad::Graph g;
    ad::Expr x = g.constant(X);
    ad::Expr ones = g.constant(Matrix::Ones(7, 1));
    const auto nodes = sae::build_sae(g, x, ones, m);
    ad::Expr loss = sae::abstraction_loss(g, nodes, x, 0.3);
    ad::ParameterSet params;
    m.export_to(params);

    EXPECT_NEAR(g.evaluate(loss, params), sae::abstraction_loss(X, m, 0.3), 1e-12);
    const auto eager = sae::sae_forward(X, m);
    EXPECT_TRUE(g.value(nodes.Z).isApprox(eager.Z, 1e-12));
    EXPECT_TRUE(g.value(nodes.Y).isApprox(eager.Y, 1e-12));
    EXPECT_TRUE(g.value(nodes.A).isApprox(sae::contribution_matrix(m), 1e-12));
  }
}

TEST(Sae, LossGradientMatchesFiniteDifferences) {
  const auto m = sae::SaeModel::random(3, 2, 2, 8);
  const Matrix X = Matrix::Random(6, 3);
  ad::Graph g;
  ad::Expr x = g.constant(X);
  ad::Expr ones = g.constant(Matrix::Ones(6, 1));
  const auto nodes = sae::build_sae(g, x, ones, m);
  ad::Expr loss = sae::abstraction_loss(g, nodes, x, 0.1);
  ad::ParameterSet params;
  m.export_to(params);
  ad::FiniteDifferenceOptions fd;
  fd.error_floor = 1e-6;
  const auto report = ad::finite_difference_check(g, loss, params, 1e-6, fd);
  EXPECT_GT(report.checked, 0);
  EXPECT_LT(report.max_relative_error, 1e-5);
}

TEST(Sae, ExportImportRoundTrip) {
  const auto m = sae::SaeModel::random(4, 3, 2, 5);
  ad::ParameterSet params;
  m.export_to(params);
  auto back = sae::SaeModel::zeros(4, 3, 2);
  back.import_from(params);
  const Matrix X = Matrix::Random(3, 4);
  EXPECT_EQ(sae::sae_forward(X, back).Z, sae::sae_forward(X, m).Z);
}

TEST(Sae, CheckpointRoundTrip) {
  auto m = sae::SaeModel::random(4, 3, 2, 5);
  m.activation = ad::Activation::kTanh;
  const auto back = sae::from_json(sae::to_json(m, 5));
  EXPECT_EQ(back.d, 4);
  EXPECT_EQ(back.hidden, 3);
  EXPECT_EQ(back.q, 2);
  EXPECT_EQ(back.activation, ad::Activation::kTanh);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(back.enc1[i], m.enc1[i]);
    EXPECT_EQ(back.enc2[i], m.enc2[i]);
  }
  EXPECT_EQ(back.dec2, m.dec2);
  EXPECT_THROW(sae::from_json("{not json"), ParseError);
}

TEST(Sae, RandomIsDeterministic) {
  const auto a = sae::SaeModel::random(3, 2, 2, 9);
  const auto b = sae::SaeModel::random(3, 2, 2, 9);
  EXPECT_EQ(a.enc1[1], b.enc1[1]);
  EXPECT_EQ(a.dec1, b.dec1);
  EXPECT_TRUE(a.all_finite());
}

TEST(Sae, SingleWeightContribution) {
  auto m = sae::SaeModel::zeros(1, 1, 1);
  m.enc1[0](0, 0) = 2.0;
  m.enc2[0](0, 0) = -3.0;
  EXPECT_DOUBLE_EQ(sae::contribution_matrix(m)(0, 0), 6.0);
  EXPECT_TRUE(sae::contribution_matrix(sae::SaeModel::zeros(3, 2, 2)).isZero(0.0));
}

TEST(Sae, EncoderPenaltyIsL11OfBothLayers) {
  auto m = sae::SaeModel::zeros(1, 1, 1);
  m.enc1[0](0, 0) = 1.0;
  m.enc2[0](0, 0) = -2.0;
  Matrix X(2, 1);
  X << 0.3, -0.7;
  const double penalty = sae::abstraction_loss(X, m, 0.1) - sae::abstraction_loss(X, m, 0.0);
  EXPECT_NEAR(penalty, 0.3, 1e-12);
}
