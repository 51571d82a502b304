#include <cmath>

#include <gtest/gtest.h>

#include "mgcsl/errors.hpp"
#include "mgcsl/orientation.hpp"

using namespace mgcsl;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

struct GraphSide {
  ad::Graph g;
  ad::ParameterSet params;
  orient::BankNodes bank;
  ad::Expr C, redundancy, loss;
};

void build(GraphSide& s, const orient::MlpBank& bank, const Matrix& X, const Matrix& Z, const Matrix& A,
           double alpha2, orient::FirstLayerForm form) {
  const Eigen::Index n = X.rows();
  Matrix inputs(n, X.cols() + Z.cols());
  inputs << X, Z;
  ad::Expr x = s.g.constant(X);
  ad::Expr a = s.g.constant(A);
  s.bank = orient::build_bank(s.g, bank, true, form);
  orient::build_bank_forward(s.g, s.bank, s.g.constant(inputs), s.g.constant(Matrix::Ones(n, 1)), bank);
  s.C = orient::wam_micro(s.g, s.bank, a, bank);
  s.redundancy = orient::redundancy_penalty(s.g, s.bank, a, bank);
  s.loss = orient::orientation_loss(s.g, s.bank, x, a, bank, alpha2);
  bank.export_to(s.params, form == orient::FirstLayerForm::kSignSplit);
}

}  // namespace

TEST(MlpBank, HandForwardValue) {
  // d = 2, q = 1, hidden = 1; target 1 reads x0 with weight 1 and scales by 2.
  auto bank = orient::MlpBank::zeros(2, 1, 1);
  bank.first_layer[1](0, 0) = 1.0;
  bank.second_layer[1](0, 0) = 2.0;
  Matrix X(1, 2);
  X << 1.0, 7.0;
  const Matrix Z = Matrix::Zero(1, 1);
  const Matrix out = orient::mlp_bank_forward(X, Z, bank);
  EXPECT_NEAR(out(0, 1), 2.0 * sigmoid(1.0), 1e-12);
  EXPECT_NEAR(out(0, 1), 1.46212, 1e-5);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.0);
}

TEST(MlpBank, SelfInputIsIgnored) {
  auto bank = orient::MlpBank::random(4, 2, 3, 1);
  bank.first_layer[2](2, 0) = 5.0;  // stored but masked
  const Matrix Z = Matrix::Random(6, 2);
  Matrix X = Matrix::Random(6, 4);
  const Matrix before = orient::mlp_bank_forward(X, Z, bank);
  X.col(2).setRandom();
  const Matrix after = orient::mlp_bank_forward(X, Z, bank);
  EXPECT_EQ(before.col(2), after.col(2));
  EXPECT_NE(before.col(0), after.col(0));
}

TEST(MlpBank, RandomHoldsSelfPin) {
  const auto bank = orient::MlpBank::random(5, 2, 3, 4);
  EXPECT_TRUE(bank.self_pin_holds());
  EXPECT_TRUE(bank.all_finite());
}

TEST(AdjacencyMatrices, HandValues) {
  auto bank = orient::MlpBank::zeros(2, 1, 1);
  bank.first_layer[1](0, 0) = 3.0;
  bank.first_layer[1](2, 0) = 1.0;
  EXPECT_DOUBLE_EQ(orient::wam_micro(bank, Matrix::Zero(2, 1))(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(orient::wam_micro(bank, column({1.0, 0.0}))(0, 1), 4.0);

  auto wide = orient::MlpBank::zeros(2, 1, 2);
  wide.first_layer[1](0, 0) = 3.0;
  wide.first_layer[1](0, 1) = -4.0;
  const Matrix S = orient::wam_multigran(wide);
  EXPECT_EQ(S.rows(), 3);
  EXPECT_DOUBLE_EQ(S(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(S(2, 1), 0.0);
}

TEST(Redundancy, HandValue) {
  // Direct mass 3 from x0 into x1, macro mass 2 into x1, x0 contributes 4 to the macro.
  auto bank = orient::MlpBank::zeros(2, 1, 1);
  bank.first_layer[1](0, 0) = 3.0;
  bank.first_layer[1](2, 0) = -2.0;
  EXPECT_DOUBLE_EQ(orient::redundancy_penalty(bank, column({4.0, 0.0})), 24.0);
  EXPECT_DOUBLE_EQ(orient::redundancy_penalty(bank, column({0.0, 4.0})), 0.0);
}

TEST(OrientationLoss, HandValues) {
  auto bank = orient::MlpBank::zeros(2, 1, 1);
  bank.second_layer[0](0, 0) = 0.2;
  const Matrix Z = Matrix::Zero(3, 1);
  Matrix X = Matrix::Zero(3, 2);
  X.col(0).setConstant(0.1);  // sigmoid(0) * 0.2
  const Matrix Xhat = orient::mlp_bank_forward(X, Z, bank);
  EXPECT_NEAR(orient::orientation_loss(X, Xhat, bank, Matrix::Zero(2, 1), 2.0), 0.04, 1e-12);

  const int d = 3;
  const auto zero = orient::MlpBank::zeros(d, 1, 2);
  const Matrix ones = Matrix::Ones(4, d);
  const Matrix zhat = orient::mlp_bank_forward(ones, Matrix::Zero(4, 1), zero);
  EXPECT_DOUBLE_EQ(orient::orientation_loss(ones, zhat, zero, Matrix::Zero(d, 1), 0.5), d / 2.0);
}

TEST(OrientationGraph, MatchesEagerInBothForms) {
  const auto bank = orient::MlpBank::random(4, 2, 3, 6);
  const Matrix X = Matrix::Random(5, 4);
  const Matrix Z = Matrix::Random(5, 2);
  const Matrix A = Matrix::Random(4, 2).cwiseAbs();
  const Matrix Xhat = orient::mlp_bank_forward(X, Z, bank);
  const double eager = orient::orientation_loss(X, Xhat, bank, A, 0.01);

  for (auto form : {orient::FirstLayerForm::kPlain, orient::FirstLayerForm::kSignSplit}) {
    GraphSide s;
    build(s, bank, X, Z, A, 0.01, form);
    EXPECT_NEAR(s.g.evaluate(s.loss, s.params), eager, 1e-12);
    EXPECT_TRUE(s.g.value(s.bank.Xhat).isApprox(Xhat, 1e-12));
    EXPECT_TRUE(s.g.value(s.C).isApprox(orient::wam_micro(bank, A), 1e-12));
    EXPECT_NEAR(s.g.value(s.redundancy)(0, 0), orient::redundancy_penalty(bank, A), 1e-12);
  }
}

TEST(OrientationGraph, SelfRowsCarryNoGradient) {
  const auto bank = orient::MlpBank::random(3, 1, 2, 2);
  const Matrix X = Matrix::Random(4, 3);
  const Matrix Z = Matrix::Random(4, 1);
  GraphSide s;
  build(s, bank, X, Z, Matrix::Random(3, 1).cwiseAbs(), 0.1, orient::FirstLayerForm::kPlain);
  const auto grads = s.g.gradients(s.loss, s.params);
  for (int j = 0; j < 3; ++j) {
    EXPECT_TRUE(grads["mlp.w1[" + std::to_string(j) + "]"].row(j).isZero(0.0));
  }
}

TEST(OrientationGraph, SmoothGradientMatchesFiniteDifferences) {
  const auto bank = orient::MlpBank::random(3, 1, 2, 12);
  const Matrix X = Matrix::Random(6, 3);
  const Matrix Z = Matrix::Random(6, 1);
  GraphSide s;
  build(s, bank, X, Z, Matrix::Random(3, 1).cwiseAbs(), 0.0, orient::FirstLayerForm::kSignSplit);
  ad::FiniteDifferenceOptions fd;
  fd.error_floor = 1e-6;
  const auto report = ad::finite_difference_check(s.g, s.loss, s.params, 1e-6, fd);
  EXPECT_GT(report.checked, 0);
  EXPECT_LT(report.max_relative_error, 1e-5);
}

TEST(AdjacencyMatrices, InvariantToFirstLayerSignFlip) {
  auto bank = orient::MlpBank::random(4, 2, 3, 3);
  const Matrix A = Matrix::Random(4, 2).cwiseAbs();
  const Matrix C = orient::wam_micro(bank, A);
  const Matrix S = orient::wam_multigran(bank);
  for (auto& w : bank.first_layer) w = -w;
  EXPECT_TRUE(orient::wam_micro(bank, A).isApprox(C, 1e-14));
  EXPECT_TRUE(orient::wam_multigran(bank).isApprox(S, 1e-14));
}

TEST(MlpBank, SignSplitExportRoundTrip) {
  const auto bank = orient::MlpBank::random(3, 2, 2, 7);
  ad::ParameterSet split;
  bank.export_to(split, true);
  EXPECT_TRUE(split.contains("mlp.w1p[0]"));
  EXPECT_FALSE(split.contains("mlp.w1[0]"));
  EXPECT_GE(split["mlp.w1n[1]"].minCoeff(), 0.0);
  auto back = orient::MlpBank::zeros(3, 2, 2);
  back.import_from(split);
  for (int j = 0; j < 3; ++j) EXPECT_TRUE(back.first_layer[j].isApprox(bank.first_layer[j], 0.0));
}

TEST(MlpBank, CheckpointRoundTrip) {
  const auto bank = orient::MlpBank::random(3, 1, 2, 8);
  const auto back = orient::from_json(orient::to_json(bank, 8));
  EXPECT_EQ(back.d, 3);
  EXPECT_EQ(back.q, 1);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(back.first_layer[j], bank.first_layer[j]);
    EXPECT_EQ(back.second_layer[j], bank.second_layer[j]);
  }
  EXPECT_THROW(orient::from_json("[]"), ParseError);
}

TEST(MlpBank, ShapeErrors) {
  const auto bank = orient::MlpBank::zeros(3, 1, 2);
  EXPECT_THROW(orient::wam_micro(bank, Matrix::Zero(2, 1)), ShapeError);
  EXPECT_THROW(orient::mlp_bank_forward(Matrix::Zero(2, 3), Matrix::Zero(3, 1), bank), ShapeError);
}
