#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgcsl/autodiff.hpp"

namespace mgcsl::orient {

/// One single-hidden-layer MLP per micro-variable j, reading all d micro
/// columns and q macro columns. Row j of first_layer[j] is the self input and
/// is kept at zero.
struct MlpBank {
  int d = 0;
  int q = 0;
  int hidden = 0;
  ad::Activation activation = ad::Activation::kSigmoid;

  std::vector<Matrix> first_layer;   // d of (d+q) x hidden
  std::vector<Matrix> first_bias;    // d of 1 x hidden
  std::vector<Matrix> second_layer;  // d of hidden x 1
  std::vector<Matrix> second_bias;   // d of 1 x 1

  static MlpBank zeros(int d, int q, int hidden);
  /// Weights uniform in +-1/sqrt(fan_in), biases zero, self rows zero.
  static MlpBank random(int d, int q, int hidden, std::uint64_t seed);

  void enforce_self_pin();
  bool self_pin_holds() const;

  /// Adds every matrix under the "mlp." prefix. With `sign_split` each
  /// first layer is stored as two nonnegative halves "mlp.w1p[j]" and
  /// "mlp.w1n[j]" whose difference is the weight.
  void export_to(ad::ParameterSet& params, bool sign_split = false) const;
  /// Reads either layout.
  void import_from(const ad::ParameterSet& params);
  bool all_finite() const;
};

/// Column j is MLP_j applied to [X | Z] with the self column masked out.
Matrix mlp_bank_forward(const Matrix& X, const Matrix& Z, const MlpBank& bank);

/// C[i, j] = || W_j[i, :] + A[i, :] W_j[d:, :] ||_2, d x d.
Matrix wam_micro(const MlpBank& bank, const Matrix& A);

/// S[i, j] = || W_j[i, :] ||_2, (d+q) x d.
Matrix wam_multigran(const MlpBank& bank);

/// Sum over targets j and inputs i of (macro influence of i on j) times
/// (direct weight mass of i into j). Evaluated on the weights as stored.
double redundancy_penalty(const MlpBank& bank, const Matrix& A);

/// (1/2n)||X - Xhat||^2 + redundancy + alpha2 (sum_j |W_j|_1,1 + 1/2 sum_j (|W_j|^2 + |w2_j|^2)).
double orientation_loss(const Matrix& X, const Matrix& Xhat, const MlpBank& bank, const Matrix& A,
                        double alpha2);

enum class FirstLayerForm { kPlain, kSignSplit };

struct BankNodes {
  std::vector<ad::Expr> first_layer, first_bias, second_layer, second_bias;
  ad::Expr first_all;   // (d+q) x (d*hidden), self rows masked when pinned
  ad::Expr first_mass;  // entrywise |first_all|, or pos + neg when sign split
  ad::Expr second_all;  // (d*hidden) x 1
  ad::Expr Xhat;        // n x d, only when built with data
};

/// Declares the bank parameters. With `pin_self` the self rows are multiplied
/// by a 0/1 mask so they carry neither value nor gradient. The sign-split form
/// makes the L1 and redundancy terms linear in the parameters; the caller
/// must keep both halves nonnegative.
BankNodes build_bank(ad::Graph& g, const MlpBank& shape, bool pin_self = true,
                     FirstLayerForm form = FirstLayerForm::kPlain);

/// Wires X-hat from the n x (d+q) input node [X | Z]; `ones` is n x 1.
void build_bank_forward(ad::Graph& g, BankNodes& bank, ad::Expr inputs, ad::Expr ones,
                        const MlpBank& shape);

/// d x d matrix C from the graph-side weights and contribution matrix A (d x q).
ad::Expr wam_micro(ad::Graph& g, const BankNodes& bank, ad::Expr A, const MlpBank& shape);
ad::Expr redundancy_penalty(ad::Graph& g, const BankNodes& bank, ad::Expr A, const MlpBank& shape);
ad::Expr orientation_loss(ad::Graph& g, const BankNodes& bank, ad::Expr X, ad::Expr A,
                          const MlpBank& shape, double alpha2);

std::string to_json(const MlpBank& bank, std::uint64_t seed = 0);
MlpBank from_json(const std::string& text);

}  // namespace mgcsl::orient
