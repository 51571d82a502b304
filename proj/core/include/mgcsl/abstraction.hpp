#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgcsl/autodiff.hpp"

namespace mgcsl::sae {

/// Hidden width used when none is given: round(0.75 d), at least 1.
int default_hidden(int d);

/// Per-variable two-layer encoders summed into q latent columns, and a shared
/// two-layer decoder back to d columns.
struct SaeModel {
  int d = 0;
  int hidden = 0;
  int q = 0;
  ad::Activation activation = ad::Activation::kSigmoid;

  std::vector<Matrix> enc1;       // d of 1 x hidden
  std::vector<Matrix> enc1_bias;  // d of 1 x hidden
  std::vector<Matrix> enc2;       // d of hidden x q
  std::vector<Matrix> enc2_bias;  // d of 1 x q
  Matrix dec1;                    // q x hidden
  Matrix dec1_bias;               // 1 x hidden
  Matrix dec2;                    // hidden x d
  Matrix dec2_bias;               // 1 x d

  static SaeModel zeros(int d, int hidden, int q);
  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static SaeModel random(int d, int hidden, int q, std::uint64_t seed);

  /// Adds every matrix under the "sae." prefix, in a fixed order.
  void export_to(ad::ParameterSet& params) const;
  /// Copies values back from a set produced by export_to on the same shape.
  void import_from(const ad::ParameterSet& params);
  bool all_finite() const;
};

struct SaeOutput {
  Matrix Z;  // n x q
  Matrix Y;  // n x d
};

/// Z = sum_i act(act(x_i W1_i + b1_i) W2_i + b2_i), Y = act(act(Z Wd1 + c1) Wd2 + c2).
SaeOutput sae_forward(const Matrix& X, const SaeModel& m);

/// A[i, j] = (|W1_i| |W2_i|)[0, j], d x q.
Matrix contribution_matrix(const SaeModel& m);

/// Mean-halved squared reconstruction error plus alpha1 times the L1,1 norm
/// of both encoder layers (weights only).
double abstraction_loss(const Matrix& X, const SaeModel& m, double alpha1);

/// Graph handles for one SAE inside a larger objective.
struct SaeNodes {
  std::vector<ad::Expr> enc1, enc1_bias, enc2, enc2_bias;
  ad::Expr dec1, dec1_bias, dec2, dec2_bias;
  ad::Expr Z;        // n x q
  ad::Expr Y;        // n x d
  ad::Expr A;        // d x q
  ad::Expr encoder_l1;
};

/// Declares the SAE parameters (names match export_to) and wires the forward
/// pass on the constant data node X (n x d). `ones` is an n x 1 constant.
SaeNodes build_sae(ad::Graph& g, ad::Expr X, ad::Expr ones, const SaeModel& shape);

/// (1/2n)||X - Y||^2 + alpha1 * encoder L1,1.
ad::Expr abstraction_loss(ad::Graph& g, const SaeNodes& nodes, ad::Expr X, double alpha1);

/// Checkpoint JSON: shape, activation, seed, named parameter arrays.
std::string to_json(const SaeModel& m, std::uint64_t seed = 0);
SaeModel from_json(const std::string& text);

}  // namespace mgcsl::sae
