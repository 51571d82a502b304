#pragma once

// Reverse-mode differentiation over dense matrix expressions.
//
// A Graph is built once for a given model shape. Leaves are named parameters
// (bound to a ParameterSet at evaluation time) and constants (whose values
// may be replaced between evaluations without rebuilding). Every shape rule
// is checked when a node is created, so evaluation never fails on shapes.
//
// Non-smooth points use subgradient 0: d|x|/dx at x = 0 and the gradient of
// a row norm at an all-zero row.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgcsl/linalg.hpp"

namespace mgcsl::ad {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Expr {
 public:
  Expr() = default;

  bool valid() const { return graph_ != nullptr; }
  int id() const { return id_; }
  Graph& graph() const { return *graph_; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;

 private:
  friend class Graph;
  Expr(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Ordered, named collection of parameter matrices. Shapes are fixed once a
/// parameter is added; flatten/unflatten use insertion order, column-major
/// within each matrix.
class ParameterSet {
 public:
  void add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  const std::string& name(std::size_t i) const { return names_[i]; }

  Matrix& operator[](std::size_t i) { return values_[i]; }
  const Matrix& operator[](std::size_t i) const { return values_[i]; }
  Matrix& operator[](const std::string& name) { return values_[index_of(name)]; }
  const Matrix& operator[](const std::string& name) const { return values_[index_of(name)]; }

  /// Total number of scalar entries.
  Eigen::Index num_entries() const;
  Vector flatten() const;
  /// Overwrites every entry from `flat`; throws ShapeError on length mismatch.
  void unflatten(const Vector& flat);
  /// Same names and shapes, all entries zero.
  ParameterSet zeros_like() const;
  bool same_layout(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Result of an opaque node: scalar value and gradient w.r.t. the input.
struct ExternalValue {
  double value = 0.0;
  Matrix gradient;
};
using ExternalFunction = std::function<ExternalValue(const Matrix& input)>;

enum class Activation { kSigmoid, kTanh };

enum class OpKind {
  kParameter,
  kConstant,
  kMatMul,
  kAdd,
  kSub,
  kScale,
  kHadamard,
  kConcatCols,
  kConcatRows,
  kSlice,
  kSigmoid,
  kTanh,
  kAbs,
  kRowNorm,
  kSquaredFrobenius,
  kL11Norm,
  kSum,
  kExternal,
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = delete;
  Graph& operator=(Graph&&) = delete;

  // Leaves.
  Expr parameter(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Expr constant(Matrix value);
  Expr scalar(double value);
  void set_constant(Expr node, const Matrix& value);
  void set_constant(Expr node, double value);

  // Operations.
  Expr matmul(Expr a, Expr b);
  Expr add(Expr a, Expr b);
  Expr sub(Expr a, Expr b);
  Expr scale(Expr a, double factor);
  Expr hadamard(Expr a, Expr b);
  Expr concat_cols(std::span<const Expr> parts);
  Expr concat_rows(std::span<const Expr> parts);
  Expr slice(Expr a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);
  Expr sigmoid(Expr a);
  Expr tanh(Expr a);
  Expr activate(Expr a, Activation act);
  Expr abs(Expr a);
  /// L2 norm over consecutive column groups of `group` entries within each
  /// row; rows x (cols / group). group = 0 means the whole row (rows x 1).
  Expr row_norm(Expr a, Eigen::Index group = 0);
  Expr squared_frobenius(Expr a);
  Expr l11_norm(Expr a);
  Expr sum(Expr a);
  /// Scalar node whose value and input-gradient come from `fn`.
  Expr external(Expr input, ExternalFunction fn, std::string label);

  /// Attaches a human-readable name, used in numeric error messages.
  void set_label(Expr e, std::string label);
  const std::string& label(Expr e) const;

  /// Forward pass up to `root` (must be 1x1). Values of every node with
  /// id <= root.id() are available through value() afterwards.
  double evaluate(Expr root, const ParameterSet& params);
  /// Forward + backward. Returned adjoints share the layout of `params`.
  ParameterSet gradients(Expr root, const ParameterSet& params);
  double value_and_gradients(Expr root, const ParameterSet& params, ParameterSet& grads);

  const Matrix& value(Expr e) const;
  std::size_t size() const { return nodes_.size(); }
  std::size_t num_parameters() const { return parameter_nodes_.size(); }

 private:
  struct Node {
    OpKind kind;
    std::vector<int> operands;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool requires_grad = false;
    // Op data: scale factor, slice origin, row-norm group.
    double factor = 1.0;
    Eigen::Index row0 = 0;
    Eigen::Index col0 = 0;
    Eigen::Index group = 0;
    std::string name;  // parameter name or label
    ExternalFunction external;
    Matrix value;
    Matrix adjoint;
    Matrix external_grad;
  };

  Expr push(Node node);
  const Node& node(Expr e) const;
  void check_owned(Expr e) const;
  void bind(const ParameterSet& params);
  void forward(int root);
  void backward(int root);

  std::vector<Node> nodes_;
  std::vector<int> parameter_nodes_;
};

// Free-function spellings.
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(double factor, Expr a);
Expr matmul(Expr a, Expr b);
Expr hadamard(Expr a, Expr b);
Expr sigmoid(Expr a);
Expr abs(Expr a);
Expr sum(Expr a);
Expr squared_frobenius(Expr a);
Expr l11_norm(Expr a);
Expr slice(Expr a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);
/// Left-to-right sum of equally shaped expressions (at least one).
Expr add_all(std::span<const Expr> terms);

struct FiniteDifferenceOptions {
  /// Above this many entries a random subsample of this size is checked.
  Eigen::Index max_entries = 10000;
  std::uint64_t seed = 0;
  /// Entries whose one-sided slopes differ by more than this (relative to
  /// max(1, |slope|)) sit on a kink and are skipped.
  double kink_tolerance = 1e-2;
  /// Denominator floor of the relative error.
  double error_floor = 1.0;
};

struct FiniteDifferenceReport {
  double max_relative_error = 0.0;
  Eigen::Index checked = 0;
  Eigen::Index skipped = 0;
  std::size_t worst_parameter = 0;
  Eigen::Index worst_entry = 0;
};

/// Central differences against gradients() over every parameter entry.
/// The error for one entry is |fd - analytic| / max(floor, |fd|, |analytic|).
FiniteDifferenceReport finite_difference_check(Graph& graph, Expr root, const ParameterSet& params,
                                               double h,
                                               const FiniteDifferenceOptions& options = {});

}  // namespace mgcsl::ad
