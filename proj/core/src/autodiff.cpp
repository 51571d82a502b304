#include "mgcsl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mgcsl/errors.hpp"

namespace mgcsl::ad {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Eigen::Index Expr::rows() const { return graph_->value(*this).rows(); }
Eigen::Index Expr::cols() const { return graph_->value(*this).cols(); }

// ---------------------------------------------------------------------------
// ParameterSet

void ParameterSet::add(std::string name, Matrix value) {
  if (contains(name)) throw ConfigError("ParameterSet: duplicate parameter '" + name + "'");
  index_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParameterSet: unknown parameter '" + name + "'");
  return it->second;
}

Eigen::Index ParameterSet::num_entries() const {
  Eigen::Index total = 0;
  for (const auto& v : values_) total += v.size();
  return total;
}

Vector ParameterSet::flatten() const {
  Vector flat(num_entries());
  Eigen::Index offset = 0;
  for (const auto& v : values_) {
    flat.segment(offset, v.size()) = v.reshaped();
    offset += v.size();
  }
  return flat;
}

void ParameterSet::unflatten(const Vector& flat) {
  if (flat.size() != num_entries()) {
    throw ShapeError("ParameterSet::unflatten: expected " + std::to_string(num_entries()) +
                     " entries, got " + std::to_string(flat.size()));
  }
  Eigen::Index offset = 0;
  for (auto& v : values_) {
    v.reshaped() = flat.segment(offset, v.size());
    offset += v.size();
  }
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) {
    out.add(names_[i], Matrix::Zero(values_[i].rows(), values_[i].cols()));
  }
  return out;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (names_[i] != other.names_[i] || values_[i].rows() != other.values_[i].rows() ||
        values_[i].cols() != other.values_[i].cols()) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Graph construction

Expr Graph::push(Node n) {
  n.value.setZero(n.rows, n.cols);
  nodes_.push_back(std::move(n));
  return Expr(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::check_owned(Expr e) const {
  if (!e.valid() || e.graph_ != this || e.id_ < 0 || e.id_ >= static_cast<int>(nodes_.size())) {
    throw ShapeError("autodiff: expression does not belong to this graph");
  }
}

const Graph::Node& Graph::node(Expr e) const {
  check_owned(e);
  return nodes_[e.id_];
}

Expr Graph::parameter(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  for (int id : parameter_nodes_) {
    if (nodes_[id].name == name) throw ConfigError("autodiff: duplicate parameter '" + name + "'");
  }
  Node n;
  n.kind = OpKind::kParameter;
  n.rows = rows;
  n.cols = cols;
  n.requires_grad = true;
  n.name = name;
  Expr e = push(std::move(n));
  parameter_nodes_.push_back(e.id());
  return e;
}

Expr Graph::constant(Matrix value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.rows = value.rows();
  n.cols = value.cols();
  Expr e = push(std::move(n));
  nodes_[e.id_].value = std::move(value);
  return e;
}

Expr Graph::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

void Graph::set_constant(Expr e, const Matrix& value) {
  check_owned(e);
  Node& n = nodes_[e.id_];
  if (n.kind != OpKind::kConstant) throw ConfigError("autodiff: set_constant on a non-constant");
  if (value.rows() != n.rows || value.cols() != n.cols) {
    throw ShapeError("autodiff: set_constant shape " + shape_str(value.rows(), value.cols()) +
                     " does not match " + shape_str(n.rows, n.cols));
  }
  n.value = value;
}

void Graph::set_constant(Expr e, double value) { set_constant(e, Matrix::Constant(1, 1, value)); }

namespace {

void require_same_shape(const char* op, Eigen::Index ar, Eigen::Index ac, Eigen::Index br,
                        Eigen::Index bc) {
  if (ar != br || ac != bc) {
    throw ShapeError(std::string("autodiff ") + op + ": shapes " + shape_str(ar, ac) + " and " +
                     shape_str(br, bc) + " differ");
  }
}

}  // namespace

Expr Graph::matmul(Expr a, Expr b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.cols != nb.rows) {
    throw ShapeError("autodiff matmul: inner dimensions differ (" + shape_str(na.rows, na.cols) +
                     " * " + shape_str(nb.rows, nb.cols) + ")");
  }
  Node n;
  n.kind = OpKind::kMatMul;
  n.operands = {a.id_, b.id_};
  n.rows = na.rows;
  n.cols = nb.cols;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n));
}

Expr Graph::add(Expr a, Expr b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require_same_shape("add", na.rows, na.cols, nb.rows, nb.cols);
  Node n;
  n.kind = OpKind::kAdd;
  n.operands = {a.id_, b.id_};
  n.rows = na.rows;
  n.cols = na.cols;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n));
}

Expr Graph::sub(Expr a, Expr b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require_same_shape("sub", na.rows, na.cols, nb.rows, nb.cols);
  Node n;
  n.kind = OpKind::kSub;
  n.operands = {a.id_, b.id_};
  n.rows = na.rows;
  n.cols = na.cols;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n));
}

Expr Graph::scale(Expr a, double factor) {
  const Node& na = node(a);
  Node n;
  n.kind = OpKind::kScale;
  n.operands = {a.id_};
  n.rows = na.rows;
  n.cols = na.cols;
  n.factor = factor;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::hadamard(Expr a, Expr b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require_same_shape("hadamard", na.rows, na.cols, nb.rows, nb.cols);
  Node n;
  n.kind = OpKind::kHadamard;
  n.operands = {a.id_, b.id_};
  n.rows = na.rows;
  n.cols = na.cols;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n));
}

Expr Graph::concat_cols(std::span<const Expr> parts) {
  if (parts.empty()) throw ShapeError("autodiff concat_cols: no operands");
  Node n;
  n.kind = OpKind::kConcatCols;
  n.rows = node(parts[0]).rows;
  for (const Expr& p : parts) {
    const Node& np = node(p);
    if (np.rows != n.rows) {
      throw ShapeError("autodiff concat_cols: row counts differ (" + std::to_string(np.rows) +
                       " vs " + std::to_string(n.rows) + ")");
    }
    n.cols += np.cols;
    n.requires_grad = n.requires_grad || np.requires_grad;
    n.operands.push_back(p.id_);
  }
  return push(std::move(n));
}

Expr Graph::concat_rows(std::span<const Expr> parts) {
  if (parts.empty()) throw ShapeError("autodiff concat_rows: no operands");
  Node n;
  n.kind = OpKind::kConcatRows;
  n.cols = node(parts[0]).cols;
  for (const Expr& p : parts) {
    const Node& np = node(p);
    if (np.cols != n.cols) {
      throw ShapeError("autodiff concat_rows: column counts differ (" + std::to_string(np.cols) +
                       " vs " + std::to_string(n.cols) + ")");
    }
    n.rows += np.rows;
    n.requires_grad = n.requires_grad || np.requires_grad;
    n.operands.push_back(p.id_);
  }
  return push(std::move(n));
}

Expr Graph::slice(Expr a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
                  Eigen::Index cols) {
  const Node& na = node(a);
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > na.rows ||
      col + cols > na.cols) {
    throw ShapeError("autodiff slice: block (" + std::to_string(row) + "," + std::to_string(col) +
                     ") of size " + shape_str(rows, cols) + " exceeds " +
                     shape_str(na.rows, na.cols));
  }
  Node n;
  n.kind = OpKind::kSlice;
  n.operands = {a.id_};
  n.rows = rows;
  n.cols = cols;
  n.row0 = row;
  n.col0 = col;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::sigmoid(Expr a) {
  const Node& na = node(a);
  Node n;
  n.kind = OpKind::kSigmoid;
  n.operands = {a.id_};
  n.rows = na.rows;
  n.cols = na.cols;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::tanh(Expr a) {
  const Node& na = node(a);
  Node n;
  n.kind = OpKind::kTanh;
  n.operands = {a.id_};
  n.rows = na.rows;
  n.cols = na.cols;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::activate(Expr a, Activation act) {
  return act == Activation::kTanh ? tanh(a) : sigmoid(a);
}

Expr Graph::abs(Expr a) {
  const Node& na = node(a);
  Node n;
  n.kind = OpKind::kAbs;
  n.operands = {a.id_};
  n.rows = na.rows;
  n.cols = na.cols;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::row_norm(Expr a, Eigen::Index group) {
  const Node& na = node(a);
  const Eigen::Index g = group == 0 ? na.cols : group;
  if (g <= 0 || na.cols % g != 0) {
    throw ShapeError("autodiff row_norm: group " + std::to_string(g) +
                     " does not divide column count " + std::to_string(na.cols));
  }
  Node n;
  n.kind = OpKind::kRowNorm;
  n.operands = {a.id_};
  n.rows = na.rows;
  n.cols = na.cols / g;
  n.group = g;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::squared_frobenius(Expr a) {
  const Node& na = node(a);
  Node n;
  n.kind = OpKind::kSquaredFrobenius;
  n.operands = {a.id_};
  n.rows = 1;
  n.cols = 1;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::l11_norm(Expr a) {
  const Node& na = node(a);
  Node n;
  n.kind = OpKind::kL11Norm;
  n.operands = {a.id_};
  n.rows = 1;
  n.cols = 1;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::sum(Expr a) {
  const Node& na = node(a);
  Node n;
  n.kind = OpKind::kSum;
  n.operands = {a.id_};
  n.rows = 1;
  n.cols = 1;
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

Expr Graph::external(Expr input, ExternalFunction fn, std::string label) {
  const Node& na = node(input);
  if (!fn) throw ConfigError("autodiff external: empty function");
  Node n;
  n.kind = OpKind::kExternal;
  n.operands = {input.id_};
  n.rows = 1;
  n.cols = 1;
  n.external = std::move(fn);
  n.name = std::move(label);
  n.requires_grad = na.requires_grad;
  return push(std::move(n));
}

void Graph::set_label(Expr e, std::string label) {
  check_owned(e);
  if (nodes_[e.id_].kind == OpKind::kParameter) return;
  nodes_[e.id_].name = std::move(label);
}

const std::string& Graph::label(Expr e) const { return node(e).name; }

const Matrix& Graph::value(Expr e) const { return node(e).value; }

// ---------------------------------------------------------------------------
// Evaluation

void Graph::bind(const ParameterSet& params) {
  for (int id : parameter_nodes_) {
    Node& n = nodes_[id];
    const Matrix& v = params[n.name];
    if (v.rows() != n.rows || v.cols() != n.cols) {
      throw ShapeError("autodiff: parameter '" + n.name + "' bound with shape " +
                       shape_str(v.rows(), v.cols()) + ", graph expects " +
                       shape_str(n.rows, n.cols));
    }
    n.value = v;
  }
}

void Graph::forward(int root) {
  for (int id = 0; id <= root; ++id) {
    Node& n = nodes_[id];
    auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.operands[k]].value; };
    switch (n.kind) {
      case OpKind::kParameter:
      case OpKind::kConstant:
        break;
      case OpKind::kMatMul:
        n.value.noalias() = in(0) * in(1);
        break;
      case OpKind::kAdd:
        n.value = in(0) + in(1);
        break;
      case OpKind::kSub:
        n.value = in(0) - in(1);
        break;
      case OpKind::kScale:
        n.value = n.factor * in(0);
        break;
      case OpKind::kHadamard:
        n.value = in(0).cwiseProduct(in(1));
        break;
      case OpKind::kConcatCols: {
        Eigen::Index c = 0;
        for (std::size_t k = 0; k < n.operands.size(); ++k) {
          n.value.middleCols(c, in(k).cols()) = in(k);
          c += in(k).cols();
        }
        break;
      }
      case OpKind::kConcatRows: {
        Eigen::Index r = 0;
        for (std::size_t k = 0; k < n.operands.size(); ++k) {
          n.value.middleRows(r, in(k).rows()) = in(k);
          r += in(k).rows();
        }
        break;
      }
      case OpKind::kSlice:
        n.value = in(0).block(n.row0, n.col0, n.rows, n.cols);
        break;
      case OpKind::kSigmoid:
        n.value = (1.0 + (-in(0).array()).exp()).inverse().matrix();
        break;
      case OpKind::kTanh:
        n.value = in(0).array().tanh().matrix();
        break;
      case OpKind::kAbs:
        n.value = in(0).cwiseAbs();
        break;
      case OpKind::kRowNorm: {
        const Matrix& x = in(0);
        for (Eigen::Index k = 0; k < n.cols; ++k) {
          n.value.col(k) = x.middleCols(k * n.group, n.group).rowwise().norm();
        }
        break;
      }
      case OpKind::kSquaredFrobenius:
        n.value(0, 0) = in(0).squaredNorm();
        break;
      case OpKind::kL11Norm:
        n.value(0, 0) = in(0).cwiseAbs().sum();
        break;
      case OpKind::kSum:
        n.value(0, 0) = in(0).sum();
        break;
      case OpKind::kExternal: {
        ExternalValue ev = n.external(in(0));
        if (ev.gradient.rows() != in(0).rows() || ev.gradient.cols() != in(0).cols()) {
          throw ShapeError("autodiff external '" + n.name + "': gradient shape " +
                           shape_str(ev.gradient.rows(), ev.gradient.cols()) +
                           " does not match input " + shape_str(in(0).rows(), in(0).cols()));
        }
        n.value(0, 0) = ev.value;
        n.external_grad = std::move(ev.gradient);
        break;
      }
    }
  }
}

void Graph::backward(int root) {
  for (int id = 0; id <= root; ++id) {
    Node& n = nodes_[id];
    if (n.requires_grad) n.adjoint.setZero(n.rows, n.cols);
  }
  nodes_[root].adjoint.setOnes(1, 1);

  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    const Matrix& g = n.adjoint;
    auto op = [&](std::size_t k) -> Node& { return nodes_[n.operands[k]]; };
    switch (n.kind) {
      case OpKind::kParameter:
      case OpKind::kConstant:
        break;
      case OpKind::kMatMul: {
        Node& a = op(0);
        Node& b = op(1);
        if (a.requires_grad) a.adjoint.noalias() += g * b.value.transpose();
        if (b.requires_grad) b.adjoint.noalias() += a.value.transpose() * g;
        break;
      }
      case OpKind::kAdd:
        if (op(0).requires_grad) op(0).adjoint += g;
        if (op(1).requires_grad) op(1).adjoint += g;
        break;
      case OpKind::kSub:
        if (op(0).requires_grad) op(0).adjoint += g;
        if (op(1).requires_grad) op(1).adjoint -= g;
        break;
      case OpKind::kScale:
        op(0).adjoint += n.factor * g;
        break;
      case OpKind::kHadamard: {
        Node& a = op(0);
        Node& b = op(1);
        if (a.requires_grad) a.adjoint += g.cwiseProduct(b.value);
        if (b.requires_grad) b.adjoint += g.cwiseProduct(a.value);
        break;
      }
      case OpKind::kConcatCols: {
        Eigen::Index c = 0;
        for (std::size_t k = 0; k < n.operands.size(); ++k) {
          Node& p = op(k);
          if (p.requires_grad) p.adjoint += g.middleCols(c, p.cols);
          c += p.cols;
        }
        break;
      }
      case OpKind::kConcatRows: {
        Eigen::Index r = 0;
        for (std::size_t k = 0; k < n.operands.size(); ++k) {
          Node& p = op(k);
          if (p.requires_grad) p.adjoint += g.middleRows(r, p.rows);
          r += p.rows;
        }
        break;
      }
      case OpKind::kSlice:
        op(0).adjoint.block(n.row0, n.col0, n.rows, n.cols) += g;
        break;
      case OpKind::kSigmoid:
        op(0).adjoint.array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case OpKind::kTanh:
        op(0).adjoint.array() += g.array() * (1.0 - n.value.array().square());
        break;
      case OpKind::kAbs:
        op(0).adjoint += g.cwiseProduct(op(0).value.unaryExpr(&sign));
        break;
      case OpKind::kRowNorm: {
        Node& a = op(0);
        for (Eigen::Index k = 0; k < n.cols; ++k) {
          for (Eigen::Index i = 0; i < n.rows; ++i) {
            const double norm = n.value(i, k);
            if (norm == 0.0) continue;
            a.adjoint.row(i).segment(k * n.group, n.group) +=
                (g(i, k) / norm) * a.value.row(i).segment(k * n.group, n.group);
          }
        }
        break;
      }
      case OpKind::kSquaredFrobenius:
        op(0).adjoint += (2.0 * g(0, 0)) * op(0).value;
        break;
      case OpKind::kL11Norm:
        op(0).adjoint += g(0, 0) * op(0).value.unaryExpr(&sign);
        break;
      case OpKind::kSum:
        op(0).adjoint.array() += g(0, 0);
        break;
      case OpKind::kExternal:
        op(0).adjoint += g(0, 0) * n.external_grad;
        break;
    }
  }
}

double Graph::evaluate(Expr root, const ParameterSet& params) {
  const Node& r = node(root);
  if (r.rows != 1 || r.cols != 1) {
    throw ShapeError("autodiff evaluate: root must be 1x1, got " + shape_str(r.rows, r.cols));
  }
  bind(params);
  forward(root.id_);
  return nodes_[root.id_].value(0, 0);
}

double Graph::value_and_gradients(Expr root, const ParameterSet& params, ParameterSet& grads) {
  const double v = evaluate(root, params);
  if (!grads.same_layout(params)) grads = params.zeros_like();
  if (!nodes_[root.id_].requires_grad) {
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i].setZero();
    return v;
  }
  backward(root.id_);
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i].setZero();
  for (int id : parameter_nodes_) {
    if (id > root.id_) continue;
    const Node& n = nodes_[id];
    grads[n.name] = n.adjoint;
  }
  return v;
}

ParameterSet Graph::gradients(Expr root, const ParameterSet& params) {
  ParameterSet grads = params.zeros_like();
  value_and_gradients(root, params, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Free functions

Expr operator+(Expr a, Expr b) { return a.graph().add(a, b); }
Expr operator-(Expr a, Expr b) { return a.graph().sub(a, b); }
Expr operator*(double factor, Expr a) { return a.graph().scale(a, factor); }
Expr matmul(Expr a, Expr b) { return a.graph().matmul(a, b); }
Expr hadamard(Expr a, Expr b) { return a.graph().hadamard(a, b); }
Expr sigmoid(Expr a) { return a.graph().sigmoid(a); }
Expr abs(Expr a) { return a.graph().abs(a); }
Expr sum(Expr a) { return a.graph().sum(a); }
Expr squared_frobenius(Expr a) { return a.graph().squared_frobenius(a); }
Expr l11_norm(Expr a) { return a.graph().l11_norm(a); }
Expr slice(Expr a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) {
  return a.graph().slice(a, row, col, rows, cols);
}

Expr add_all(std::span<const Expr> terms) {
  if (terms.empty()) throw ShapeError("autodiff add_all: no terms");
  Expr total = terms[0];
  for (std::size_t k = 1; k < terms.size(); ++k) total = total + terms[k];
  return total;
}

// ---------------------------------------------------------------------------
// Finite differences

FiniteDifferenceReport finite_difference_check(Graph& graph, Expr root, const ParameterSet& params,
                                               double h, const FiniteDifferenceOptions& options) {
  if (!(h > 0.0)) throw ConfigError("finite_difference_check: h must be positive");
  FiniteDifferenceReport report;
  const ParameterSet analytic = graph.gradients(root, params);

  struct Entry {
    std::size_t param;
    Eigen::Index index;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(params.num_entries()));
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index k = 0; k < params[p].size(); ++k) entries.push_back({p, k});
  }
  if (static_cast<Eigen::Index>(entries.size()) > options.max_entries) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(static_cast<std::size_t>(options.max_entries));
  }

  ParameterSet probe = params;
  const double f0 = graph.evaluate(root, probe);
  for (const Entry& e : entries) {
    double& x = probe[e.param].reshaped()(e.index);
    const double saved = x;
    x = saved + h;
    const double f_plus = graph.evaluate(root, probe);
    x = saved - h;
    const double f_minus = graph.evaluate(root, probe);
    x = saved;

    const double right = (f_plus - f0) / h;
    const double left = (f0 - f_minus) / h;
    const double fd = (f_plus - f_minus) / (2.0 * h);
    if (std::abs(right - left) > options.kink_tolerance * std::max(1.0, std::abs(fd))) {
      ++report.skipped;
      continue;
    }
    const double an = analytic[e.param].reshaped()(e.index);
    const double denom = std::max({options.error_floor, std::abs(fd), std::abs(an)});
    const double err = std::abs(fd - an) / denom;
    ++report.checked;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_parameter = e.param;
      report.worst_entry = e.index;
    }
  }
  return report;
}

}  // namespace mgcsl::ad
