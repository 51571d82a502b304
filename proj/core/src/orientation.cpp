#include "mgcsl/orientation.hpp"

#include <cmath>
#include <random>

#include "json_util.hpp"
#include "mgcsl/errors.hpp"

namespace mgcsl::orient {

using ad::Expr;
using nlohmann::json;

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(std::max(1.0, fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

void check_shape(const MlpBank& b) {
  if (b.d < 1 || b.q < 0 || b.hidden < 1) throw ConfigError("MlpBank: need d >= 1, q >= 0, hidden >= 1");
}

std::string indexed(const char* base, int i) { return std::string(base) + "[" + std::to_string(i) + "]"; }

// Column block j of a (d*hidden) x d matrix holds ones in rows j*hidden..(j+1)*hidden-1.
Matrix block_sum_matrix(int d, int hidden) {
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(d) * hidden, d);
  for (int j = 0; j < d; ++j) g.block(static_cast<Eigen::Index>(j) * hidden, j, hidden, 1).setOnes();
  return g;
}

// Per-target column sums of |W_j| row by row: (d+q) x d.
Matrix row_mass(const MlpBank& b) {
  Matrix r(b.d + b.q, b.d);
  for (int j = 0; j < b.d; ++j) r.col(j) = b.first_layer[j].cwiseAbs().rowwise().sum();
  return r;
}

}  // namespace

MlpBank MlpBank::zeros(int d, int q, int hidden) {
  MlpBank b;
  b.d = d;
  b.q = q;
  b.hidden = hidden;
  check_shape(b);
  b.first_layer.assign(d, Matrix::Zero(d + q, hidden));
  b.first_bias.assign(d, Matrix::Zero(1, hidden));
  b.second_layer.assign(d, Matrix::Zero(hidden, 1));
  b.second_bias.assign(d, Matrix::Zero(1, 1));
  return b;
}

MlpBank MlpBank::random(int d, int q, int hidden, std::uint64_t seed) {
  MlpBank b = zeros(d, q, hidden);
  std::mt19937_64 rng(seed);
  for (int j = 0; j < d; ++j) {
    b.first_layer[j] = uniform(d + q, hidden, d + q - 1, rng);
    b.second_layer[j] = uniform(hidden, 1, hidden, rng);
  }
  b.enforce_self_pin();
  return b;
}

void MlpBank::enforce_self_pin() {
  for (int j = 0; j < d; ++j) first_layer[j].row(j).setZero();
}

bool MlpBank::self_pin_holds() const {
  for (int j = 0; j < d; ++j) {
    if (!first_layer[j].row(j).isZero(0.0)) return false;
  }
  return true;
}

void MlpBank::export_to(ad::ParameterSet& params, bool sign_split) const {
  for (int j = 0; j < d; ++j) {
    if (sign_split) {
      params.add(indexed("mlp.w1p", j), first_layer[j].cwiseMax(0.0));
      params.add(indexed("mlp.w1n", j), (-first_layer[j]).cwiseMax(0.0));
    } else {
      params.add(indexed("mlp.w1", j), first_layer[j]);
    }
    params.add(indexed("mlp.b1", j), first_bias[j]);
    params.add(indexed("mlp.w2", j), second_layer[j]);
    params.add(indexed("mlp.b2", j), second_bias[j]);
  }
}

void MlpBank::import_from(const ad::ParameterSet& params) {
  auto take = [&](const std::string& name, Matrix& dst) {
    const Matrix& src = params[name];
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw ShapeError("MlpBank::import_from: '" + name + "' has the wrong shape");
    }
    dst = src;
  };
  for (int j = 0; j < d; ++j) {
    if (params.contains(indexed("mlp.w1p", j))) {
      Matrix pos = first_layer[j], neg = first_layer[j];
      take(indexed("mlp.w1p", j), pos);
      take(indexed("mlp.w1n", j), neg);
      first_layer[j] = pos - neg;
    } else {
      take(indexed("mlp.w1", j), first_layer[j]);
    }
    take(indexed("mlp.b1", j), first_bias[j]);
    take(indexed("mlp.w2", j), second_layer[j]);
    take(indexed("mlp.b2", j), second_bias[j]);
  }
}

bool MlpBank::all_finite() const {
  for (int j = 0; j < d; ++j) {
    if (!first_layer[j].allFinite() || !first_bias[j].allFinite() || !second_layer[j].allFinite() ||
        !second_bias[j].allFinite()) {
      return false;
    }
  }
  return true;
}

Matrix mlp_bank_forward(const Matrix& X, const Matrix& Z, const MlpBank& bank) {
  check_shape(bank);
  if (X.cols() != bank.d || Z.cols() != bank.q || X.rows() != Z.rows()) {
    throw ShapeError("mlp_bank_forward: expected X n x " + std::to_string(bank.d) + " and Z n x " +
                     std::to_string(bank.q));
  }
  Matrix inputs(X.rows(), bank.d + bank.q);
  inputs << X, Z;
  Matrix out(X.rows(), bank.d);
  for (int j = 0; j < bank.d; ++j) {
    Matrix w = bank.first_layer[j];
    w.row(j).setZero();
    Eigen::ArrayXXd pre = ((inputs * w).rowwise() + bank.first_bias[j].row(0)).array();
    const Matrix h = bank.activation == ad::Activation::kTanh ? Matrix(pre.tanh())
                                                              : Matrix(1.0 / (1.0 + (-pre).exp()));
    out.col(j) = (h * bank.second_layer[j]).array() + bank.second_bias[j](0, 0);
  }
  return out;
}

Matrix wam_micro(const MlpBank& bank, const Matrix& A) {
  check_shape(bank);
  if (A.rows() != bank.d || A.cols() != bank.q) throw ShapeError("wam_micro: A must be d x q");
  Matrix C(bank.d, bank.d);
  for (int j = 0; j < bank.d; ++j) {
    const Matrix& w = bank.first_layer[j];
    const Matrix combined = w.topRows(bank.d) + A * w.bottomRows(bank.q);
    C.col(j) = combined.rowwise().norm();
  }
  return C;
}

Matrix wam_multigran(const MlpBank& bank) {
  check_shape(bank);
  Matrix S(bank.d + bank.q, bank.d);
  for (int j = 0; j < bank.d; ++j) S.col(j) = bank.first_layer[j].rowwise().norm();
  return S;
}

double redundancy_penalty(const MlpBank& bank, const Matrix& A) {
  check_shape(bank);
  if (A.rows() != bank.d || A.cols() != bank.q) throw ShapeError("redundancy_penalty: A must be d x q");
  const Matrix mass = row_mass(bank);
  const Matrix macro_influence = A.cwiseAbs() * mass.bottomRows(bank.q);
  return macro_influence.cwiseProduct(mass.topRows(bank.d)).sum();
}

double orientation_loss(const Matrix& X, const Matrix& Xhat, const MlpBank& bank, const Matrix& A,
                        double alpha2) {
  if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols()) {
    throw ShapeError("orientation_loss: X and X-hat shapes differ");
  }
  double l1 = 0.0, frob = 0.0;
  for (int j = 0; j < bank.d; ++j) {
    l1 += bank.first_layer[j].cwiseAbs().sum();
    frob += bank.first_layer[j].squaredNorm() + bank.second_layer[j].squaredNorm();
  }
  const double n = static_cast<double>(std::max<Eigen::Index>(1, X.rows()));
  return (X - Xhat).squaredNorm() / (2.0 * n) + redundancy_penalty(bank, A) +
         alpha2 * (l1 + 0.5 * frob);
}

BankNodes build_bank(ad::Graph& g, const MlpBank& shape, bool pin_self, FirstLayerForm form) {
  check_shape(shape);
  const int d = shape.d, q = shape.q, h = shape.hidden;
  BankNodes b;
  std::vector<Expr> pos, neg;
  for (int j = 0; j < d; ++j) {
    if (form == FirstLayerForm::kSignSplit) {
      pos.push_back(g.parameter(indexed("mlp.w1p", j), d + q, h));
      neg.push_back(g.parameter(indexed("mlp.w1n", j), d + q, h));
      b.first_layer.push_back(pos.back() - neg.back());
    } else {
      b.first_layer.push_back(g.parameter(indexed("mlp.w1", j), d + q, h));
    }
    b.first_bias.push_back(g.parameter(indexed("mlp.b1", j), 1, h));
    b.second_layer.push_back(g.parameter(indexed("mlp.w2", j), h, 1));
    b.second_bias.push_back(g.parameter(indexed("mlp.b2", j), 1, 1));
  }
  b.first_all = g.concat_cols(b.first_layer);
  if (form == FirstLayerForm::kSignSplit) b.first_mass = g.concat_cols(pos) + g.concat_cols(neg);
  if (pin_self) {
    Matrix mask = Matrix::Ones(d + q, static_cast<Eigen::Index>(d) * h);
    for (int j = 0; j < d; ++j) mask.block(j, static_cast<Eigen::Index>(j) * h, 1, h).setZero();
    Expr m = g.constant(std::move(mask));
    b.first_all = g.hadamard(b.first_all, m);
    if (b.first_mass.valid()) b.first_mass = g.hadamard(b.first_mass, m);
  }
  if (!b.first_mass.valid()) b.first_mass = g.abs(b.first_all);
  g.set_label(b.first_all, "first-layer weights");
  b.second_all = g.concat_rows(b.second_layer);
  return b;
}

void build_bank_forward(ad::Graph& g, BankNodes& bank, Expr inputs, Expr ones, const MlpBank& shape) {
  const int d = shape.d, h = shape.hidden;
  if (inputs.cols() != d + shape.q) throw ShapeError("build_bank_forward: inputs must be n x (d+q)");
  const Eigen::Index n = inputs.rows();
  Expr pre = g.matmul(inputs, bank.first_all) + g.matmul(ones, g.concat_cols(bank.first_bias));
  Expr hidden = g.activate(pre, shape.activation);
  std::vector<Expr> columns;
  columns.reserve(d);
  for (int j = 0; j < d; ++j) {
    columns.push_back(g.matmul(g.slice(hidden, 0, static_cast<Eigen::Index>(j) * h, n, h),
                               bank.second_layer[j]));
  }
  bank.Xhat = g.concat_cols(columns) + g.matmul(ones, g.concat_cols(bank.second_bias));
  g.set_label(bank.Xhat, "mlp predictions");
}

Expr wam_micro(ad::Graph& g, const BankNodes& bank, Expr A, const MlpBank& shape) {
  const int d = shape.d, q = shape.q;
  const Eigen::Index width = static_cast<Eigen::Index>(d) * shape.hidden;
  Expr micro = g.slice(bank.first_all, 0, 0, d, width);
  Expr macro = g.slice(bank.first_all, d, 0, q, width);
  Expr C = g.row_norm(micro + g.matmul(A, macro), shape.hidden);
  g.set_label(C, "micro adjacency");
  return C;
}

Expr redundancy_penalty(ad::Graph& g, const BankNodes& bank, Expr A, const MlpBank& shape) {
  const int d = shape.d, q = shape.q;
  Expr mass = g.matmul(bank.first_mass, g.constant(block_sum_matrix(d, shape.hidden)));
  Expr influence = g.matmul(g.abs(A), g.slice(mass, d, 0, q, d));
  Expr penalty = g.sum(g.hadamard(influence, g.slice(mass, 0, 0, d, d)));
  g.set_label(penalty, "redundancy penalty");
  return penalty;
}

Expr orientation_loss(ad::Graph& g, const BankNodes& bank, Expr X, Expr A, const MlpBank& shape,
                      double alpha2) {
  if (!bank.Xhat.valid()) throw ConfigError("orientation_loss: bank forward pass not built");
  const double n = static_cast<double>(X.rows());
  Expr fit = g.scale(g.squared_frobenius(X - bank.Xhat), 1.0 / (2.0 * n));
  g.set_label(fit, "orientation reconstruction");
  Expr red = redundancy_penalty(g, bank, A, shape);
  Expr reg = g.scale(g.sum(bank.first_mass) +
                         g.scale(g.squared_frobenius(bank.first_all) + g.squared_frobenius(bank.second_all), 0.5),
                     alpha2);
  g.set_label(reg, "mlp weight penalty");
  Expr loss = fit + red + reg;
  g.set_label(loss, "orientation loss");
  return loss;
}

std::string to_json(const MlpBank& bank, std::uint64_t seed) {
  ad::ParameterSet params;
  bank.export_to(params);
  json j;
  j["kind"] = "mlp_bank";
  j["d"] = bank.d;
  j["q"] = bank.q;
  j["hidden"] = bank.hidden;
  j["activation"] = bank.activation == ad::Activation::kTanh ? "tanh" : "sigmoid";
  j["seed"] = seed;
  json arrays = json::array();
  for (std::size_t k = 0; k < params.size(); ++k) {
    arrays.push_back({{"name", params.name(k)},
                      {"shape", {params[k].rows(), params[k].cols()}},
                      {"values", detail::matrix_to_json(params[k])}});
  }
  j["parameters"] = std::move(arrays);
  return j.dump(1);
}

MlpBank from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    MlpBank b = MlpBank::zeros(j.at("d").get<int>(), j.at("q").get<int>(), j.at("hidden").get<int>());
    b.activation = j.value("activation", "sigmoid") == "tanh" ? ad::Activation::kTanh
                                                              : ad::Activation::kSigmoid;
    ad::ParameterSet params;
    for (const auto& p : j.at("parameters")) {
      const auto shape = p.at("shape").get<std::vector<Eigen::Index>>();
      params.add(p.at("name").get<std::string>(), detail::matrix_from_json(p.at("values"), shape.at(1)));
    }
    b.import_from(params);
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("MLP bank checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("MLP bank checkpoint: ") + e.what());
  }
}

}  // namespace mgcsl::orient
