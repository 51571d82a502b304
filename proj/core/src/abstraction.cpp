#include "mgcsl/abstraction.hpp"

#include <cmath>
#include <random>

#include "json_util.hpp"
#include "mgcsl/errors.hpp"

namespace mgcsl::sae {

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

Eigen::ArrayXXd act(const Eigen::ArrayXXd& a, ad::Activation kind) {
  if (kind == ad::Activation::kTanh) return a.tanh();
  return 1.0 / (1.0 + (-a).exp());
}

void check_shape(const SaeModel& m) {
  if (m.d < 1 || m.hidden < 1 || m.q < 0) {
    throw ConfigError("SaeModel: need d >= 1, hidden >= 1, q >= 0");
  }
}

std::string indexed(const char* base, int i) { return std::string(base) + "[" + std::to_string(i) + "]"; }

}  // namespace

int default_hidden(int d) { return std::max(1, static_cast<int>(std::lround(0.75 * d))); }

SaeModel SaeModel::zeros(int d, int hidden, int q) {
  SaeModel m;
  m.d = d;
  m.hidden = hidden;
  m.q = q;
  check_shape(m);
  m.enc1.assign(d, Matrix::Zero(1, hidden));
  m.enc1_bias.assign(d, Matrix::Zero(1, hidden));
  m.enc2.assign(d, Matrix::Zero(hidden, q));
  m.enc2_bias.assign(d, Matrix::Zero(1, q));
  m.dec1 = Matrix::Zero(q, hidden);
  m.dec1_bias = Matrix::Zero(1, hidden);
  m.dec2 = Matrix::Zero(hidden, d);
  m.dec2_bias = Matrix::Zero(1, d);
  return m;
}

SaeModel SaeModel::random(int d, int hidden, int q, std::uint64_t seed) {
  SaeModel m = zeros(d, hidden, q);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < d; ++i) {
    m.enc1[i] = uniform(1, hidden, 1.0, rng);
    m.enc2[i] = uniform(hidden, q, hidden, rng);
  }
  m.dec1 = uniform(q, hidden, q, rng);
  m.dec2 = uniform(hidden, d, hidden, rng);
  return m;
}

void SaeModel::export_to(ad::ParameterSet& params) const {
  for (int i = 0; i < d; ++i) {
    params.add(indexed("sae.enc1", i), enc1[i]);
    params.add(indexed("sae.enc1_bias", i), enc1_bias[i]);
    params.add(indexed("sae.enc2", i), enc2[i]);
    params.add(indexed("sae.enc2_bias", i), enc2_bias[i]);
  }
  params.add("sae.dec1", dec1);
  params.add("sae.dec1_bias", dec1_bias);
  params.add("sae.dec2", dec2);
  params.add("sae.dec2_bias", dec2_bias);
}

void SaeModel::import_from(const ad::ParameterSet& params) {
  auto take = [&](const std::string& name, Matrix& dst) {
    const Matrix& src = params[name];
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw ShapeError("SaeModel::import_from: '" + name + "' has the wrong shape");
    }
    dst = src;
  };
  for (int i = 0; i < d; ++i) {
    take(indexed("sae.enc1", i), enc1[i]);
    take(indexed("sae.enc1_bias", i), enc1_bias[i]);
    take(indexed("sae.enc2", i), enc2[i]);
    take(indexed("sae.enc2_bias", i), enc2_bias[i]);
  }
  take("sae.dec1", dec1);
  take("sae.dec1_bias", dec1_bias);
  take("sae.dec2", dec2);
  take("sae.dec2_bias", dec2_bias);
}

bool SaeModel::all_finite() const {
  for (int i = 0; i < d; ++i) {
    if (!enc1[i].allFinite() || !enc1_bias[i].allFinite() || !enc2[i].allFinite() ||
        !enc2_bias[i].allFinite()) {
      return false;
    }
  }
  return dec1.allFinite() && dec1_bias.allFinite() && dec2.allFinite() && dec2_bias.allFinite();
}

SaeOutput sae_forward(const Matrix& X, const SaeModel& m) {
  check_shape(m);
  if (X.cols() != m.d) {
    throw ShapeError("sae_forward: X has " + std::to_string(X.cols()) + " columns, model expects " +
                     std::to_string(m.d));
  }
  const Eigen::Index n = X.rows();
  SaeOutput out;
  out.Z = Matrix::Zero(n, m.q);
  for (int i = 0; i < m.d; ++i) {
    Matrix h = act((X.col(i) * m.enc1[i]).rowwise() + m.enc1_bias[i].row(0), m.activation);
    out.Z += act((h * m.enc2[i]).rowwise() + m.enc2_bias[i].row(0), m.activation).matrix();
  }
  Matrix h = act((out.Z * m.dec1).rowwise() + m.dec1_bias.row(0), m.activation);
  out.Y = act((h * m.dec2).rowwise() + m.dec2_bias.row(0), m.activation);
  return out;
}

Matrix contribution_matrix(const SaeModel& m) {
  check_shape(m);
  Matrix A(m.d, m.q);
  for (int i = 0; i < m.d; ++i) A.row(i) = m.enc1[i].cwiseAbs() * m.enc2[i].cwiseAbs();
  return A;
}

double abstraction_loss(const Matrix& X, const SaeModel& m, double alpha1) {
  const SaeOutput out = sae_forward(X, m);
  double l1 = 0.0;
  for (int i = 0; i < m.d; ++i) l1 += m.enc1[i].cwiseAbs().sum() + m.enc2[i].cwiseAbs().sum();
  return (X - out.Y).squaredNorm() / (2.0 * static_cast<double>(X.rows())) + alpha1 * l1;
}

SaeNodes build_sae(ad::Graph& g, Expr X, Expr ones, const SaeModel& shape) {
  check_shape(shape);
  if (X.cols() != shape.d) throw ShapeError("build_sae: data node has the wrong column count");
  const int d = shape.d, h = shape.hidden, q = shape.q;
  const Eigen::Index n = X.rows();
  SaeNodes s;
  std::vector<Expr> encoded, paths, l1_terms;
  for (int i = 0; i < d; ++i) {
    s.enc1.push_back(g.parameter(indexed("sae.enc1", i), 1, h));
    s.enc1_bias.push_back(g.parameter(indexed("sae.enc1_bias", i), 1, h));
    s.enc2.push_back(g.parameter(indexed("sae.enc2", i), h, q));
    s.enc2_bias.push_back(g.parameter(indexed("sae.enc2_bias", i), 1, q));

    Expr xi = g.slice(X, 0, i, n, 1);
    Expr hidden = g.activate(g.matmul(xi, s.enc1[i]) + g.matmul(ones, s.enc1_bias[i]), shape.activation);
    encoded.push_back(
        g.activate(g.matmul(hidden, s.enc2[i]) + g.matmul(ones, s.enc2_bias[i]), shape.activation));
    paths.push_back(g.matmul(g.abs(s.enc1[i]), g.abs(s.enc2[i])));
    l1_terms.push_back(g.l11_norm(s.enc1[i]));
    l1_terms.push_back(g.l11_norm(s.enc2[i]));
  }
  s.dec1 = g.parameter("sae.dec1", q, h);
  s.dec1_bias = g.parameter("sae.dec1_bias", 1, h);
  s.dec2 = g.parameter("sae.dec2", h, d);
  s.dec2_bias = g.parameter("sae.dec2_bias", 1, d);

  s.Z = ad::add_all(encoded);
  g.set_label(s.Z, "macro representation");
  Expr hidden = g.activate(g.matmul(s.Z, s.dec1) + g.matmul(ones, s.dec1_bias), shape.activation);
  s.Y = g.activate(g.matmul(hidden, s.dec2) + g.matmul(ones, s.dec2_bias), shape.activation);
  g.set_label(s.Y, "reconstruction");
  s.A = g.concat_rows(paths);
  g.set_label(s.A, "contribution matrix");
  s.encoder_l1 = ad::add_all(l1_terms);
  return s;
}

Expr abstraction_loss(ad::Graph& g, const SaeNodes& nodes, Expr X, double alpha1) {
  const double n = static_cast<double>(X.rows());
  Expr fit = g.scale(g.squared_frobenius(X - nodes.Y), 1.0 / (2.0 * n));
  g.set_label(fit, "abstraction reconstruction");
  Expr sparse = g.scale(nodes.encoder_l1, alpha1);
  g.set_label(sparse, "encoder sparsity");
  Expr loss = fit + sparse;
  g.set_label(loss, "abstraction loss");
  return loss;
}

std::string to_json(const SaeModel& m, std::uint64_t seed) {
  ad::ParameterSet params;
  m.export_to(params);
  json j;
  j["kind"] = "sae";
  j["d"] = m.d;
  j["hidden"] = m.hidden;
  j["q"] = m.q;
  j["activation"] = m.activation == ad::Activation::kTanh ? "tanh" : "sigmoid";
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

SaeModel from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SaeModel m = SaeModel::zeros(j.at("d").get<int>(), j.at("hidden").get<int>(), j.at("q").get<int>());
    m.activation = j.value("activation", "sigmoid") == "tanh" ? ad::Activation::kTanh
                                                              : ad::Activation::kSigmoid;
    ad::ParameterSet params;
    for (const auto& p : j.at("parameters")) {
      const auto shape = p.at("shape").get<std::vector<Eigen::Index>>();
      params.add(p.at("name").get<std::string>(), detail::matrix_from_json(p.at("values"), shape.at(1)));
    }
    m.import_from(params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("SAE checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("SAE checkpoint: ") + e.what());
  }
}

}  // namespace mgcsl::sae
