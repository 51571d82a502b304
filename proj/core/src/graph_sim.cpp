#include "mgcsl/graph_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mgcsl/errors.hpp"

namespace mgcsl::sim {

// ---------------------------------------------------------------------------
// GroundTruthGraph

Eigen::MatrixXi GroundTruthGraph::adjacency() const {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(d, d);
  for (const auto& [s, t] : edges) a(s, t) = 1;
  return a;
}

std::vector<std::vector<int>> GroundTruthGraph::parents() const {
  std::vector<std::vector<int>> pa(static_cast<std::size_t>(d));
  for (const auto& [s, t] : edges) pa[static_cast<std::size_t>(t)].push_back(s);
  for (auto& p : pa) std::sort(p.begin(), p.end());
  return pa;
}

std::optional<std::vector<int>> GroundTruthGraph::topological_order() const {
  std::vector<int> indegree(static_cast<std::size_t>(d), 0);
  std::vector<std::vector<int>> children(static_cast<std::size_t>(d));
  for (const auto& [s, t] : edges) {
    children[static_cast<std::size_t>(s)].push_back(t);
    ++indegree[static_cast<std::size_t>(t)];
  }
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(d));
  std::vector<int> ready;
  for (int v = d - 1; v >= 0; --v) {
    if (indegree[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
  }
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int c : children[static_cast<std::size_t>(v)]) {
      if (--indegree[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
    }
  }
  if (static_cast<int>(order.size()) != d) return std::nullopt;
  return order;
}

void GroundTruthGraph::validate() const {
  if (d < 0) throw ConfigError("graph: negative node count");
  std::set<std::pair<int, int>> seen;
  for (const auto& [s, t] : edges) {
    if (s < 0 || s >= d || t < 0 || t >= d) {
      throw ConfigError("graph: edge (" + std::to_string(s) + "," + std::to_string(t) +
                        ") out of range for d=" + std::to_string(d));
    }
    if (!seen.insert({s, t}).second) {
      throw ConfigError("graph: duplicate edge (" + std::to_string(s) + "," + std::to_string(t) +
                        ")");
    }
  }
  if (!is_acyclic()) throw ConfigError("graph: contains a directed cycle");
  std::set<int> used;
  for (const MacroSpec& m : macros) {
    if (m.members.empty()) {
      throw ConfigError("graph: macro " + std::to_string(m.id) + " has no members");
    }
    for (int v : m.members) {
      if (v < 0 || v >= d) throw ConfigError("graph: macro member out of range");
      if (!used.insert(v).second) {
        throw ConfigError("graph: micro " + std::to_string(v) + " belongs to two macros");
      }
    }
  }
}

void GroundTruthGraph::normalize() { std::sort(edges.begin(), edges.end()); }

std::vector<std::string> default_columns(Eigen::Index d) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

// ---------------------------------------------------------------------------
// Random DAGs

GroundTruthGraph gen_er_dag(int d, double degree, std::uint64_t seed) {
  if (d < 1) throw ConfigError("gen_er_dag: d must be >= 1");
  if (!(degree >= 0.0)) throw ConfigError("gen_er_dag: degree must be >= 0");
  if (degree > d - 1) {
    throw ConfigError("gen_er_dag: degree " + std::to_string(degree) + " exceeds d-1 = " +
                      std::to_string(d - 1));
  }
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const double p = d > 1 ? degree / (d - 1) : 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GroundTruthGraph g;
  g.d = d;
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      if (unif(rng) < p) g.edges.emplace_back(order[a], order[b]);
    }
  }
  g.normalize();
  return g;
}

GroundTruthGraph gen_sf_dag(int d, double degree, std::uint64_t seed) {
  if (d < 2) throw ConfigError("gen_sf_dag: d must be >= 2");
  if (!(degree >= 0.0)) throw ConfigError("gen_sf_dag: degree must be >= 0");
  std::mt19937_64 rng(seed);
  const int per_node = static_cast<int>(std::lround(degree));

  std::vector<double> node_degree(static_cast<std::size_t>(d), 0.0);
  std::vector<std::pair<int, int>> raw;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 1; k < d; ++k) {
    const int m = std::min(per_node, k);
    std::vector<char> taken(static_cast<std::size_t>(k), 0);
    for (int draw = 0; draw < m; ++draw) {
      double total = 0.0;
      for (int v = 0; v < k; ++v) {
        if (!taken[static_cast<std::size_t>(v)]) total += node_degree[static_cast<std::size_t>(v)] + 1.0;
      }
      double r = unif(rng) * total;
      int pick = -1;
      for (int v = 0; v < k; ++v) {
        if (taken[static_cast<std::size_t>(v)]) continue;
        pick = v;
        r -= node_degree[static_cast<std::size_t>(v)] + 1.0;
        if (r < 0.0) break;
      }
      taken[static_cast<std::size_t>(pick)] = 1;
      raw.emplace_back(pick, k);
    }
    for (int v = 0; v < k; ++v) {
      if (taken[static_cast<std::size_t>(v)]) {
        node_degree[static_cast<std::size_t>(v)] += 1.0;
        node_degree[static_cast<std::size_t>(k)] += 1.0;
      }
    }
  }

  std::vector<int> label(static_cast<std::size_t>(d));
  std::iota(label.begin(), label.end(), 0);
  std::shuffle(label.begin(), label.end(), rng);
  GroundTruthGraph g;
  g.d = d;
  for (const auto& [s, t] : raw) {
    g.edges.emplace_back(label[static_cast<std::size_t>(s)], label[static_cast<std::size_t>(t)]);
  }
  g.normalize();
  return g;
}

// ---------------------------------------------------------------------------
// Gaussian-process SEM

namespace {

Vector standard_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

// One function draw from GP(0, RBF(length_scale)) evaluated at the rows of
// `inputs`.
Vector gp_draw(const Matrix& inputs, const SemOptions& opt, std::mt19937_64& rng) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index k = inputs.cols();
  if (opt.random_features) {
    const int features = opt.num_features;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    Matrix omega(k, features);
    for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = normal(rng) / opt.length_scale;
    Eigen::RowVectorXd offset(features);
    for (int f = 0; f < features; ++f) offset(f) = phase(rng);
    Vector weights = standard_normal(features, rng);
    Matrix proj = inputs * omega;
    proj.rowwise() += offset;
    return std::sqrt(2.0 / features) * (proj.array().cos().matrix() * weights);
  }

  const double inv = 1.0 / (opt.length_scale * opt.length_scale);
  Matrix kernel(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    kernel(a, a) = 1.0;
    for (Eigen::Index b = 0; b < a; ++b) {
      const double r2 = (inputs.row(a) - inputs.row(b)).squaredNorm();
      kernel(a, b) = kernel(b, a) = std::exp(-0.5 * r2 * inv);
    }
  }
  const Matrix lower = linalg::cholesky(kernel);
  return lower.triangularView<Eigen::Lower>() * standard_normal(n, rng);
}

std::string sem_provenance(const GroundTruthGraph& g, int n, const SemOptions& opt,
                           std::uint64_t seed) {
  std::ostringstream os;
  os << "{\"generator\":\"gp_sem\",\"d\":" << g.d << ",\"edges\":" << g.edges.size()
     << ",\"n\":" << n << ",\"additive\":" << (opt.additive ? "true" : "false")
     << ",\"noise_scale\":" << opt.noise_scale << ",\"length_scale\":" << opt.length_scale
     << ",\"random_features\":" << (opt.random_features ? opt.num_features : 0)
     << ",\"seed\":" << seed << "}";
  return os.str();
}

}  // namespace

Dataset sample_gp_sem(const GroundTruthGraph& g, int n, const SemOptions& options,
                      std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_gp_sem: n must be >= 1");
  if (!(options.noise_scale >= 0.0)) throw ConfigError("sample_gp_sem: noise_scale must be >= 0");
  if (!(options.length_scale > 0.0)) throw ConfigError("sample_gp_sem: length_scale must be > 0");
  if (options.random_features && options.num_features < 1) {
    throw ConfigError("sample_gp_sem: num_features must be >= 1");
  }
  const auto order = g.topological_order();
  if (!order) throw ConfigError("sample_gp_sem: graph contains a directed cycle");

  std::mt19937_64 rng(seed);
  const auto parents = g.parents();
  Matrix X = Matrix::Zero(n, g.d);
  for (int v : *order) {
    const auto& pa = parents[static_cast<std::size_t>(v)];
    Vector f = Vector::Zero(n);
    if (!pa.empty()) {
      Matrix inputs(n, static_cast<Eigen::Index>(pa.size()));
      for (std::size_t k = 0; k < pa.size(); ++k) inputs.col(static_cast<Eigen::Index>(k)) = X.col(pa[k]);
      inputs = linalg::standardize_columns(inputs);
      if (options.additive) {
        for (Eigen::Index k = 0; k < inputs.cols(); ++k) f += gp_draw(inputs.col(k), options, rng);
      } else {
        f = gp_draw(inputs, options, rng);
      }
    }
    X.col(v) = f + options.noise_scale * standard_normal(n, rng);
  }

  Dataset ds;
  ds.X = std::move(X);
  ds.columns = default_columns(g.d);
  ds.provenance = sem_provenance(g, n, options, seed);
  ds.truth = g;
  return ds;
}

// ---------------------------------------------------------------------------
// Macro decomposition

Dataset decompose_macro(const Dataset& ds, int n_macro, int micro_per_macro, std::uint64_t seed,
                        const MacroDecomposeOptions& options) {
  const int d = static_cast<int>(ds.d());
  if (n_macro < 0 || n_macro > d) {
    throw ConfigError("decompose_macro: n_macro must lie in [0, " + std::to_string(d) + "]");
  }
  if (micro_per_macro < 1) throw ConfigError("decompose_macro: micro_per_macro must be >= 1");
  if (options.hidden_units < 1) throw ConfigError("decompose_macro: hidden_units must be >= 1");
  if (n_macro == 0) return ds;

  std::mt19937_64 rng(seed);
  std::vector<int> pool(static_cast<std::size_t>(d));
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<int> selected(pool.begin(), pool.begin() + n_macro);

  std::vector<int> new_index(static_cast<std::size_t>(d), -1);
  std::vector<int> macro_of(static_cast<std::size_t>(d), -1);
  for (int k = 0; k < n_macro; ++k) macro_of[static_cast<std::size_t>(selected[static_cast<std::size_t>(k)])] = k;
  int next = 0;
  for (int v = 0; v < d; ++v) {
    if (macro_of[static_cast<std::size_t>(v)] < 0) new_index[static_cast<std::size_t>(v)] = next++;
  }
  const int kept = next;
  const int width = kept + n_macro * micro_per_macro;
  auto members_of = [&](int k) {
    std::vector<int> m(static_cast<std::size_t>(micro_per_macro));
    std::iota(m.begin(), m.end(), kept + k * micro_per_macro);
    return m;
  };

  Matrix X(ds.n(), width);
  std::vector<std::string> columns(static_cast<std::size_t>(width));
  const auto base_columns = ds.columns.size() == static_cast<std::size_t>(d) ? ds.columns
                                                                             : default_columns(d);
  for (int v = 0; v < d; ++v) {
    const int nv = new_index[static_cast<std::size_t>(v)];
    if (nv < 0) continue;
    X.col(nv) = ds.X.col(v);
    columns[static_cast<std::size_t>(nv)] = base_columns[static_cast<std::size_t>(v)];
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  const int hidden = options.hidden_units;
  const double noise_sd = std::sqrt(options.noise_variance);
  for (int k = 0; k < n_macro; ++k) {
    const int v = selected[static_cast<std::size_t>(k)];
    const Matrix z = linalg::standardize_columns(ds.X.col(v));
    Eigen::RowVectorXd w1(hidden), b1(hidden);
    Matrix w2(hidden, micro_per_macro);
    for (int h = 0; h < hidden; ++h) {
      w1(h) = normal(rng);
      b1(h) = normal(rng);
    }
    for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = normal(rng) / std::sqrt(hidden);
    Matrix act = z * w1;
    act.rowwise() += b1;
    act = (1.0 + (-act.array()).exp()).inverse().matrix();
    Matrix micro = act * w2;
    for (Eigen::Index i = 0; i < micro.size(); ++i) micro.data()[i] += noise_sd * normal(rng);
    const int first = kept + k * micro_per_macro;
    X.middleCols(first, micro_per_macro) = micro;
    for (int m = 0; m < micro_per_macro; ++m) {
      columns[static_cast<std::size_t>(first + m)] =
          base_columns[static_cast<std::size_t>(v)] + "_" + std::to_string(m + 1);
    }
  }

  Dataset out;
  out.X = std::move(X);
  out.columns = std::move(columns);
  {
    std::ostringstream os;
    os << "{\"generator\":\"decompose_macro\",\"n_macro\":" << n_macro
       << ",\"micro_per_macro\":" << micro_per_macro << ",\"hidden_units\":" << hidden
       << ",\"noise_variance\":" << options.noise_variance << ",\"seed\":" << seed
       << ",\"source\":" << (ds.provenance.empty() ? "null" : ds.provenance) << "}";
    out.provenance = os.str();
  }

  if (ds.truth) {
    GroundTruthGraph g;
    g.d = width;
    auto expand = [&](int v) {
      const int k = macro_of[static_cast<std::size_t>(v)];
      return k < 0 ? std::vector<int>{new_index[static_cast<std::size_t>(v)]} : members_of(k);
    };
    for (const auto& [s, t] : ds.truth->edges) {
      for (int a : expand(s)) {
        for (int b : expand(t)) g.edges.emplace_back(a, b);
      }
    }
    for (int k = 0; k < n_macro; ++k) g.macros.push_back({k, members_of(k)});
    g.normalize();
    out.truth = std::move(g);
  }
  return out;
}

}  // namespace mgcsl::sim
