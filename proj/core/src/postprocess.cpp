#include <algorithm>
#include <fstream>
#include <functional>
#include <tuple>

#include <nlohmann/json.hpp>

#include "mgcsl/acyclicity.hpp"
#include "mgcsl/errors.hpp"
#include "mgcsl/eval.hpp"
#include "scc.hpp"

namespace mgcsl::eval {

using nlohmann::json;
using detail::components;

namespace {

struct WeightedEdge {
  double weight;
  int src;
  int dst;
};

// Removes the lightest cycle edge among `edges` until the graph formed by
// `edges` plus the fixed `links` is acyclic.
void prune_cycles(int num_nodes, std::vector<WeightedEdge>& edges,
                  const std::vector<std::pair<int, int>>& links) {
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return std::tie(a.weight, a.src, a.dst) < std::tie(b.weight, b.src, b.dst);
  });
  std::vector<bool> alive(edges.size(), true);
  while (true) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(num_nodes));
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (alive[k]) out[edges[k].src].push_back(edges[k].dst);
    }
    for (const auto& [s, t] : links) out[s].push_back(t);
    const std::vector<int> comp = components(out);
    std::size_t victim = edges.size();
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (!alive[k]) continue;
      const WeightedEdge& e = edges[k];
      if (e.src == e.dst || comp[e.src] == comp[e.dst]) {
        victim = k;
        break;
      }
    }
    if (victim == edges.size()) break;
    alive[victim] = false;
  }
  std::vector<WeightedEdge> kept;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (alive[k]) kept.push_back(edges[k]);
  }
  edges = std::move(kept);
}

}  // namespace

CausalGraph postprocess(const Matrix& W, double epsilon, const std::optional<SupportMatrix>& support) {
  if (epsilon < 0.0) throw ConfigError("postprocess: epsilon must be >= 0");
  linalg::require_finite(W, "postprocess");
  CausalGraph g;
  std::vector<WeightedEdge> edges;
  std::vector<std::pair<int, int>> links;
  if (!support) {
    if (W.rows() != W.cols()) throw DimensionError("postprocess: micro weights must be square");
    g.d = static_cast<int>(W.rows());
    g.origin = GraphOrigin::kMicro;
  } else {
    const int d = static_cast<int>(W.cols());
    const int q = static_cast<int>(support->cols());
    if (W.rows() != d + q || support->rows() != d) {
      throw ShapeError("postprocess: expected (d+q) x d weights with a d x q support");
    }
    g.d = d;
    g.origin = GraphOrigin::kMultiGranularity;
    g.macro_members = members_from_support(*support);
    for (int u = 0; u < q; ++u) {
      for (int m : g.macro_members[static_cast<std::size_t>(u)]) links.emplace_back(m, d + u);
    }
  }
  const int n = g.num_nodes();
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    const bool macro = i >= g.d;
    if (macro && g.macro_members[static_cast<std::size_t>(i - g.d)].empty()) continue;
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      const double w = std::abs(W(i, j));
      if (w > 0.0 && w >= epsilon) {
        edges.push_back({w, static_cast<int>(i), static_cast<int>(j)});
      }
    }
  }
  prune_cycles(n, edges, links);
  g.adjacency = Eigen::MatrixXi::Zero(n, n);
  for (const WeightedEdge& e : edges) g.adjacency(e.src, e.dst) = 1;
  return g;
}

CausalGraph project_multigranularity(const CausalGraph& g, const SupportMatrix& support) {
  if (support.cols() != g.num_macros() || (support.cols() > 0 && support.rows() != g.d)) {
    throw ShapeError("project_multigranularity: support must be d x (number of macros)");
  }
  const auto members = members_from_support(support);
  CausalGraph out;
  out.d = g.d;
  out.origin = GraphOrigin::kMicro;
  out.adjacency = g.adjacency.topLeftCorner(g.d, g.d);
  for (int u = 0; u < g.num_macros(); ++u) {
    for (int v = 0; v < g.d; ++v) {
      if (g.adjacency(g.d + u, v) == 0) continue;
      if (members[static_cast<std::size_t>(u)].empty()) {
        throw ConfigError("project_multigranularity: macro " + std::to_string(u) + " has no members");
      }
      for (int m : members[static_cast<std::size_t>(u)]) {
        if (m != v) out.adjacency(m, v) = 1;
      }
    }
  }
  return out;
}

CausalGraph project_multigranularity(const CausalGraph& g) {
  SupportMatrix support = SupportMatrix::Constant(g.d, g.num_macros(), false);
  for (int u = 0; u < g.num_macros(); ++u) {
    for (int m : g.macro_members[static_cast<std::size_t>(u)]) support(m, u) = true;
  }
  return project_multigranularity(g, support);
}

std::filesystem::path graph_sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".macros.json");
  return p;
}

void write_graph(const CausalGraph& g, const std::filesystem::path& csv_path,
                 const std::vector<std::string>& micro_names) {
  std::vector<std::string> names;
  for (int i = 0; i < g.d; ++i) {
    names.push_back(static_cast<int>(micro_names.size()) == g.d ? micro_names[i] : "x" + std::to_string(i + 1));
  }
  for (int u = 0; u < g.num_macros(); ++u) names.push_back("z" + std::to_string(u + 1));
  sim::write_matrix_csv(g.adjacency.cast<double>(), names, csv_path);

  const auto sidecar = graph_sidecar_path(csv_path);
  if (g.origin == GraphOrigin::kMicro && g.num_macros() == 0) {
    std::error_code ec;
    std::filesystem::remove(sidecar, ec);
    return;
  }
  json j;
  j["d"] = g.d;
  j["origin"] = g.origin == GraphOrigin::kMicro ? "micro" : "multi-granularity";
  j["macros"] = json::array();
  for (int u = 0; u < g.num_macros(); ++u) {
    j["macros"].push_back({{"id", u}, {"node", g.d + u}, {"members", g.macro_members[u]}});
  }
  std::ofstream out(sidecar);
  if (!out) throw std::runtime_error("cannot open '" + sidecar.string() + "' for writing");
  out << j.dump(2) << '\n';
}

CausalGraph read_graph(const std::filesystem::path& csv_path) {
  const Matrix m = sim::read_matrix_csv(csv_path);
  if (m.rows() != m.cols()) {
    throw ParseError("graph CSV '" + csv_path.string() + "' is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected square");
  }
  CausalGraph g;
  g.adjacency = (m.array() != 0.0).cast<int>();
  g.d = static_cast<int>(m.rows());
  const auto sidecar = graph_sidecar_path(csv_path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    try {
      const json j = json::parse(in);
      g.d = j.at("d").get<int>();
      g.origin = j.value("origin", "micro") == "micro" ? GraphOrigin::kMicro : GraphOrigin::kMultiGranularity;
      for (const auto& mac : j.at("macros")) g.macro_members.push_back(mac.at("members").get<std::vector<int>>());
    } catch (const json::exception& e) {
      throw ParseError("graph sidecar '" + sidecar.string() + "': " + e.what());
    }
    if (g.num_nodes() != m.rows()) throw ParseError("graph sidecar does not match the CSV size");
  }
  return g;
}

}  // namespace mgcsl::eval
