#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mgcsl/causal_graph.hpp"
#include "mgcsl/graph_sim.hpp"

namespace mgcsl::eval {

/// Thresholds W at epsilon, then prunes until acyclic, then binarizes.
///
/// Pruning repeatedly deletes the lightest edge that still lies on a directed
/// cycle (ties: smallest (source, target)). Without `support`, W is d x d and
/// the result is a micro graph. With `support` (d x q), W is (d+q) x d with
/// macro rows below the micro rows; cycles are those of the auxiliary graph
/// (member -> macro links are fixed), and edges leaving a macro with empty
/// support are dropped.
CausalGraph postprocess(const Matrix& W, double epsilon,
                        const std::optional<SupportMatrix>& support = std::nullopt);

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int shd = 0;
  double runtime_seconds = 0.0;
  int true_positives = 0;
  int estimated_edges = 0;
  int true_edges = 0;
};

/// Directed precision / recall / F1 and SHD, where SHD counts node pairs whose
/// edge state differs (a reversal counts once). Ratios with an empty
/// denominator are 0. Throws ShapeError unless est is a micro graph over
/// truth.d nodes.
MetricsReport metrics(const CausalGraph& est, const sim::GroundTruthGraph& truth);

/// Structural Hamming distance between two square 0/1 matrices.
int structural_hamming_distance(const Eigen::MatrixXi& est, const Eigen::MatrixXi& truth);

/// Replaces each macro edge u -> v by member -> v for every member of u
/// (self-loops skipped, duplicates merged). Throws ConfigError when a macro
/// with an edge has no members.
CausalGraph project_multigranularity(const CausalGraph& g, const SupportMatrix& support);
CausalGraph project_multigranularity(const CausalGraph& g);

/// Adjacency CSV over all nodes plus, for graphs with macro nodes, a JSON
/// sidecar (graph_sidecar_path) listing every macro's members.
void write_graph(const CausalGraph& g, const std::filesystem::path& csv_path,
                 const std::vector<std::string>& micro_names = {});
CausalGraph read_graph(const std::filesystem::path& csv_path);
std::filesystem::path graph_sidecar_path(const std::filesystem::path& csv_path);

}  // namespace mgcsl::eval
