#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mgcsl/linalg.hpp"

namespace mgcsl::sim {

/// A latent macro-variable and the micro columns that represent it.
struct MacroSpec {
  int id = 0;
  std::vector<int> members;

  bool operator==(const MacroSpec&) const = default;
};

/// Directed graph over d micro nodes, 0-based, plus optional macro specs.
struct GroundTruthGraph {
  int d = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<MacroSpec> macros;

  bool operator==(const GroundTruthGraph&) const = default;

  /// d x d 0/1 matrix with A(src, dst) = 1 per edge.
  Eigen::MatrixXi adjacency() const;
  /// Parents of each node, ascending.
  std::vector<std::vector<int>> parents() const;
  /// Kahn's algorithm; empty optional when the graph has a cycle.
  std::optional<std::vector<int>> topological_order() const;
  bool is_acyclic() const { return topological_order().has_value(); }
  /// Throws ConfigError on out-of-range indices, duplicate edges, cycles, or
  /// overlapping / empty macro member sets.
  void validate() const;
  /// Sorts edges lexicographically.
  void normalize();
};

struct Dataset {
  Matrix X;
  std::vector<std::string> columns;  // defaults to x1..xd
  std::string provenance;            // JSON text: generator, config, seed
  std::optional<GroundTruthGraph> truth;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }
};

/// Default column names x1..xd.
std::vector<std::string> default_columns(Eigen::Index d);

/// Erdos-Renyi DAG: random topological order, each forward pair kept with
/// probability degree / (d - 1). Throws ConfigError if degree > d - 1.
GroundTruthGraph gen_er_dag(int d, double degree, std::uint64_t seed);

/// Scale-free DAG by preferential attachment: node k draws min(round(degree), k)
/// distinct parents among nodes 0..k-1 with weight (current degree + 1).
/// Labels are randomly permuted afterwards.
GroundTruthGraph gen_sf_dag(int d, double degree, std::uint64_t seed);

struct SemOptions {
  bool additive = true;
  double noise_scale = 1.0;
  double length_scale = 1.0;
  /// Approximate each GP draw with random Fourier features instead of an
  /// exact Cholesky draw.
  bool random_features = false;
  int num_features = 500;
};

/// x_i = f_i(parents) + N(0, noise_scale^2) in topological order, with f_i an
/// RBF Gaussian-process draw at the realized (standardized) parent values.
/// Additive mode sums one univariate GP per parent.
Dataset sample_gp_sem(const GroundTruthGraph& g, int n, const SemOptions& options,
                      std::uint64_t seed);

struct MacroDecomposeOptions {
  int hidden_units = 100;
  double noise_variance = 0.01;
};

/// Replaces n_macro randomly chosen columns by micro_per_macro columns each,
/// produced by a random one-hidden-layer sigmoid MLP of the (standardized)
/// original column plus Gaussian noise. Kept columns stay in order; micro
/// groups are appended. The truth graph (if any) is rewritten so that every
/// member inherits the macro's parents and children, and records the macros.
Dataset decompose_macro(const Dataset& ds, int n_macro, int micro_per_macro, std::uint64_t seed,
                        const MacroDecomposeOptions& options = {});

// ---------------------------------------------------------------------------
// Serialization

/// Sibling path holding the truth graph of a dataset CSV: data.csv -> data.truth.json.
std::filesystem::path truth_path_for(const std::filesystem::path& csv_path);

/// Writes the CSV (header + 17 significant digits) and, when present, the
/// truth JSON next to it.
void write_dataset(const Dataset& ds, const std::filesystem::path& csv_path);
/// Reads the CSV and the sibling truth JSON if it exists.
Dataset read_dataset(const std::filesystem::path& csv_path);

void write_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                      const std::filesystem::path& path);
/// Parses a headed numeric CSV. Throws ParseError with line/column on bad
/// cells or ragged rows.
Matrix read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);

std::string truth_to_json(const GroundTruthGraph& g, const std::string& provenance = {});
GroundTruthGraph truth_from_json(const std::string& text);
void write_truth(const GroundTruthGraph& g, const std::filesystem::path& path,
                 const std::string& provenance = {});
GroundTruthGraph read_truth(const std::filesystem::path& path);

}  // namespace mgcsl::sim
