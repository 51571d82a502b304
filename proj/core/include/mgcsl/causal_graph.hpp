#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mgcsl/linalg.hpp"

namespace mgcsl {

using SupportMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class GraphOrigin { kMicro, kMultiGranularity };

/// Binary directed graph. Nodes 0..d-1 are micro-variables; nodes d..d+m-1
/// (multi-granularity graphs only) are macro-variables whose member micro
/// nodes are listed in macro_members.
struct CausalGraph {
  int d = 0;
  std::vector<std::vector<int>> macro_members;
  Eigen::MatrixXi adjacency;  // square, num_nodes() wide, entries 0/1
  GraphOrigin origin = GraphOrigin::kMicro;

  int num_macros() const { return static_cast<int>(macro_members.size()); }
  int num_nodes() const { return d + num_macros(); }
  int num_edges() const { return adjacency.size() == 0 ? 0 : adjacency.sum(); }
  /// Edges as (src, dst), row-major order.
  std::vector<std::pair<int, int>> edges() const;

  static CausalGraph micro(const Eigen::MatrixXi& adjacency);
};

/// support(i, u) = A(i, u) >= threshold.
SupportMatrix support_from_contribution(const Matrix& A, double threshold = 0.01);

/// Members of macro u per support column u.
std::vector<std::vector<int>> members_from_support(const SupportMatrix& support);

}  // namespace mgcsl
