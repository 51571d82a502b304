#include "mgcsl/causal_graph.hpp"

#include "mgcsl/errors.hpp"

namespace mgcsl {

std::vector<std::pair<int, int>> CausalGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j) {
      if (adjacency(i, j) != 0) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

CausalGraph CausalGraph::micro(const Eigen::MatrixXi& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw DimensionError("CausalGraph: adjacency must be square");
  CausalGraph g;
  g.d = static_cast<int>(adjacency.rows());
  g.adjacency = (adjacency.array() != 0).cast<int>();
  return g;
}

SupportMatrix support_from_contribution(const Matrix& A, double threshold) {
  return (A.array() >= threshold).matrix();
}

std::vector<std::vector<int>> members_from_support(const SupportMatrix& support) {
  std::vector<std::vector<int>> members(static_cast<std::size_t>(support.cols()));
  for (Eigen::Index u = 0; u < support.cols(); ++u) {
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
      if (support(i, u)) members[static_cast<std::size_t>(u)].push_back(static_cast<int>(i));
    }
  }
  return members;
}

}  // namespace mgcsl
