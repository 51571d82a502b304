#include "mgcsl/errors.hpp"
#include "mgcsl/eval.hpp"

namespace mgcsl::eval {

int structural_hamming_distance(const Eigen::MatrixXi& est, const Eigen::MatrixXi& truth) {
  if (est.rows() != est.cols() || truth.rows() != truth.cols() || est.rows() != truth.rows()) {
    throw ShapeError("structural_hamming_distance: graphs must be square and equally sized");
  }
  const Eigen::MatrixXi diff = ((est.array() != 0) != (truth.array() != 0)).cast<int>();
  const Eigen::MatrixXi pair = diff + diff.transpose();
  int shd = 0;
  for (Eigen::Index j = 0; j < pair.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) shd += pair(i, j) > 0 ? 1 : 0;
    shd += diff(j, j);
  }
  return shd;
}

MetricsReport metrics(const CausalGraph& est, const sim::GroundTruthGraph& truth) {
  if (est.num_macros() != 0) throw ShapeError("metrics: project macro nodes before scoring");
  if (est.d != truth.d || est.adjacency.rows() != truth.d || est.adjacency.cols() != truth.d) {
    throw ShapeError("metrics: estimate has " + std::to_string(est.d) + " nodes, truth has " +
                     std::to_string(truth.d));
  }
  const Eigen::MatrixXi e = (est.adjacency.array() != 0).cast<int>();
  const Eigen::MatrixXi t = truth.adjacency();
  MetricsReport r;
  r.estimated_edges = e.sum();
  r.true_edges = t.sum();
  r.true_positives = e.cwiseProduct(t).sum();
  r.precision = r.estimated_edges > 0 ? static_cast<double>(r.true_positives) / r.estimated_edges : 0.0;
  r.recall = r.true_edges > 0 ? static_cast<double>(r.true_positives) / r.true_edges : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.shd = structural_hamming_distance(e, t);
  return r;
}

}  // namespace mgcsl::eval
