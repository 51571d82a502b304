#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mgcsl/errors.hpp"
#include "mgcsl/linalg.hpp"

namespace mgcsl::detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// `cols` is needed to rebuild matrices with zero rows.
inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols = -1) {
  if (!j.is_array()) throw ParseError("matrix JSON must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, cols < 0 ? 0 : cols);
  const auto width = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, width);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != width) {
      throw ParseError("matrix JSON row " + std::to_string(i) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < width; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace mgcsl::detail
