#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mgcsl/errors.hpp"
#include "mgcsl/graph_sim.hpp"

namespace mgcsl::sim {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

std::filesystem::path truth_path_for(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".truth.json");
  return p;
}

void write_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                      const std::filesystem::path& path) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols()) {
    throw ShapeError("write_matrix_csv: header has " + std::to_string(header.size()) +
                     " names for " + std::to_string(m.cols()) + " columns");
  }
  auto out = open_for_write(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

Matrix read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
  const std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> names;
  std::size_t width = 0;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (names.empty()) {
      for (auto c : cells) names.emplace_back(trim(c));
      width = names.size();
      continue;
    }
    if (cells.size() != width) {
      throw ParseError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(width),
                       line_no, 1);
    }
    std::vector<double> row(width);
    long column = 1;
    for (std::size_t j = 0; j < width; ++j) {
      const std::string_view cell = trim(cells[j]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("CSV cell '" + std::string(cell) + "' is not a number", line_no, column);
      }
      if (!std::isfinite(v)) throw ParseError("CSV cell is not finite", line_no, column);
      row[j] = v;
      column += static_cast<long>(cells[j].size()) + 1;
    }
    rows.push_back(std::move(row));
  }
  if (names.empty()) throw ParseError("CSV '" + path.string() + "' has no header", 1, 1);

  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  if (header) *header = std::move(names);
  return m;
}

std::string truth_to_json(const GroundTruthGraph& g, const std::string& provenance) {
  json j;
  j["d"] = g.d;
  j["edges"] = json::array();
  for (const auto& [s, t] : g.edges) j["edges"].push_back({s, t});
  j["macros"] = json::array();
  for (const MacroSpec& m : g.macros) j["macros"].push_back({{"id", m.id}, {"members", m.members}});
  if (!provenance.empty()) j["provenance"] = json::parse(provenance);
  return j.dump(2);
}

GroundTruthGraph truth_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to line/column.
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    long line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(std::string("truth JSON: ") + e.what(), line, column);
  }
  try {
    GroundTruthGraph g;
    g.d = j.at("d").get<int>();
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ParseError("truth JSON: edge must be [src, dst]");
      g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    if (j.contains("macros")) {
      for (const auto& m : j.at("macros")) {
        g.macros.push_back({m.at("id").get<int>(), m.at("members").get<std::vector<int>>()});
      }
    }
    g.normalize();
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw ParseError(std::string("truth JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("truth JSON: ") + e.what());
  }
}

void write_truth(const GroundTruthGraph& g, const std::filesystem::path& path,
                 const std::string& provenance) {
  auto out = open_for_write(path);
  out << truth_to_json(g, provenance) << '\n';
}

GroundTruthGraph read_truth(const std::filesystem::path& path) {
  return truth_from_json(read_file(path));
}

void write_dataset(const Dataset& ds, const std::filesystem::path& csv_path) {
  const auto columns =
      ds.columns.size() == static_cast<std::size_t>(ds.d()) ? ds.columns : default_columns(ds.d());
  write_matrix_csv(ds.X, columns, csv_path);
  const auto truth_path = truth_path_for(csv_path);
  if (ds.truth) {
    write_truth(*ds.truth, truth_path, ds.provenance);
  } else {
    std::error_code ec;
    std::filesystem::remove(truth_path, ec);
  }
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
  Dataset ds;
  ds.X = read_matrix_csv(csv_path, &ds.columns);
  const auto truth_path = truth_path_for(csv_path);
  if (std::filesystem::exists(truth_path)) {
    const std::string text = read_file(truth_path);
    ds.truth = truth_from_json(text);
    if (ds.truth->d != ds.d()) {
      throw ParseError("truth graph has d=" + std::to_string(ds.truth->d) + " but CSV has " +
                       std::to_string(ds.d()) + " columns");
    }
    const json j = json::parse(text);
    if (j.contains("provenance")) ds.provenance = j["provenance"].dump();
  }
  return ds;
}

}  // namespace mgcsl::sim
