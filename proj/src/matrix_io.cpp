#include "ffc/matrix_io.hpp"

#include <algorithm>
#include <fstream>

namespace ffc {

using nlohmann::json;

PerceptionMatrixD table2_matrix() {
  // Printed order L3, L2, L1, M, R1, R2, R3 (rows: true status, cols: percept).
  const double printed[7][7] = {
      {1, 0, 0, 0, 0, 0, 0},
      {0.0182, 0.9636, 0.0182, 0, 0, 0, 0},
      {0, 0.0182, 0.9818, 0, 0, 0, 0},
      {0, 0, 0.0182, 0.9636, 0.0182, 0, 0},
      {0, 0, 0, 0.0182, 0.9636, 0.0182, 0},
      {0, 0, 0, 0, 0.0189, 0.9811, 0},
      {0, 0, 0, 0, 0, 0.0182, 0.9818},
  };
  Matrix<double> rows(7, 7);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 7; ++c) rows(6 - r, 6 - c) = printed[r][c];
  return validate_matrix<double>(std::move(rows), StatusSpace(3, 0.5));
}

namespace {

std::vector<std::string> order_from(const json& j, const StatusSpace& space) {
  const json* order = nullptr;
  if (j.contains("label_order")) order = &j.at("label_order");
  else if (j.contains("labels")) order = &j.at("labels");
  if (order == nullptr) return canonical_labels(space);
  if (order->is_string()) {
    auto labels = canonical_labels(space);
    const auto word = order->get<std::string>();
    if (word == "descending") std::reverse(labels.begin(), labels.end());
    else if (word != "ascending") throw ConfigError("label_order must be a label list, 'ascending' or 'descending'");
    return labels;
  }
  return order->get<std::vector<std::string>>();
}

}  // namespace

PerceptionMatrixD matrix_from_json(const json& j) {
  try {
    const int n = j.at("n").get<int>();
    const double delta = j.value("delta_mm", 0.5);
    const StatusSpace space(n, delta);
    const int k = space.size();

    const auto labels = order_from(j, space);
    if (static_cast<int>(labels.size()) != k)
      throw ConfigError("matrix file: expected " + std::to_string(k) + " labels");
    std::vector<int> idx(k);
    std::vector<bool> seen(k, false);
    for (int i = 0; i < k; ++i) {
      idx[i] = space.index_of(parse_label(labels[i], space));
      if (seen[idx[i]]) throw ConfigError("matrix file: duplicate label " + labels[i]);
      seen[idx[i]] = true;
    }

    const auto raw = j.at("rows").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(raw.size()) != k) throw MalformedMatrix(static_cast<int>(raw.size()), "wrong row count");
    Matrix<double> rows(k, k);
    for (int r = 0; r < k; ++r) {
      if (static_cast<int>(raw[r].size()) != k) throw MalformedMatrix(idx[r], "wrong column count");
      for (int c = 0; c < k; ++c) rows(idx[r], idx[c]) = raw[r][c];
    }

    std::optional<Vector<double>> counts;
    if (j.contains("row_counts") && !j.at("row_counts").is_null()) {
      const auto raw_counts = j.at("row_counts").get<std::vector<double>>();
      if (static_cast<int>(raw_counts.size()) != k) throw MalformedMatrix(0, "row_counts has wrong length");
      Vector<double> c(k);
      for (int r = 0; r < k; ++r) c[idx[r]] = raw_counts[r];
      counts = std::move(c);
    }
    return validate_matrix<double>(std::move(rows), space, std::move(counts));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("matrix file: ") + e.what());
  }
}

json matrix_to_json(const PerceptionMatrixD& m) {
  const StatusSpace& space = m.space();
  const int k = space.size();
  json rows = json::array();
  for (int r = 0; r < k; ++r) {
    json row = json::array();
    for (int c = 0; c < k; ++c) row.push_back(m.rows()(r, c));
    rows.push_back(std::move(row));
  }
  json j = {{"n", space.n()}, {"delta_mm", space.delta_mm()}, {"labels", canonical_labels(space)}, {"rows", rows}};
  if (m.row_counts()) {
    j["row_counts"] = std::vector<double>(m.row_counts()->data(), m.row_counts()->data() + k);
  }
  return j;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PerceptionMatrixD load_matrix(const std::filesystem::path& path) {
  try {
    return matrix_from_json(read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_matrix(const std::filesystem::path& path, const PerceptionMatrixD& m) {
  write_json_file(path, matrix_to_json(m));
}

}  // namespace ffc
