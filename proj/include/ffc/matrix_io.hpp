#pragma once

#include <filesystem>

#include <json.hpp>

#include "ffc/belief.hpp"

namespace ffc {

// The likelihood matrix measured for the real sensor (n = 3), canonical
// ascending order. Note the printed table lists L3 first.
PerceptionMatrixD table2_matrix();

// JSON form:
//   {"n": 3, "delta_mm": 0.5, "labels": ["R3",...,"L3"], "rows": [[...], ...],
//    "row_counts": [...]}   // row_counts optional
// Rows and columns follow "labels". A "label_order" key (a label list, or
// the strings "ascending" / "descending") overrides "labels", so a table
// copied in L3..R3 order loads as-is.
PerceptionMatrixD matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const PerceptionMatrixD& m);

PerceptionMatrixD load_matrix(const std::filesystem::path& path);
void save_matrix(const std::filesystem::path& path, const PerceptionMatrixD& m);

// Reads a whole file, throwing ConfigError with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace ffc
