#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "siva/numerics/dense_matrix.hpp"
#include "siva/simulate/simulate.hpp"

namespace siva::cli {

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Shortest text that reads back to the same double (17 significant digits).
std::string format_number(double v);

/// Writes atomically: a sibling temp file is renamed over the target.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  num::DenseMatrix rows;
};

void write_csv(const std::filesystem::path& path, std::span<const std::string> header,
               const num::DenseMatrix& rows);
/// Numeric CSV with one header line.
CsvTable read_csv(const std::filesystem::path& path);

/// Columns t, q_1.., qd_1.., qdd_1..; the metadata lives in a JSON sidecar.
void write_trajectory(const std::filesystem::path& csv, const sim::TrajectorySet& set);
nlohmann::json trajectory_metadata(const sim::TrajectorySet& set);
sim::TrajectorySet read_trajectory(const std::filesystem::path& csv, const nlohmann::json& metadata);

}  // namespace siva::cli
