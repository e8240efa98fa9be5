#include "siva/cli/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace siva::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_text(path)); }

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error(fmt::format("short write to {}", path.string()));
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_text(path)); }

void write_csv(const fs::path& path, std::span<const std::string> header, const num::DenseMatrix& rows) {
  if (header.size() != rows.cols())
    throw num::DimensionError(fmt::format("write_csv: {} names for {} columns", header.size(), rows.cols()));
  fmt::memory_buffer buf;
  for (std::size_t c = 0; c < header.size(); ++c)
    fmt::format_to(std::back_inserter(buf), "{}{}", c ? "," : "", header[c]);
  buf.push_back('\n');
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c)
      fmt::format_to(std::back_inserter(buf), "{}{:.17g}", c ? "," : "", rows(r, c));
    buf.push_back('\n');
  }
  write_text(path, std::string_view(buf.data(), buf.size()));
}

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  CsvTable t;
  if (!std::getline(in, line)) throw std::runtime_error(fmt::format("{}: empty CSV", path.string()));
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0, cols = 0;
    while (pos <= line.size()) {
      const auto next = std::min(line.find(',', pos), line.size());
      values.push_back(std::stod(line.substr(pos, next - pos)));
      ++cols;
      pos = next + 1;
    }
    if (cols != t.header.size())
      throw std::runtime_error(fmt::format("{}: row {} has {} cells", path.string(), rows + 1, cols));
    ++rows;
  }
  t.rows = num::DenseMatrix(rows, t.header.size());
  std::ranges::copy(values, t.rows.data().begin());
  return t;
}

void write_trajectory(const fs::path& csv, const sim::TrajectorySet& set) {
  const std::size_t n = set.dof_count();
  std::vector<std::string> header{"t"};
  for (const char* prefix : {"q", "qd", "qdd"})
    for (std::size_t j = 0; j < n; ++j) header.push_back(fmt::format("{}_{}", prefix, j + 1));
  num::DenseMatrix rows(set.sample_count(), 1 + 3 * n);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    rows(r, 0) = set.times[r];
    for (std::size_t j = 0; j < n; ++j) {
      rows(r, 1 + j) = set.q(r, j);
      rows(r, 1 + n + j) = set.qd(r, j);
      rows(r, 1 + 2 * n + j) = set.qdd(r, j);
    }
  }
  write_csv(csv, header, rows);
}

nlohmann::json trajectory_metadata(const sim::TrajectorySet& set) {
  return {{"role", to_string(set.role)},
          {"amplitude_n", set.forcing.amplitude},
          {"pulse_duration_s", set.forcing.duration},
          {"start_time_s", set.forcing.start_time},
          {"application_dof", set.forcing.application_dof},
          {"dofs", set.dofs},
          {"tip_column", set.tip_column}};
}

sim::TrajectorySet read_trajectory(const fs::path& csv, const nlohmann::json& meta) {
  const auto t = read_csv(csv);
  if (t.header.empty() || (t.header.size() - 1) % 3 != 0)
    throw std::runtime_error(fmt::format("{}: not a trajectory table", csv.string()));
  const std::size_t n = (t.header.size() - 1) / 3, m = t.rows.rows();
  sim::TrajectorySet s;
  s.times = t.rows.col(0);
  s.q = num::DenseMatrix(m, n);
  s.qd = num::DenseMatrix(m, n);
  s.qdd = num::DenseMatrix(m, n);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      s.q(r, j) = t.rows(r, 1 + j);
      s.qd(r, j) = t.rows(r, 1 + n + j);
      s.qdd(r, j) = t.rows(r, 1 + 2 * n + j);
    }
  const auto role = meta.at("role").get<std::string>();
  for (auto r : {sim::DatasetRole::training, sim::DatasetRole::validation, sim::DatasetRole::resimulation})
    if (to_string(r) == role) s.role = r;
  s.forcing.amplitude = meta.at("amplitude_n").get<double>();
  s.forcing.duration = meta.at("pulse_duration_s").get<double>();
  s.forcing.start_time = meta.at("start_time_s").get<double>();
  s.forcing.application_dof = meta.at("application_dof").get<std::size_t>();
  s.dofs = meta.at("dofs").get<std::vector<std::size_t>>();
  s.tip_column = meta.at("tip_column").get<std::size_t>();
  return s;
}

}  // namespace siva::cli
