#include "zsq/path_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "zsq/error.hpp"

namespace zsq {

std::string format_double(double v, FloatEncoding enc) {
  char buf[64];
  std::snprintf(buf, sizeof buf, enc == FloatEncoding::HexFloat ? "%a" : "%.17g", v);
  return buf;
}

void write_path_csv(const PathRecord& rec, const std::filesystem::path& file, FloatEncoding enc) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + file.string() + " for writing");
  const auto d = rec.obs_y.rows();
  out << 't';
  for (Eigen::Index i = 1; i <= d; ++i) out << ",y" << i;
  for (Eigen::Index i = 1; i <= d; ++i) out << ",F" << i;
  out << '\n';
  for (Eigen::Index k = 0; k < rec.obs_y.cols(); ++k) {
    out << format_double(rec.plan.scheme.time(static_cast<std::size_t>(k)), enc);
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(rec.obs_y(i, k), enc);
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(rec.obs_noise(i, k), enc);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + file.string());
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_field(const std::string& text, std::size_t line_no) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end != nullptr && (*end == ' ' || *end == '\r')) ++end;
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad number \"" + text + "\"");
  }
  return v;
}

}  // namespace

ObservationTable read_path_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "t") {
    throw Error(ErrorKind::Parse, "line 1: header must start with t,y1");
  }
  std::size_t d = 0;
  while (d + 1 < header.size() && header[d + 1] == "y" + std::to_string(d + 1)) ++d;
  if (d == 0) throw Error(ErrorKind::Parse, "line 1: expected column y1");
  const std::size_t rest = header.size() - 1 - d;
  if (rest != 0 && rest != d) {
    throw Error(ErrorKind::Parse, "line 1: expected either no F columns or F1..F" + std::to_string(d));
  }
  for (std::size_t i = 0; i < rest; ++i) {
    if (header[1 + d + i] != "F" + std::to_string(i + 1)) {
      throw Error(ErrorKind::Parse, "line 1: unexpected column \"" + header[1 + d + i] + "\"");
    }
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = parse_field(fields[i], line_no);
    rows.push_back(std::move(row));
  }
  ObservationTable table;
  const auto cols = static_cast<Eigen::Index>(rows.size());
  table.times.reserve(rows.size());
  table.y.resize(static_cast<Eigen::Index>(d), cols);
  if (rest > 0) table.noise.resize(static_cast<Eigen::Index>(d), cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    const auto& row = rows[static_cast<std::size_t>(k)];
    table.times.push_back(row[0]);
    for (std::size_t i = 0; i < d; ++i) table.y(static_cast<Eigen::Index>(i), k) = row[1 + i];
    for (std::size_t i = 0; i < rest; ++i) table.noise(static_cast<Eigen::Index>(i), k) = row[1 + d + i];
  }
  return table;
}

nlohmann::json path_metadata(const PathRecord& rec, FloatEncoding enc) {
  using nlohmann::json;
  const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); };
  json sigma = json::array();
  for (Eigen::Index r = 0; r < rec.sigma.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < rec.sigma.cols(); ++c) row.push_back(rec.sigma(r, c));
    sigma.push_back(row);
  }
  const auto& s = rec.plan.scheme;
  return json{
      {"model", {{"name", rec.model_name}, {"dim", rec.obs_y.rows()}, {"theta0", vec(rec.theta0)}}},
      {"noise", {{"h", rec.hurst}, {"sigma", sigma}}},
      {"scheme", {{"n", s.n()}, {"alpha", s.alpha()}, {"kappa", s.kappa()},
                  {"spacing", s.spacing()}, {"horizon", s.horizon()}}},
      {"plan", {{"substeps", rec.plan.substeps}, {"burn_in", rec.burn_in},
                {"y0", vec(rec.plan.y0)}, {"seed", rec.plan.seed}}},
      {"encoding", enc == FloatEncoding::HexFloat ? "hexfloat" : "decimal17"},
  };
}

void write_path_sidecar(const PathRecord& rec, const std::filesystem::path& file, FloatEncoding enc) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + file.string() + " for writing");
  out << path_metadata(rec, enc).dump(2) << '\n';
}

}  // namespace zsq
