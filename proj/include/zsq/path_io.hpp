#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "zsq/simulate.hpp"

namespace zsq {

enum class FloatEncoding { Decimal17, HexFloat };

/// Shortest text that strtod maps back to the identical double.
std::string format_double(double v, FloatEncoding enc = FloatEncoding::Decimal17);

/// Observation table as stored on disk: header `t,y1..yd,F1..Fd`.
struct ObservationTable {
  std::vector<double> times;
  Eigen::MatrixXd y;      // d x rows
  Eigen::MatrixXd noise;  // d x rows, or 0 x 0 when the file has no F columns
};

void write_path_csv(const PathRecord& rec, const std::filesystem::path& file,
                    FloatEncoding enc = FloatEncoding::Decimal17);

/// Throws Error{Parse} naming the 1-based line number on malformed input.
ObservationTable read_path_csv(const std::filesystem::path& file);

nlohmann::json path_metadata(const PathRecord& rec, FloatEncoding enc);
void write_path_sidecar(const PathRecord& rec, const std::filesystem::path& file,
                        FloatEncoding enc = FloatEncoding::Decimal17);

}  // namespace zsq
