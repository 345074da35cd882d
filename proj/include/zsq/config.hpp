#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zsq/harness.hpp"

namespace zsq {

struct KeySpec {
  std::string key;
  std::string unit;
  std::string default_value;
  std::string description;
};

/// Every accepted key, in help order.
const std::vector<KeySpec>& config_keys();
bool is_known_key(const std::string& key);

/// Flat key=value configuration. Lines starting with '#' and trailing
/// " # ..." comments are ignored. Unknown keys throw Error{Validation}.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<input>");
  static KeyValueConfig load(const std::filesystem::path& file);

  void set(const std::string& key, const std::string& value);
  /// Parses "key=value".
  void set_assignment(const std::string& assignment);
  void merge(const KeyValueConfig& other);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> raw(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  // Typed getters; conversion failures throw Error{Validation} naming the key.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
  /// Rows separated by ';', entries by ','.
  Eigen::MatrixXd get_matrix(const std::string& key) const;

  /// Throws Error{Validation} naming `key` when it is absent.
  void require(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Experiment kinds accepted by experiment.kinds.
inline constexpr const char* kKindConsistency = "consistency";
inline constexpr const char* kKindLimit = "limit";
inline constexpr const char* kKindQv = "qv";

ExperimentConfig experiment_config(const KeyValueConfig& cfg);
QvRatesConfig qv_config(const KeyValueConfig& cfg);

/// Help text listing every key with unit and default.
std::string config_help();

}  // namespace zsq
