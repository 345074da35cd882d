#include "zsq/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "zsq/error.hpp"

namespace zsq {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorKind::Validation, key + ": " + why);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) bad(key, "expected a number, got '" + text + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  int base = 10;
  const char* begin = text.data();
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    base = 16;
    begin += 2;
  }
  auto [ptr, ec] = std::from_chars(begin, end, v, base);
  if (ec != std::errc{} || ptr != end || begin == end) {
    bad(key, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"model.name", "-", "fou", "drift family: fou, fou-multi, langevin-quartic, zero"},
      {"model.dim", "-", "1", "state dimension d"},
      {"model.theta0", "parameter units", "(required)", "true parameter, comma separated"},
      {"model.box_lower", "parameter units", "catalog", "lower corner of the parameter box"},
      {"model.box_upper", "parameter units", "catalog", "upper corner of the parameter box"},
      {"noise.h", "dimensionless", "0.7", "Hurst index H in (0,1)"},
      {"noise.sigma", "state units / time^H", "identity",
       "diffusion matrix d x m, rows split by ';', entries by ','"},
      {"noise.estimate", "bool", "false", "plug-in mode: estimate H and |sigma|^2 from the data"},
      {"scheme.n", "count", "1024", "observation count for simulate"},
      {"scheme.ns", "count list", "1024,4096,16384", "observation counts for experiments"},
      {"scheme.alpha", "dimensionless", "0.5", "spacing exponent, alpha_n = kappa n^-alpha"},
      {"scheme.kappa", "time units", "1", "spacing scale; shares the time unit with alpha_n"},
      {"scheme.substeps", "count", "8", "Euler steps per observation interval"},
      {"scheme.burn_in", "time units", "10/c1", "discarded warm-up before t=0"},
      {"experiment.kinds", "list", "consistency", "experiments to run: consistency, limit, qv"},
      {"experiment.seed", "-", "0", "base seed (decimal or 0x hex)"},
      {"experiment.replications", "count", "200", "replications per n"},
      {"experiment.outdir", "path", "campaign", "output directory"},
      {"experiment.workers", "count", "0", "worker threads, 0 = available parallelism"},
      {"experiment.grid_points", "count", "33", "zero-squares grid nodes per axis"},
      {"experiment.theta_grid_points", "count", "21", "theta grid size for the limit comparison"},
      {"experiment.limit_hs", "dimensionless list", "noise.h", "Hurst indices for the limit comparison"},
      {"experiment.oracle_horizon", "time units", "5000", "stationary oracle averaging window"},
      {"experiment.oracle_substeps_per_unit", "count", "16", "oracle Euler steps per time unit"},
      {"experiment.oracle_seeds", "count", "8", "independent oracle trajectories"},
      {"experiment.oracle_seed", "-", "0x5eed", "oracle base seed"},
      {"experiment.oracle_burn_in", "time units", "10/c1", "oracle warm-up"},
      {"experiment.tolerance", "parameter units", "0.15", "|theta_hat - theta0| counted as within"},
      {"experiment.required_fraction", "fraction", "0.9", "fraction within tolerance at the largest n"},
      {"experiment.strict_decrease", "bool", "true", "medians must strictly decrease in n"},
      {"experiment.sign_fraction", "fraction", "0.8", "curvature sign fraction for the limit comparison"},
      {"experiment.qv_hs", "dimensionless list", "0.6,0.85", "Hurst indices for the QV rate fit"},
      {"experiment.qv_ns", "count list", "256,512,1024,2048,4096", "lengths for the QV rate fit"},
      {"experiment.qv_replications", "count", "1000", "replications per (H, n)"},
      {"experiment.qv_slope_tolerance", "dimensionless", "0.3", "allowed |slope - target|"},
  };
  return keys;
}

bool is_known_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.key == key; });
}

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Parse,
                  source + " line " + std::to_string(number) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!is_known_key(key)) {
      bad(key, "unknown key (" + source + " line " + std::to_string(number) + ")");
    }
    cfg.values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + file.string());
  return parse(in, file.string());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (!is_known_key(key)) bad(key, "unknown key");
  values_[key] = trim(value);
}

void KeyValueConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) bad(assignment, "expected key=value");
  set(trim(std::string_view(assignment).substr(0, eq)), assignment.substr(eq + 1));
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void KeyValueConfig::require(const std::string& key) const {
  if (!has(key)) bad(key, "is required");
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return raw(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = raw(key);
  return v ? to_double(key, *v) : fallback;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  const auto v = raw(key);
  return v ? static_cast<std::size_t>(to_u64(key, *v)) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = raw(key);
  return v ? to_u64(key, *v) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  bad(key, "expected true or false, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(get_string(key, ""), ',')) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::size_t> KeyValueConfig::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split(get_string(key, ""), ',')) {
    out.push_back(static_cast<std::size_t>(to_u64(key, item)));
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key) const {
  return split(get_string(key, ""), ',');
}

Eigen::MatrixXd KeyValueConfig::get_matrix(const std::string& key) const {
  const auto rows = split(get_string(key, ""), ';');
  if (rows.empty()) return {};
  std::vector<std::vector<double>> values;
  for (const auto& row : rows) {
    std::vector<double> r;
    for (const auto& item : split(row, ',')) r.push_back(to_double(key, item));
    if (!values.empty() && r.size() != values.front().size()) bad(key, "ragged matrix rows");
    values.push_back(std::move(r));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()),
                    static_cast<Eigen::Index>(values.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

namespace {

Eigen::VectorXd vector_of(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ExperimentConfig experiment_config(const KeyValueConfig& cfg) {
  ExperimentConfig c;
  c.model_name = cfg.get_string("model.name", "fou");
  c.dim = cfg.get_size("model.dim", 1);
  cfg.require("model.theta0");
  c.theta0 = vector_of(cfg.get_doubles("model.theta0"));
  if (cfg.has("model.box_lower") != cfg.has("model.box_upper")) {
    bad(cfg.has("model.box_lower") ? "model.box_upper" : "model.box_lower",
        "both box corners must be given");
  }
  if (cfg.has("model.box_lower")) {
    try {
      c.box = ParameterBox(vector_of(cfg.get_doubles("model.box_lower")),
                           vector_of(cfg.get_doubles("model.box_upper")));
    } catch (const Error& e) {
      bad("model.box_lower", e.what());
    }
  }
  c.h = cfg.get_double("noise.h", 0.7);
  c.sigma = cfg.get_matrix("noise.sigma");
  c.estimate_noise = cfg.get_bool("noise.estimate", false);
  c.ns = cfg.has("scheme.ns") ? cfg.get_sizes("scheme.ns")
                              : std::vector<std::size_t>{cfg.get_size("scheme.n", 1024)};
  c.alpha = cfg.get_double("scheme.alpha", 0.5);
  c.kappa = cfg.get_double("scheme.kappa", 1.0);
  c.substeps = cfg.get_size("scheme.substeps", 8);
  if (cfg.has("scheme.burn_in")) c.burn_in = cfg.get_double("scheme.burn_in", 0.0);
  c.replications = cfg.get_size("experiment.replications", 200);
  c.base_seed = cfg.get_u64("experiment.seed", 0);
  c.outdir = cfg.get_string("experiment.outdir", "campaign");
  c.workers = cfg.get_size("experiment.workers", 0);
  c.grid_points = cfg.get_size("experiment.grid_points", 33);
  c.theta_grid_points = cfg.get_size("experiment.theta_grid_points", 21);
  c.oracle.horizon = cfg.get_double("experiment.oracle_horizon", c.oracle.horizon);
  c.oracle.substeps_per_unit =
      cfg.get_size("experiment.oracle_substeps_per_unit", c.oracle.substeps_per_unit);
  c.oracle.seeds = cfg.get_size("experiment.oracle_seeds", c.oracle.seeds);
  c.oracle.base_seed = cfg.get_u64("experiment.oracle_seed", c.oracle.base_seed);
  if (cfg.has("experiment.oracle_burn_in")) {
    c.oracle.burn_in = cfg.get_double("experiment.oracle_burn_in", 0.0);
  }
  c.thresholds.tolerance = cfg.get_double("experiment.tolerance", c.thresholds.tolerance);
  c.thresholds.required_fraction =
      cfg.get_double("experiment.required_fraction", c.thresholds.required_fraction);
  c.thresholds.strict_decrease =
      cfg.get_bool("experiment.strict_decrease", c.thresholds.strict_decrease);
  c.thresholds.sign_fraction = cfg.get_double("experiment.sign_fraction", c.thresholds.sign_fraction);
  c.thresholds.qv_slope_tolerance =
      cfg.get_double("experiment.qv_slope_tolerance", c.thresholds.qv_slope_tolerance);
  try {
    c.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Validation) throw;
    throw Error(ErrorKind::Validation, e.what());
  }
  return c;
}

QvRatesConfig qv_config(const KeyValueConfig& cfg) {
  QvRatesConfig c;
  c.hs = cfg.has("experiment.qv_hs") ? cfg.get_doubles("experiment.qv_hs")
                                     : std::vector<double>{0.6, 0.85};
  c.ns = cfg.has("experiment.qv_ns") ? cfg.get_sizes("experiment.qv_ns")
                                     : std::vector<std::size_t>{256, 512, 1024, 2048, 4096};
  c.replications = cfg.get_size("experiment.qv_replications", 1000);
  c.base_seed = cfg.get_u64("experiment.seed", 0);
  c.slope_tolerance = cfg.get_double("experiment.qv_slope_tolerance", 0.3);
  c.workers = cfg.get_size("experiment.workers", 0);
  c.outdir = cfg.get_string("experiment.outdir", "campaign");
  return c;
}

std::string config_help() {
  std::ostringstream os;
  os << "Configuration keys (file lines key=value, or --set key=value):\n";
  for (const auto& k : config_keys()) {
    os << "  " << k.key << "  [" << k.unit << "]  default " << k.default_value << "\n      "
       << k.description << "\n";
  }
  return os.str();
}

}  // namespace zsq
