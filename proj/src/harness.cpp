#include "zsq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "zsq/error.hpp"
#include "zsq/fgn.hpp"
#include "zsq/path_io.hpp"
#include "zsq/rng.hpp"
#include "zsq/simulate.hpp"
#include "zsq/statistic.hpp"

namespace zsq {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorKind::Validation, field + ": " + why);
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.begin(), v.end()}; }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t resolve_workers(std::size_t workers) {
  if (workers > 0) return workers;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + file.string() + " for writing");
  out << text;
}

std::string csv_number(double v) { return format_double(v); }

}  // namespace

// --- config ------------------------------------------------------------------

void ExperimentConfig::validate() const {
  const DriftModel model = [&] {
    try {
      return make_drift();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::UnknownModelName) invalid("model.name", e.what());
      invalid("model", e.what());
    }
  }();
  if (static_cast<std::size_t>(theta0.size()) != model.param_dim) {
    invalid("model.theta0", "expected " + std::to_string(model.param_dim) + " values");
  }
  if (!model.box.contains(theta0)) invalid("model.theta0", "lies outside the parameter box");
  if (!(h > 0.0 && h < 1.0)) invalid("noise.h", "Hurst index must lie in (0,1)");
  if (sigma.size() != 0 && static_cast<std::size_t>(sigma.rows()) != dim) {
    invalid("noise.sigma", "needs " + std::to_string(dim) + " rows");
  }
  if (ns.empty()) invalid("scheme.ns", "at least one n is required");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] < 2) invalid("scheme.ns", "every n must be >= 2");
    if (i > 0 && ns[i] <= ns[i - 1]) invalid("scheme.ns", "values must be strictly increasing");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) invalid("scheme.alpha", "must lie in (0,1)");
  if (!(kappa > 0.0)) invalid("scheme.kappa", "must be positive");
  if (substeps < 1) invalid("scheme.substeps", "must be >= 1");
  if (burn_in && !(*burn_in >= 0.0)) invalid("scheme.burn_in", "must be >= 0");
  if (replications < 1) invalid("experiment.replications", "must be >= 1");
  if (grid_points < 2) invalid("experiment.grid_points", "must be >= 2");
  if (theta_grid_points < 3) invalid("experiment.theta_grid_points", "must be >= 3");
}

DriftModel ExperimentConfig::make_drift() const {
  DriftModel model = make_model(model_name, dim);
  if (box) {
    if (box->dim() != model.param_dim) invalid("model.box", "has the wrong dimension");
    model.box = *box;
  }
  return model;
}

NoiseModel ExperimentConfig::make_noise() const {
  Eigen::MatrixXd s = sigma.size() == 0
                          ? Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                                      static_cast<Eigen::Index>(dim))
                          : sigma;
  return NoiseModel(HurstIndex(h), std::move(s));
}

json ExperimentConfig::to_json() const {
  const DriftModel model = make_drift();
  json j;
  j["model"] = {{"name", model_name},
                {"dim", dim},
                {"theta0", to_vector(theta0)},
                {"box_lower", to_vector(model.box.lower())},
                {"box_upper", to_vector(model.box.upper())}};
  j["noise"] = {{"h", h}, {"sigma", matrix_json(make_noise().sigma())}, {"estimate", estimate_noise}};
  j["scheme"] = {{"ns", ns},
                 {"alpha", alpha},
                 {"kappa", kappa},
                 {"substeps", substeps},
                 {"burn_in", burn_in ? json(*burn_in) : json(nullptr)}};
  j["experiment"] = {{"replications", replications},
                     {"seed", base_seed},
                     {"grid_points", grid_points},
                     {"theta_grid_points", theta_grid_points},
                     {"oracle_horizon", oracle.horizon},
                     {"oracle_substeps_per_unit", oracle.substeps_per_unit},
                     {"oracle_seeds", oracle.seeds},
                     {"oracle_seed", oracle.base_seed},
                     {"oracle_burn_in", oracle.burn_in ? json(*oracle.burn_in) : json(nullptr)}};
  j["thresholds"] = {{"tolerance", thresholds.tolerance},
                     {"required_fraction", thresholds.required_fraction},
                     {"strict_decrease", thresholds.strict_decrease},
                     {"sign_fraction", thresholds.sign_fraction},
                     {"qv_slope_tolerance", thresholds.qv_slope_tolerance}};
  return j;
}

std::string ExperimentConfig::fingerprint() const {
  json j = to_json();
  j.erase("thresholds");
  return checksum_hex(j.dump());
}

std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t n, std::uint64_t replication) {
  return hash64({base_seed, n, replication});
}

std::string checksum_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- record store ------------------------------------------------------------

namespace {

std::string record_digest(json record) {
  record.erase("checksum");
  record.erase("meta");
  return checksum_hex(record.dump());
}

}  // namespace

bool RecordStore::valid(const json& record) {
  return record.is_object() && record.contains("checksum") && record["checksum"].is_string() &&
         record.contains("key") && record["checksum"].get<std::string>() == record_digest(record);
}

std::vector<json> RecordStore::read_all(const std::filesystem::path& file) {
  std::vector<json> out;
  std::ifstream in(file, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (!rec.is_discarded() && valid(rec)) out.push_back(std::move(rec));
  }
  return out;
}

RecordStore::RecordStore(std::filesystem::path file, std::string fingerprint)
    : file_(std::move(file)), fingerprint_(std::move(fingerprint)) {
  if (file_.empty()) return;
  std::vector<json> kept;
  if (std::filesystem::exists(file_)) {
    for (auto& rec : read_all(file_)) {
      if (rec.value("config", std::string{}) != fingerprint_) continue;
      const auto key = rec["key"].get<std::string>();
      if (existing_.contains(key)) continue;
      existing_.emplace(key, rec);
      kept.push_back(std::move(rec));
    }
  }
  // Drop corrupt or foreign lines before appending.
  rewrite(kept);
}

const json* RecordStore::find(const std::string& key) const {
  auto it = existing_.find(key);
  return it == existing_.end() ? nullptr : &it->second;
}

void RecordStore::append(json& record) {
  record["config"] = fingerprint_;
  record["checksum"] = record_digest(record);
  if (file_.empty()) return;
  std::ofstream out(file_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::Io, "cannot append to " + file_.string());
  out << record.dump() << '\n';
  out.flush();
}

void RecordStore::rewrite(const std::vector<json>& ordered) {
  if (file_.empty()) return;
  const auto tmp = std::filesystem::path(file_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    for (const auto& rec : ordered) out << rec.dump() << '\n';
  }
  std::filesystem::rename(tmp, file_);
}

std::vector<json> run_jobs(const std::vector<Job>& jobs,
                           const std::function<json(const Job&)>& compute, RecordStore& store,
                           std::size_t workers) {
  const std::size_t count = jobs.size();
  std::vector<json> results(count);
  std::vector<char> ready(count, 0);
  std::vector<char> reused(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    if (const json* rec = store.find(jobs[i].key)) {
      results[i] = *rec;
      ready[i] = 1;
      reused[i] = 1;
    }
  }

  std::mutex writer;
  std::size_t next_commit = 0;
  const auto commit_ready = [&] {
    while (next_commit < count && ready[next_commit]) {
      if (!reused[next_commit]) store.append(results[next_commit]);
      ++next_commit;
    }
  };
  {
    std::lock_guard lock(writer);
    commit_ready();
  }

  std::atomic<std::size_t> cursor{0};
  const auto work = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= count) return;
      if (reused[i]) continue;
      const Job& job = jobs[i];
      const auto start = std::chrono::steady_clock::now();
      json rec;
      try {
        rec = compute(job);
        rec["status"] = "ok";
      } catch (const Error& e) {
        rec = json::object();
        rec["status"] = std::string(to_string(e.kind()));
        rec["message"] = e.what();
      }
      const auto elapsed = std::chrono::steady_clock::now() - start;
      rec["key"] = job.key;
      rec["n"] = job.n;
      rec["replication"] = job.replication;
      rec["group"] = job.group;
      rec["seed"] = job.seed;
      rec["meta"] = {{"runtime_ms", std::chrono::duration<double, std::milli>(elapsed).count()}};

      std::lock_guard lock(writer);
      results[i] = std::move(rec);
      ready[i] = 1;
      commit_ready();
    }
  };

  const std::size_t pool = std::min(resolve_workers(workers), std::max<std::size_t>(count, 1));
  if (pool <= 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(work);
  }
  return results;
}

// --- statistics helpers ------------------------------------------------------

double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

void write_series(const std::filesystem::path& file, const std::vector<double>& x,
                  const std::vector<double>& y) {
  std::ostringstream os;
  os << "x,y\n";
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    os << csv_number(x[i]) << ',' << csv_number(y[i]) << '\n';
  }
  write_text(file, os.str());
}

namespace {

bool decreasing(const std::vector<double>& v, bool strict) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::isnan(v[i]) || std::isnan(v[i - 1])) return false;
    if (strict ? !(v[i] < v[i - 1]) : !(v[i] <= v[i - 1])) return false;
  }
  return !v.empty();
}

void prepare_outdir(const std::filesystem::path& outdir) {
  if (outdir.empty()) return;
  std::filesystem::create_directories(outdir / "plotdata");
}

NoiseParameters noise_for(const ExperimentConfig& config, const NoiseModel& noise,
                          const Eigen::MatrixXd& obs, const ObservationScheme& scheme, json& rec) {
  if (!config.estimate_noise) return NoiseParameters::from(noise);
  const auto est = estimate_h_sigma(obs, scheme);
  rec["h_hat"] = est.h_hat;
  rec["sigma_norm_sq_hat"] = est.sigma_norm_sq_hat;
  return {est.h_hat, est.sigma_norm_sq_hat};
}

PathRecord simulate_for(const ExperimentConfig& config, const DriftModel& model,
                        const NoiseModel& noise, const Job& job) {
  const SimulationPlan plan{.scheme = ObservationScheme(job.n, config.alpha, config.kappa),
                            .substeps = config.substeps,
                            .burn_in = config.burn_in,
                            .y0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dim)),
                            .seed = job.seed,
                            .keep_fine = false};
  return simulate_path(model, config.theta0, noise, plan);
}

std::vector<Job> replication_jobs(const ExperimentConfig& config) {
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < config.ns.size(); ++g) {
    for (std::size_t r = 0; r < config.replications; ++r) {
      const std::size_t n = config.ns[g];
      jobs.push_back({.key = "n=" + std::to_string(n) + "/r=" + std::to_string(r),
                      .group = g,
                      .n = n,
                      .replication = r,
                      .seed = replication_seed(config.base_seed, n, r)});
    }
  }
  return jobs;
}

bool ok(const json& rec) { return rec.value("status", std::string{}) == "ok"; }

}  // namespace

// --- consistency -----------------------------------------------------------

ConsistencySummary summarize_consistency(const std::vector<json>& records,
                                         const ExperimentConfig& config) {
  ConsistencySummary summary;
  std::vector<double> medians;
  for (std::size_t n : config.ns) {
    ConsistencyRow row;
    row.n = n;
    std::vector<double> errors;
    for (const auto& rec : records) {
      if (rec.value("n", std::size_t{0}) != n) continue;
      if (ok(rec)) {
        errors.push_back(rec["error"].get<double>());
      } else {
        ++row.failed;
      }
    }
    row.completed = errors.size();
    row.median_error = median(errors);
    row.p90_error = percentile(errors, 0.9);
    const auto within = std::count_if(errors.begin(), errors.end(), [&](double e) {
      return e <= config.thresholds.tolerance;
    });
    row.frac_within_tol =
        errors.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(errors.size());
    medians.push_back(row.median_error);
    summary.rows.push_back(row);
  }
  summary.medians_decreasing = decreasing(medians, config.thresholds.strict_decrease);
  summary.final_fraction_ok =
      !summary.rows.empty() &&
      summary.rows.back().frac_within_tol >= config.thresholds.required_fraction;
  summary.pass = summary.medians_decreasing && summary.final_fraction_ok;
  summary.records = records;
  return summary;
}

std::string consistency_csv(const ConsistencySummary& summary) {
  std::ostringstream os;
  os << "n,completed,failed,median_error,p90_error,frac_within_tol\n";
  for (const auto& r : summary.rows) {
    os << r.n << ',' << r.completed << ',' << r.failed << ',' << csv_number(r.median_error) << ','
       << csv_number(r.p90_error) << ',' << csv_number(r.frac_within_tol) << '\n';
  }
  return os.str();
}

ConsistencySummary run_consistency(const ExperimentConfig& config) {
  config.validate();
  const DriftModel model = config.make_drift();
  const NoiseModel noise = config.make_noise();
  prepare_outdir(config.outdir);
  RecordStore store(config.outdir.empty() ? std::filesystem::path{} : config.outdir / "records.jsonl",
                    checksum_hex("consistency:" + config.fingerprint()));

  const ZeroSquaresOptions options{.grid_points = config.grid_points, .refine = {}};
  const auto compute = [&](const Job& job) {
    const PathRecord path = simulate_for(config, model, noise, job);
    const ObservationScheme& scheme = path.plan.scheme;
    json rec = json::object();
    const NoiseParameters np = noise_for(config, noise, path.obs_y, scheme, rec);
    const StatisticInput input(path.obs_y, scheme, np, model);
    const EstimationResult est = zero_squares(input, options);
    rec["theta_hat"] = to_vector(est.theta_hat);
    rec["error"] = (est.theta_hat - config.theta0).norm();
    rec["q_at_min"] = est.q_at_min;
    rec["iterations"] = est.iterations;
    rec["converged"] = est.converged;
    return rec;
  };
  const auto jobs = replication_jobs(config);
  auto records = run_jobs(jobs, compute, store, config.workers);
  store.rewrite(records);
  // Re-read so returned records carry config and checksum exactly as stored.
  if (!config.outdir.empty()) records = RecordStore::read_all(config.outdir / "records.jsonl");

  ConsistencySummary summary = summarize_consistency(records, config);
  if (!config.outdir.empty()) {
    write_text(config.outdir / "summary.csv", consistency_csv(summary));
    json echo = config.to_json();
    echo["kind"] = "consistency";
    write_text(config.outdir / "config.echo.json", echo.dump(2) + "\n");
    std::vector<double> x, med, p90;
    for (const auto& r : summary.rows) {
      x.push_back(static_cast<double>(r.n));
      med.push_back(r.median_error);
      p90.push_back(r.p90_error);
    }
    write_series(config.outdir / "plotdata" / "median_error.csv", x, med);
    write_series(config.outdir / "plotdata" / "p90_error.csv", x, p90);
  }
  return summary;
}

// --- limit comparison --------------------------------------------------------

std::vector<Eigen::VectorXd> theta_grid(const ParameterBox& box, std::size_t points) {
  return box.grid(points);
}

double quadratic_coefficient(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 3) {
    throw Error(ErrorKind::InvalidArgument, "quadratic fit needs >= 3 matching points");
  }
  const auto m = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd a(m, 3);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double ti = t[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = ti;
    a(i, 2) = ti * ti;
    b(i) = y[static_cast<std::size_t>(i)];
  }
  return a.colPivHouseholderQr().solve(b)(2);
}

std::string limit_csv(const LimitComparison& table) {
  std::ostringstream os;
  os << "regime,n,theta,q_median,limit\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < table.thetas.size(); ++i) {
      os << table.regime << ',' << row.n << ',' << csv_number(table.thetas[i](0)) << ','
         << csv_number(row.q_median[i]) << ',' << csv_number(table.limit[i]) << '\n';
    }
  }
  return os.str();
}

LimitComparison run_limit_comparison(const ExperimentConfig& config,
                                     const std::vector<Eigen::VectorXd>& thetas) {
  config.validate();
  const DriftModel model = config.make_drift();
  const NoiseModel noise = config.make_noise();
  if (thetas.size() < 3) invalid("experiment.theta_grid_points", "need at least 3 grid points");
  for (const auto& th : thetas) {
    if (!model.box.contains(th)) invalid("experiment.theta_grid", "grid leaves the parameter box");
  }
  LimitComparison table;
  if (config.h == 0.5) {
    table.regime = "brownian";
  } else if (config.h > 0.5) {
    table.regime = "fractional";
  } else {
    invalid("noise.h", "limit comparison is defined for H >= 1/2 only");
  }
  table.thetas = thetas;
  table.energy = drift_energy(model, config.theta0, noise, thetas, config.oracle);
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    table.limit.push_back(table.regime == "brownian"
                              ? table.energy.mismatch[i]
                              : table.energy.at_truth - table.energy.at_theta[i]);
  }

  prepare_outdir(config.outdir);
  json grid_json = json::array();
  for (const auto& th : thetas) grid_json.push_back(to_vector(th));
  RecordStore store(config.outdir.empty() ? std::filesystem::path{} : config.outdir / "records.jsonl",
                    checksum_hex("limit:" + config.fingerprint() + grid_json.dump()));

  std::vector<double> first_axis;
  for (const auto& th : thetas) first_axis.push_back(th(0));
  const auto compute = [&](const Job& job) {
    const PathRecord path = simulate_for(config, model, noise, job);
    const ObservationScheme& scheme = path.plan.scheme;
    json rec = json::object();
    const NoiseParameters np = noise_for(config, noise, path.obs_y, scheme, rec);
    const StatisticInput input(path.obs_y, scheme, np, model);
    std::vector<double> q;
    double gap = 0.0;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      q.push_back(q_n(input, thetas[i]));
      gap = std::max(gap, std::abs(q.back() - table.limit[i]));
    }
    rec["q"] = q;
    rec["max_gap"] = gap;
    if (model.param_dim == 1) rec["quad_coef"] = quadratic_coefficient(first_axis, q);
    return rec;
  };
  const auto jobs = replication_jobs(config);
  auto records = run_jobs(jobs, compute, store, config.workers);
  store.rewrite(records);
  if (!config.outdir.empty()) records = RecordStore::read_all(config.outdir / "records.jsonl");

  std::vector<double> gaps_by_n;
  for (std::size_t n : config.ns) {
    LimitRow row;
    row.n = n;
    std::vector<std::vector<double>> qs(thetas.size());
    std::vector<double> gaps;
    std::size_t negative = 0, positive = 0, fitted = 0;
    for (const auto& rec : records) {
      if (rec.value("n", std::size_t{0}) != n) continue;
      if (!ok(rec)) {
        ++row.failed;
        continue;
      }
      const auto q = rec["q"].get<std::vector<double>>();
      for (std::size_t i = 0; i < q.size(); ++i) qs[i].push_back(q[i]);
      gaps.push_back(rec["max_gap"].get<double>());
      if (rec.contains("quad_coef")) {
        const double c = rec["quad_coef"].get<double>();
        ++fitted;
        if (c < 0.0) ++negative;
        if (c > 0.0) ++positive;
      }
    }
    row.completed = gaps.size();
    for (auto& column : qs) row.q_median.push_back(median(column));
    row.median_max_gap = median(gaps);
    if (fitted > 0) {
      row.frac_negative_curvature = static_cast<double>(negative) / static_cast<double>(fitted);
      row.frac_positive_curvature = static_cast<double>(positive) / static_cast<double>(fitted);
    }
    gaps_by_n.push_back(row.median_max_gap);
    table.rows.push_back(std::move(row));
  }
  table.gap_decreasing = decreasing(gaps_by_n, config.thresholds.strict_decrease);
  const LimitRow& last = table.rows.back();
  table.curvature_ok = (table.regime == "brownian" ? last.frac_positive_curvature
                                                   : last.frac_negative_curvature) >=
                       config.thresholds.sign_fraction;
  table.pass = table.gap_decreasing && table.curvature_ok;
  table.records = records;

  if (!config.outdir.empty()) {
    write_text(config.outdir / "summary.csv", limit_csv(table));
    json echo = config.to_json();
    echo["kind"] = "limit";
    echo["theta_grid"] = grid_json;
    write_text(config.outdir / "config.echo.json", echo.dump(2) + "\n");
    write_series(config.outdir / "plotdata" / "limit.csv", first_axis, table.limit);
    std::vector<double> x;
    for (const auto& row : table.rows) {
      write_series(config.outdir / "plotdata" / ("q_median_n" + std::to_string(row.n) + ".csv"),
                   first_axis, row.q_median);
      x.push_back(static_cast<double>(row.n));
    }
    write_series(config.outdir / "plotdata" / "median_max_gap.csv", x, gaps_by_n);
  }
  return table;
}

// --- quadratic-variation rates ----------------------------------------------

double qv_target_slope(double h) { return h > 0.75 ? -(4.0 - 4.0 * h) : -1.0; }

double loglog_slope(const std::vector<std::size_t>& ns, const std::vector<double>& values) {
  if (ns.size() != values.size() || ns.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "slope fit needs >= 2 matching points");
  }
  double mx = 0.0, my = 0.0;
  const double m = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    mx += std::log(static_cast<double>(ns[i])) / m;
    my += std::log(values[i]) / m;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double dx = std::log(static_cast<double>(ns[i])) - mx;
    sxy += dx * (std::log(values[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::string qv_csv(const QvRatesTable& table) {
  std::ostringstream os;
  os << "h,n,mean_square,slope,target\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.ns.size(); ++i) {
      os << csv_number(row.h) << ',' << row.ns[i] << ',' << csv_number(row.mean_square[i]) << ','
         << csv_number(row.slope) << ',' << csv_number(row.target) << '\n';
    }
  }
  return os.str();
}

QvRatesTable run_qv_rates(const QvRatesConfig& config) {
  if (config.hs.empty()) invalid("experiment.qv_hs", "at least one H is required");
  if (config.ns.size() < 2) invalid("experiment.qv_ns", "at least two n values are required");
  if (config.replications < 2) invalid("experiment.qv_replications", "must be >= 2");
  for (double h : config.hs) {
    if (!(h > 0.0 && h < 1.0)) invalid("experiment.qv_hs", "Hurst index must lie in (0,1)");
  }
  for (std::size_t i = 1; i < config.ns.size(); ++i) {
    if (config.ns[i] <= config.ns[i - 1]) invalid("experiment.qv_ns", "must be strictly increasing");
  }

  json fp = {{"hs", config.hs}, {"ns", config.ns}, {"replications", config.replications},
             {"seed", config.base_seed}};
  prepare_outdir(config.outdir);
  RecordStore store(config.outdir.empty() ? std::filesystem::path{} : config.outdir / "records.jsonl",
                    checksum_hex("qv:" + fp.dump()));

  std::vector<Job> jobs;
  for (std::size_t g = 0; g < config.hs.size(); ++g) {
    const auto h_bits = std::bit_cast<std::uint64_t>(config.hs[g]);
    for (std::size_t n : config.ns) {
      for (std::size_t r = 0; r < config.replications; ++r) {
        jobs.push_back({.key = "h=" + format_double(config.hs[g]) + "/n=" + std::to_string(n) +
                               "/r=" + std::to_string(r),
                        .group = g,
                        .n = n,
                        .replication = r,
                        .seed = hash64({config.base_seed, h_bits, n, r})});
      }
    }
  }
  const auto compute = [&](const Job& job) {
    const auto inc = sample_fgn({.h = HurstIndex(config.hs[job.group]), .step = 1.0,
                                 .count = job.n, .dims = 1, .seed = job.seed});
    json rec = json::object();
    rec["value"] = normalized_qv_sum({inc.data(), static_cast<std::size_t>(inc.size())});
    return rec;
  };
  auto records = run_jobs(jobs, compute, store, config.workers);
  store.rewrite(records);

  QvRatesTable table;
  table.pass = true;
  for (std::size_t g = 0; g < config.hs.size(); ++g) {
    QvRateRow row;
    row.h = config.hs[g];
    row.ns = config.ns;
    for (std::size_t n : config.ns) {
      double acc = 0.0;
      std::size_t count = 0;
      for (const auto& rec : records) {
        if (rec.value("group", std::size_t{0}) != g || rec.value("n", std::size_t{0}) != n || !ok(rec)) {
          continue;
        }
        const double v = rec["value"].get<double>();
        acc += v * v;
        ++count;
      }
      row.mean_square.push_back(count ? acc / static_cast<double>(count)
                                      : std::numeric_limits<double>::quiet_NaN());
    }
    row.slope = loglog_slope(row.ns, row.mean_square);
    row.target = qv_target_slope(row.h);
    row.pass = std::abs(row.slope - row.target) <= config.slope_tolerance;
    table.pass = table.pass && row.pass;
    table.rows.push_back(std::move(row));
  }
  table.records = std::move(records);

  if (!config.outdir.empty()) {
    write_text(config.outdir / "summary.csv", qv_csv(table));
    json echo = fp;
    echo["kind"] = "qv";
    echo["slope_tolerance"] = config.slope_tolerance;
    write_text(config.outdir / "config.echo.json", echo.dump(2) + "\n");
    for (const auto& row : table.rows) {
      std::vector<double> x(row.ns.begin(), row.ns.end());
      write_series(config.outdir / "plotdata" / ("qv_h" + format_double(row.h) + ".csv"), x,
                   row.mean_square);
    }
  }
  return table;
}

}  // namespace zsq
