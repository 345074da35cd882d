#include "zsq/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <list>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "zsq/config.hpp"
#include "zsq/estimate.hpp"
#include "zsq/harness.hpp"
#include "zsq/models.hpp"
#include "zsq/path_io.hpp"
#include "zsq/simulate.hpp"
#include "zsq/statistic.hpp"

namespace zsq {

using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFinite:
    case ErrorKind::CirculantNotPSD:
      return kExitSimulation;
    case ErrorKind::NonFiniteStatistic:
    case ErrorKind::DegeneratePath:
    case ErrorKind::ZeroVariation:
    case ErrorKind::MissingFineGrid:
    case ErrorKind::DegeneratePair:
      return kExitEstimation;
    default:
      return kExitValidation;
  }
}

namespace {

/// Shortest decimal that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

/// Flags that mirror config keys. Unset flags leave the file value alone.
struct Overrides {
  std::string config_file;
  std::vector<std::string> sets;
  std::list<std::pair<std::string, std::optional<std::string>>> flags;

  void bind(CLI::App& app, const std::string& flag, const std::string& key,
            const std::string& help) {
    flags.emplace_back(key, std::nullopt);
    auto& slot = flags.back().second;
    app.add_option_function<std::string>(
        flag, [&slot](const std::string& v) { slot = v; }, help + " (" + key + ")");
  }

  KeyValueConfig resolve() const {
    KeyValueConfig cfg;
    if (!config_file.empty()) cfg = KeyValueConfig::load(config_file);
    for (const auto& s : sets) cfg.set_assignment(s);
    for (const auto& [key, value] : flags) {
      if (value) cfg.set(key, *value);
    }
    return cfg;
  }
};

void add_common(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_file, "key=value config file");
  app.add_option("--set", o.sets, "override one key, key=value (repeatable)");
  o.bind(app, "--seed", "experiment.seed", "seed");
}

DriftModel model_from(const KeyValueConfig& cfg) {
  DriftModel model = make_model(cfg.get_string("model.name", "fou"), cfg.get_size("model.dim", 1));
  if (cfg.has("model.box_lower") || cfg.has("model.box_upper")) {
    cfg.require("model.box_lower");
    cfg.require("model.box_upper");
    const auto lo = cfg.get_doubles("model.box_lower");
    const auto hi = cfg.get_doubles("model.box_upper");
    model.box = ParameterBox(Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                             Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())));
  }
  return model;
}

NoiseModel noise_from(const KeyValueConfig& cfg, std::size_t dim) {
  Eigen::MatrixXd sigma = cfg.get_matrix("noise.sigma");
  if (sigma.size() == 0) {
    sigma = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  }
  try {
    return NoiseModel(HurstIndex(cfg.get_double("noise.h", 0.7)), std::move(sigma));
  } catch (const Error& e) {
    throw Error(ErrorKind::Validation, std::string("noise.h/noise.sigma: ") + e.what());
  }
}

std::string matrix_text(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) out += ';';
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += shortest(m(r, c));
    }
  }
  return out;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

int cmd_simulate(const Overrides& o, const std::string& out_stem, bool hexfloat,
                 std::ostream& out) {
  const KeyValueConfig cfg = o.resolve();
  cfg.require("model.theta0");
  const DriftModel model = model_from(cfg);
  const auto theta = cfg.get_doubles("model.theta0");
  const Eigen::VectorXd theta0 =
      Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  if (theta0.size() != static_cast<Eigen::Index>(model.param_dim)) {
    throw Error(ErrorKind::Validation,
                "model.theta0: expected " + std::to_string(model.param_dim) + " values");
  }
  if (!model.box.contains(theta0)) {
    throw Error(ErrorKind::Validation, "model.theta0: lies outside the parameter box");
  }
  const NoiseModel noise = noise_from(cfg, model.dim);
  std::optional<ObservationScheme> scheme;
  try {
    scheme.emplace(cfg.get_size("scheme.n", 1024), cfg.get_double("scheme.alpha", 0.5),
                   cfg.get_double("scheme.kappa", 1.0));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Validation) throw;
    throw Error(ErrorKind::Validation, std::string("scheme: ") + e.what());
  }
  std::optional<double> burn_in;
  if (cfg.has("scheme.burn_in")) burn_in = cfg.get_double("scheme.burn_in", 0.0);
  const SimulationPlan plan{.scheme = *scheme,
                            .substeps = cfg.get_size("scheme.substeps", 8),
                            .burn_in = burn_in,
                            .y0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dim)),
                            .seed = cfg.get_u64("experiment.seed", 0),
                            .keep_fine = false};
  const PathRecord rec = simulate_path(model, theta0, noise, plan);
  const auto enc = hexfloat ? FloatEncoding::HexFloat : FloatEncoding::Decimal17;
  const std::filesystem::path csv = out_stem + ".csv";
  const std::filesystem::path meta = out_stem + ".json";
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  write_path_csv(rec, csv, enc);
  write_path_sidecar(rec, meta, enc);
  out << "n=" << scheme->n() << " T_n=" << shortest(scheme->horizon())
      << " alpha_n=" << shortest(scheme->spacing())
      << " min_y=" << shortest(rec.obs_y.minCoeff())
      << " max_y=" << shortest(rec.obs_y.maxCoeff()) << '\n'
      << "wrote " << csv.string() << " and " << meta.string() << '\n';
  return kExitOk;
}

/// Fills model/noise/scheme keys from a simulate sidecar unless already set.
void apply_sidecar(KeyValueConfig& cfg, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) return;
  const json meta = json::parse(in, nullptr, false);
  if (meta.is_discarded()) throw Error(ErrorKind::Parse, file.string() + ": invalid JSON sidecar");
  const auto fill = [&](const std::string& key, const std::string& value) {
    if (!cfg.has(key)) cfg.set(key, value);
  };
  try {
    fill("model.name", meta.at("model").at("name").get<std::string>());
    fill("model.dim", std::to_string(meta.at("model").at("dim").get<std::size_t>()));
    fill("noise.h", shortest(meta.at("noise").at("h").get<double>()));
    fill("scheme.alpha", shortest(meta.at("scheme").at("alpha").get<double>()));
    fill("scheme.kappa", shortest(meta.at("scheme").at("kappa").get<double>()));
    const auto rows = meta.at("noise").at("sigma").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd sigma(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        sigma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
    }
    if (sigma.size() > 0) fill("noise.sigma", matrix_text(sigma));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
  }
}

int cmd_estimate(const Overrides& o, const std::string& data, const std::string& sidecar,
                 bool closed_form, bool estimate_h, std::ostream& out) {
  KeyValueConfig cfg = o.resolve();
  std::filesystem::path meta = sidecar;
  if (meta.empty()) meta = std::filesystem::path(data).replace_extension(".json");
  apply_sidecar(cfg, meta);

  const ObservationTable table = read_path_csv(data);
  const auto n = static_cast<std::size_t>(table.y.cols()) - 1;
  const DriftModel model = model_from(cfg);
  if (static_cast<std::size_t>(table.y.rows()) != model.dim) {
    throw Error(ErrorKind::Validation, "model.dim: data has " + std::to_string(table.y.rows()) +
                                           " state columns");
  }
  const ObservationScheme scheme(n, cfg.get_double("scheme.alpha", 0.5),
                                 cfg.get_double("scheme.kappa", 1.0));
  for (std::size_t k = 0; k <= n; ++k) {
    const double expect = scheme.time(k);
    if (std::abs(table.times[k] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
      throw Error(ErrorKind::Validation,
                  "scheme.alpha/scheme.kappa: time column does not match alpha_n at row " +
                      std::to_string(k + 2));
    }
  }

  json result;
  result["n"] = n;
  result["model"] = model.name;
  NoiseParameters np{};
  if (estimate_h || cfg.get_bool("noise.estimate", false)) {
    const HSigmaEstimate hs = estimate_h_sigma(table.y, scheme);
    np = {hs.h_hat, hs.sigma_norm_sq_hat};
    result["mode"] = "plug-in";
    result["h_sigma"] = {{"h_hat", hs.h_hat},
                         {"sigma_norm_sq_hat", hs.sigma_norm_sq_hat},
                         {"scales_used", {hs.scales_used.first, hs.scales_used.second}},
                         {"v1", hs.v1},
                         {"v2", hs.v2}};
  } else {
    np = NoiseParameters::from(noise_from(cfg, model.dim));
    result["mode"] = "known";
  }
  const StatisticInput input(table.y, scheme, np, model);
  const EstimationResult est =
      zero_squares(input, {.grid_points = cfg.get_size("experiment.grid_points", 33), .refine = {}});
  result["zero_squares"] = {{"theta_hat", vec_json(est.theta_hat)},
                            {"q_at_min", est.q_at_min},
                            {"iterations", est.iterations},
                            {"grid_stage_min", vec_json(est.grid_stage_min)},
                            {"grid_stage_q", est.grid_stage_q},
                            {"converged", est.converged}};
  if (closed_form) {
    if (model.name != "fou") {
      throw Error(ErrorKind::Validation, "model.name: --closed-form needs the fou model");
    }
    const ClosedFormResult cf = closed_form_fou(table.y, scheme, np, model.box);
    result["closed_form"] = {{"theta_hat", cf.theta_hat},
                             {"plus_root", cf.plus_root},
                             {"discriminant", cf.discriminant},
                             {"clamped", cf.clamped},
                             {"plus_root_admissible", cf.plus_root_admissible}};
    result["abs_difference"] = std::abs(cf.theta_hat - est.theta_hat(0));
  }
  out << result.dump() << '\n';
  return kExitOk;
}

int cmd_experiment(const Overrides& o, std::ostream& out, std::ostream& err) {
  const KeyValueConfig cfg = o.resolve();
  const auto kinds = cfg.get_strings("experiment.kinds");
  if (kinds.empty()) throw Error(ErrorKind::Validation, "experiment.kinds: no experiments listed");
  for (const auto& kind : kinds) {
    if (kind != kKindConsistency && kind != kKindLimit && kind != kKindQv) {
      throw Error(ErrorKind::Validation, "experiment.kinds: unknown experiment '" + kind + "'");
    }
  }
  const std::filesystem::path root = cfg.get_string("experiment.outdir", "campaign");
  const bool needs_model =
      std::any_of(kinds.begin(), kinds.end(), [](const std::string& k) { return k != kKindQv; });
  std::optional<ExperimentConfig> base;
  if (needs_model) base = experiment_config(cfg);
  const QvRatesConfig qv_base = qv_config(cfg);

  std::filesystem::create_directories(root);
  {
    json echo = json::object();
    for (const auto& [k, v] : cfg.values()) echo[k] = v;
    std::ofstream(root / "config.echo.json") << echo.dump(2) << '\n';
  }

  bool all_pass = true;
  const auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    out << name << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << '\n';
    all_pass = all_pass && pass;
  };
  for (const auto& kind : kinds) {
    err << "running " << kind << '\n';
    if (kind == kKindConsistency) {
      ExperimentConfig c = *base;
      c.outdir = root / "consistency";
      const auto s = run_consistency(c);
      std::string detail = "median_error=";
      for (std::size_t i = 0; i < s.rows.size(); ++i) {
        detail += (i ? "," : "") + shortest(s.rows[i].median_error);
      }
      detail += " frac_within_tol=" + shortest(s.rows.back().frac_within_tol);
      report("consistency", s.pass, detail);
    } else if (kind == kKindLimit) {
      std::vector<double> hs = cfg.get_doubles("experiment.limit_hs");
      if (hs.empty()) hs.push_back(base->h);
      for (double h : hs) {
        ExperimentConfig c = *base;
        c.h = h;
        c.outdir = root / ("limit-h" + shortest(h));
        const auto thetas = theta_grid(c.make_drift().box, c.theta_grid_points);
        const auto t = run_limit_comparison(c, thetas);
        std::string detail = "regime=" + t.regime + " median_max_gap=";
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          detail += (i ? "," : "") + shortest(t.rows[i].median_max_gap);
        }
        detail += " curvature_fraction=" +
                  shortest(t.regime == "brownian" ? t.rows.back().frac_positive_curvature
                                                       : t.rows.back().frac_negative_curvature);
        report("limit H=" + shortest(h), t.pass, detail);
      }
    } else {
      QvRatesConfig c = qv_base;
      c.outdir = root / "qv";
      const auto t = run_qv_rates(c);
      std::string detail;
      for (const auto& row : t.rows) {
        detail += "H=" + shortest(row.h) + " slope=" + shortest(row.slope) +
                  " target=" + shortest(row.target) + " ";
      }
      report("qv", t.pass, detail);
    }
  }
  return all_pass ? kExitOk : kExitExperimentFail;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-squares drift estimation for SDEs driven by fractional noise"};
  app.set_help_flag("--help", "print help, including every config key");
  app.require_subcommand(1);
  app.footer(config_help());

  Overrides sim_o, est_o, exp_o;

  auto* sim = app.add_subcommand("simulate", "simulate one observed path");
  add_common(*sim, sim_o);
  sim_o.bind(*sim, "--model", "model.name", "drift family");
  sim_o.bind(*sim, "--dim", "model.dim", "state dimension");
  sim_o.bind(*sim, "--theta0", "model.theta0", "true parameter");
  sim_o.bind(*sim, "--h", "noise.h", "Hurst index");
  sim_o.bind(*sim, "--sigma", "noise.sigma", "diffusion matrix");
  sim_o.bind(*sim, "--n", "scheme.n", "observation count");
  sim_o.bind(*sim, "--alpha", "scheme.alpha", "spacing exponent");
  sim_o.bind(*sim, "--kappa", "scheme.kappa", "spacing scale");
  sim_o.bind(*sim, "--substeps", "scheme.substeps", "Euler steps per interval");
  sim_o.bind(*sim, "--burn-in", "scheme.burn_in", "burn-in time");
  std::string out_stem = "path";
  bool hexfloat = false;
  sim->add_option("--out", out_stem, "output stem; writes <stem>.csv and <stem>.json");
  sim->add_flag("--hexfloat", hexfloat, "hex-float encoding instead of 17-digit decimal");
  sim->footer(config_help());

  auto* est = app.add_subcommand("estimate", "estimate theta from an observation CSV");
  add_common(*est, est_o);
  est_o.bind(*est, "--model", "model.name", "drift family");
  est_o.bind(*est, "--dim", "model.dim", "state dimension");
  est_o.bind(*est, "--h", "noise.h", "Hurst index");
  est_o.bind(*est, "--sigma", "noise.sigma", "diffusion matrix");
  est_o.bind(*est, "--alpha", "scheme.alpha", "spacing exponent");
  est_o.bind(*est, "--kappa", "scheme.kappa", "spacing scale");
  est_o.bind(*est, "--grid-points", "experiment.grid_points", "grid nodes per axis");
  std::string data, sidecar;
  bool closed_form = false, estimate_h = false;
  est->add_option("--data", data, "observation CSV (t,y1..yd[,F1..Fd])")->required();
  est->add_option("--meta", sidecar, "JSON sidecar (default: <data>.json)");
  est->add_flag("--closed-form", closed_form, "also report the explicit fOU root");
  est->add_flag("--estimate-h", estimate_h, "plug-in mode: estimate H and |sigma|^2 first");
  est->footer(config_help());

  auto* exp = app.add_subcommand("experiment", "run a Monte Carlo campaign");
  add_common(*exp, exp_o);
  exp_o.bind(*exp, "--outdir", "experiment.outdir", "output directory");
  exp_o.bind(*exp, "--workers", "experiment.workers", "worker threads");
  exp_o.bind(*exp, "--replications", "experiment.replications", "replications per n");
  exp->footer(config_help());

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_o, out_stem, hexfloat, out);
    if (est->parsed()) return cmd_estimate(est_o, data, sidecar, closed_form, estimate_h, out);
    return cmd_experiment(exp_o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: Io: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace zsq
