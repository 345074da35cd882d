#include "zsq/simulate.hpp"

#include <cmath>
#include <limits>

#include "zsq/error.hpp"
#include "zsq/kahan.hpp"

namespace zsq {

ObservationScheme::ObservationScheme(std::size_t n, double alpha, double kappa)
    : n_(n), alpha_(alpha), kappa_(kappa) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "observation count n must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0,1)");
  }
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorKind::InvalidArgument, "kappa must be positive");
  }
  spacing_ = kappa * std::pow(static_cast<double>(n), -alpha);
}

double default_burn_in(const DriftModel& model) {
  const double c1 = model.dissipativity();
  return c1 > 0.0 ? 10.0 / c1 : 0.0;
}

std::size_t burn_in_steps(double burn_in, double fine_step) {
  if (burn_in < 0.0 || !std::isfinite(burn_in)) {
    throw Error(ErrorKind::InvalidArgument, "burn-in must be finite and >= 0");
  }
  if (burn_in == 0.0) return 0;
  // Tolerate representation error when burn_in is an exact multiple.
  return static_cast<std::size_t>(std::ceil(burn_in / fine_step * (1.0 - 1e-12)));
}

namespace {

struct Integrator {
  const DriftModel& model;
  Eigen::VectorXd theta;
  Eigen::MatrixXd sigma;  // d x m
  Eigen::MatrixXd dB;     // m x steps
  double step;

  // Advances `state` by one Euler step using noise column i; writes the
  // applied noise sigma * dB_i into `kick`.
  void advance(std::size_t i, Eigen::VectorXd& state, Eigen::VectorXd& drift,
               Eigen::VectorXd& kick) const {
    const auto d = state.size();
    model.drift({state.data(), static_cast<std::size_t>(d)},
                {theta.data(), static_cast<std::size_t>(theta.size())},
                {drift.data(), static_cast<std::size_t>(d)});
    const auto col = static_cast<Eigen::Index>(i);
    for (Eigen::Index r = 0; r < d; ++r) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < sigma.cols(); ++c) s += sigma(r, c) * dB(c, col);
      kick(r) = s;
      state(r) = (state(r) + drift(r) * step) + s;
      if (!std::isfinite(state(r))) {
        throw Error(ErrorKind::NonFinite,
                    "state became non-finite at fine step " + std::to_string(i));
      }
    }
  }
};

void check_inputs(const DriftModel& model, const Eigen::VectorXd& theta0, const NoiseModel& noise) {
  if (static_cast<std::size_t>(theta0.size()) != model.param_dim) {
    throw Error(ErrorKind::InvalidArgument, "theta0 has the wrong length");
  }
  if (!model.box.contains(theta0)) {
    throw Error(ErrorKind::InvalidArgument, "theta0 lies outside the parameter box");
  }
  if (noise.state_dim() != model.dim) {
    throw Error(ErrorKind::InvalidArgument, "sigma row count must equal the model dimension");
  }
}

Eigen::VectorXd initial_state(const Eigen::VectorXd& y0, std::size_t d) {
  if (y0.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  if (static_cast<std::size_t>(y0.size()) != d) {
    throw Error(ErrorKind::InvalidArgument, "y0 has the wrong dimension");
  }
  return y0;
}

}  // namespace

PathRecord simulate_path(const DriftModel& model, const Eigen::VectorXd& theta0,
                         const NoiseModel& noise, const SimulationPlan& plan) {
  check_inputs(model, theta0, noise);
  if (plan.substeps < 1) throw Error(ErrorKind::InvalidArgument, "substeps must be >= 1");
  const std::size_t d = model.dim;
  const double step = plan.fine_step();
  const double burn_time = plan.burn_in.value_or(default_burn_in(model));
  const std::size_t burn = burn_in_steps(burn_time, step);
  const std::size_t n = plan.scheme.n();
  const std::size_t window = n * plan.substeps;

  const FgnSpec spec{.h = noise.h(), .step = step, .count = burn + window,
                     .dims = noise.noise_dim(), .seed = plan.seed};
  const Integrator integrator{model, theta0, noise.sigma(), sample_fgn(spec), step};

  PathRecord rec{.plan = plan,
                 .model_name = model.name,
                 .theta0 = theta0,
                 .hurst = noise.h().value(),
                 .sigma = noise.sigma(),
                 .burn_in = burn_time,
                 .fine_times = {},
                 .fine_y = {},
                 .obs_y = {},
                 .obs_noise = {}};
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::VectorXd state = initial_state(plan.y0, d);
  Eigen::VectorXd drift(di);
  Eigen::VectorXd kick(di);
  for (std::size_t i = 0; i < burn; ++i) integrator.advance(i, state, drift, kick);

  rec.obs_y.resize(di, static_cast<Eigen::Index>(n + 1));
  rec.obs_noise.resize(di, static_cast<Eigen::Index>(n + 1));
  if (plan.keep_fine) {
    rec.fine_y.resize(di, static_cast<Eigen::Index>(window + 1));
    rec.fine_times.resize(window + 1);
    rec.fine_y.col(0) = state;
    rec.fine_times[0] = 0.0;
  }
  Eigen::VectorXd noise_level = Eigen::VectorXd::Zero(di);
  rec.obs_y.col(0) = state;
  rec.obs_noise.col(0) = noise_level;
  for (std::size_t i = 0; i < window; ++i) {
    integrator.advance(burn + i, state, drift, kick);
    noise_level += kick;
    const std::size_t fine_index = i + 1;
    if (plan.keep_fine) {
      rec.fine_y.col(static_cast<Eigen::Index>(fine_index)) = state;
      rec.fine_times[fine_index] = static_cast<double>(fine_index) * step;
    }
    if (fine_index % plan.substeps == 0) {
      const auto k = static_cast<Eigen::Index>(fine_index / plan.substeps);
      rec.obs_y.col(k) = state;
      rec.obs_noise.col(k) = noise_level;
    }
  }
  return rec;
}

std::vector<double> stationary_averages(const DriftModel& model, const Eigen::VectorXd& theta0,
                                        const NoiseModel& noise,
                                        std::span<const StateFunctional> functionals,
                                        const StationaryOptions& options) {
  check_inputs(model, theta0, noise);
  if (!(options.horizon > 0.0) || options.substeps_per_unit < 1) {
    throw Error(ErrorKind::InvalidArgument, "stationary horizon and substeps must be positive");
  }
  const double step = 1.0 / static_cast<double>(options.substeps_per_unit);
  const std::size_t burn = burn_in_steps(options.burn_in.value_or(default_burn_in(model)), step);
  const auto window = static_cast<std::size_t>(std::llround(options.horizon / step));
  if (window < 1) throw Error(ErrorKind::InvalidArgument, "stationary horizon is too short");

  const FgnSpec spec{.h = noise.h(), .step = step, .count = burn + window,
                     .dims = noise.noise_dim(), .seed = options.seed};
  const Integrator integrator{model, theta0, noise.sigma(), sample_fgn(spec), step};

  const auto di = static_cast<Eigen::Index>(model.dim);
  Eigen::VectorXd state = initial_state(options.y0, model.dim);
  Eigen::VectorXd drift(di);
  Eigen::VectorXd kick(di);
  for (std::size_t i = 0; i < burn; ++i) integrator.advance(i, state, drift, kick);

  std::vector<CompensatedSum> sums(functionals.size());
  for (std::size_t i = 0; i < window; ++i) {
    const std::span<const double> view{state.data(), model.dim};
    for (std::size_t f = 0; f < functionals.size(); ++f) sums[f] += functionals[f](view);
    integrator.advance(burn + i, state, drift, kick);
  }
  std::vector<double> averages(functionals.size());
  for (std::size_t f = 0; f < functionals.size(); ++f) {
    averages[f] = sums[f].value() / static_cast<double>(window);
  }
  return averages;
}

double stationary_moment(const DriftModel& model, const Eigen::VectorXd& theta0,
                         const NoiseModel& noise, const StateFunctional& g,
                         const StationaryOptions& options) {
  return stationary_averages(model, theta0, noise, std::span<const StateFunctional>(&g, 1), options)
      .front();
}

}  // namespace zsq
