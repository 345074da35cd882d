#include "zsq/estimate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "zsq/error.hpp"
#include "zsq/kahan.hpp"
#include "zsq/rng.hpp"

namespace zsq {

namespace {

std::string describe(const Eigen::VectorXd& theta) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < theta.size(); ++i) os << (i ? ", " : "") << theta(i);
  os << ')';
  return os.str();
}

// Drift output buffer that avoids the heap for small state dimensions.
class DriftScratch {
 public:
  explicit DriftScratch(std::size_t d) : d_(d) {
    if (d > local_.size()) heap_.resize(d);
  }
  std::span<double> span() { return {heap_.empty() ? local_.data() : heap_.data(), d_}; }

 private:
  std::size_t d_;
  std::array<double, 8> local_{};
  std::vector<double> heap_;
};

}  // namespace

EstimationResult minimize_abs(const std::function<double(const Eigen::VectorXd&)>& f,
                              const ParameterBox& box, const ZeroSquaresOptions& options) {
  const auto checked_abs = [&f](const Eigen::VectorXd& theta) {
    const double v = f(theta);
    if (std::isnan(v)) {
      throw Error(ErrorKind::NonFiniteStatistic, "statistic is NaN at theta = " + describe(theta));
    }
    return std::abs(v);
  };

  const auto grid = box.grid(options.grid_points);
  std::size_t best = 0;
  double best_value = checked_abs(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = checked_abs(grid[i]);
    if (v < best_value) {
      best = i;
      best_value = v;
    }
  }

  const Eigen::VectorXd step =
      (box.upper() - box.lower()) / static_cast<double>(options.grid_points - 1);
  const auto refined = nelder_mead(checked_abs, box, grid[best], step, options.refine);

  EstimationResult result;
  result.grid_stage_min = grid[best];
  result.grid_stage_q = f(grid[best]);
  result.theta_hat = box.project(refined.best);
  result.q_at_min = f(result.theta_hat);
  result.iterations = refined.iterations;
  result.converged = refined.converged;
  return result;
}

EstimationResult zero_squares(const StatisticInput& input, const ZeroSquaresOptions& options) {
  return minimize_abs([&input](const Eigen::VectorXd& theta) { return q_n(input, theta); },
                      input.model().box, options);
}

ClosedFormResult closed_form_fou(const Eigen::MatrixXd& obs_y, const ObservationScheme& scheme,
                                 NoiseParameters noise, const std::optional<ParameterBox>& box) {
  if (obs_y.rows() != 1) {
    throw Error(ErrorKind::InvalidArgument, "closed-form estimator needs one-dimensional data");
  }
  if (static_cast<std::size_t>(obs_y.cols()) != scheme.n() + 1) {
    throw Error(ErrorKind::InvalidArgument, "observation count must equal n + 1");
  }
  const double a = scheme.spacing();
  const double offset = noise.sigma_norm_sq * std::pow(a, 2.0 * noise.h);
  CompensatedSum s1, s2, s3;
  for (Eigen::Index k = 0; k + 1 < obs_y.cols(); ++k) {
    const double y = obs_y(0, k);
    const double dy = obs_y(0, k + 1) - y;
    s1 += y * dy;
    s2 += y * y;
    s3 += dy * dy - offset;
  }
  if (s2.value() == 0.0) {
    throw Error(ErrorKind::DegeneratePath, "all observations Y_0..Y_{n-1} are zero");
  }
  const double centre = s1.value() / (s2.value() * a);
  ClosedFormResult out;
  out.discriminant = centre * centre - s3.value() / (s2.value() * a * a);
  double disc = out.discriminant;
  if (disc < 0.0) {
    out.clamped = true;
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  out.theta_hat = centre - root;
  out.plus_root = centre + root;
  if (box) {
    out.plus_root_admissible = box->contains(Eigen::VectorXd::Constant(1, out.plus_root));
  }
  return out;
}

HSigmaEstimate h_sigma_from_variations(double v1, double v2, std::size_t n, double spacing) {
  if (!(v1 > 0.0)) throw Error(ErrorKind::ZeroVariation, "quadratic variation V1 is zero");
  if (!(v2 > 0.0)) throw Error(ErrorKind::ZeroVariation, "quadratic variation V2 is zero");
  HSigmaEstimate e;
  e.v1 = v1;
  e.v2 = v2;
  e.h_hat = std::clamp(0.5 * (1.0 + std::log2(v2 / v1)), 0.01, 0.99);
  e.sigma_norm_sq_hat = v1 / (static_cast<double>(n) * std::pow(spacing, 2.0 * e.h_hat));
  e.scales_used = {spacing, 2.0 * spacing};
  return e;
}

HSigmaEstimate estimate_h_sigma(const Eigen::MatrixXd& obs_y, const ObservationScheme& scheme) {
  const std::size_t n = scheme.n();
  if (n < 4) throw Error(ErrorKind::InvalidArgument, "H estimation needs n >= 4");
  if (static_cast<std::size_t>(obs_y.cols()) != n + 1) {
    throw Error(ErrorKind::InvalidArgument, "observation count must equal n + 1");
  }
  CompensatedSum v1, v2;
  for (Eigen::Index k = 0; k + 1 < obs_y.cols(); ++k) {
    v1 += (obs_y.col(k + 1) - obs_y.col(k)).squaredNorm();
  }
  const std::size_t pairs = n / 2;
  for (std::size_t k = 0; k < pairs; ++k) {
    const auto i = static_cast<Eigen::Index>(2 * k);
    v2 += (obs_y.col(i + 2) - obs_y.col(i)).squaredNorm();
  }
  // For odd n the coarse sum has one term fewer than n/2; rescale so the
  // ratio keeps its 2^(2H-1) expectation.
  const double coarse = v2.value() * (static_cast<double>(n) / 2.0) / static_cast<double>(pairs);
  return h_sigma_from_variations(v1.value(), coarse, n, scheme.spacing());
}

DriftEnergy drift_energy(const DriftModel& model, const Eigen::VectorXd& theta0,
                         const NoiseModel& noise, const std::vector<Eigen::VectorXd>& thetas,
                         const OracleOptions& options) {
  if (options.seeds < 1) throw Error(ErrorKind::InvalidArgument, "oracle needs at least one seed");
  for (const auto& th : thetas) {
    if (!model.box.contains(th)) {
      throw Error(ErrorKind::InvalidArgument, "theta " + describe(th) + " lies outside the box");
    }
  }
  const auto d = model.dim;
  const auto sq_drift = [&model, d](const Eigen::VectorXd& theta) -> StateFunctional {
    return [&model, d, theta](std::span<const double> x) {
      DriftScratch b(d);
      model.drift(x, {theta.data(), static_cast<std::size_t>(theta.size())}, b.span());
      double s = 0.0;
      for (double v : b.span()) s += v * v;
      return s;
    };
  };
  const auto sq_mismatch = [&model, &theta0, d](const Eigen::VectorXd& theta) -> StateFunctional {
    return [&model, &theta0, d, theta](std::span<const double> x) {
      DriftScratch b(d), b0(d);
      model.drift(x, {theta.data(), static_cast<std::size_t>(theta.size())}, b.span());
      model.drift(x, {theta0.data(), static_cast<std::size_t>(theta0.size())}, b0.span());
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += (b0.span()[i] - b.span()[i]) * (b0.span()[i] - b.span()[i]);
      return s;
    };
  };

  std::vector<StateFunctional> functionals;
  functionals.push_back(sq_drift(theta0));
  for (const auto& th : thetas) functionals.push_back(sq_drift(th));
  for (const auto& th : thetas) functionals.push_back(sq_mismatch(th));

  std::vector<double> totals(functionals.size(), 0.0);
  for (std::size_t s = 0; s < options.seeds; ++s) {
    const StationaryOptions run{.horizon = options.horizon,
                                .substeps_per_unit = options.substeps_per_unit,
                                .burn_in = options.burn_in,
                                .seed = hash64({options.base_seed, s}),
                                .y0 = {}};
    const auto avg = stationary_averages(model, theta0, noise, functionals, run);
    for (std::size_t f = 0; f < avg.size(); ++f) totals[f] += avg[f];
  }
  const double seeds = static_cast<double>(options.seeds);
  DriftEnergy e;
  e.at_truth = totals[0] / seeds;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    e.at_theta.push_back(totals[1 + i] / seeds);
    e.mismatch.push_back(totals[1 + thetas.size() + i] / seeds);
  }
  return e;
}

std::vector<double> limit_curve(const DriftModel& model, const Eigen::VectorXd& theta0,
                                const NoiseModel& noise, const std::vector<Eigen::VectorXd>& thetas,
                                const OracleOptions& options) {
  const auto e = drift_energy(model, theta0, noise, thetas, options);
  std::vector<double> out;
  out.reserve(thetas.size());
  for (double v : e.at_theta) out.push_back(e.at_truth - v);
  return out;
}

std::vector<double> brownian_limit_curve(const DriftModel& model, const Eigen::VectorXd& theta0,
                                         const NoiseModel& noise,
                                         const std::vector<Eigen::VectorXd>& thetas,
                                         const OracleOptions& options) {
  return drift_energy(model, theta0, noise, thetas, options).mismatch;
}

}  // namespace zsq
