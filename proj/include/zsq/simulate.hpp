#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zsq/models.hpp"

namespace zsq {

/// Uniform observation grid t_k = k * kappa * n^(-alpha), k = 0..n.
class ObservationScheme {
 public:
  ObservationScheme(std::size_t n, double alpha, double kappa);

  std::size_t n() const noexcept { return n_; }
  double alpha() const noexcept { return alpha_; }
  double kappa() const noexcept { return kappa_; }
  /// alpha_n = kappa * n^(-alpha).
  double spacing() const noexcept { return spacing_; }
  /// T_n = n * alpha_n.
  double horizon() const noexcept { return time(n_); }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * spacing_; }

 private:
  std::size_t n_;
  double alpha_;
  double kappa_;
  double spacing_;
};

struct SimulationPlan {
  ObservationScheme scheme;
  std::size_t substeps = 8;
  /// Burn-in time simulated before t = 0 and discarded. When unset, 10 / c1
  /// for the model's dissipativity constant c1 (0 if c1 <= 0).
  std::optional<double> burn_in;
  Eigen::VectorXd y0;
  std::uint64_t seed = 0;
  bool keep_fine = true;

  double fine_step() const { return scheme.spacing() / static_cast<double>(substeps); }
};

double default_burn_in(const DriftModel& model);

/// Number of fine steps used for a burn-in of `burn_in` time units.
std::size_t burn_in_steps(double burn_in, double fine_step);

struct PathRecord {
  SimulationPlan plan;
  std::string model_name;
  Eigen::VectorXd theta0;
  double hurst = 0.5;
  Eigen::MatrixXd sigma;
  double burn_in = 0.0;  // resolved burn-in time actually simulated

  std::vector<double> fine_times;   // empty unless plan.keep_fine
  Eigen::MatrixXd fine_y;           // d x (n * substeps + 1)
  Eigen::MatrixXd obs_y;            // d x (n + 1)
  Eigen::MatrixXd obs_noise;        // d x (n + 1), F re-zeroed at t = 0

  bool has_fine() const noexcept { return fine_y.cols() > 0; }
};

/// Explicit Euler for dY = b(Y; theta0) dt + sigma dB on the fine grid, with a
/// burn-in segment driven by the same fBm stream. Throws Error{NonFinite}.
PathRecord simulate_path(const DriftModel& model, const Eigen::VectorXd& theta0,
                         const NoiseModel& noise, const SimulationPlan& plan);

using StateFunctional = std::function<double(std::span<const double> state)>;

struct StationaryOptions {
  double horizon = 5e3;              // averaging window after burn-in
  std::size_t substeps_per_unit = 16;
  std::optional<double> burn_in;     // defaults to default_burn_in(model)
  std::uint64_t seed = 0;
  Eigen::VectorXd y0;                // zero when empty
};

/// Left-point time averages of every functional along one long trajectory
/// after burn-in. The trajectory is not stored.
std::vector<double> stationary_averages(const DriftModel& model, const Eigen::VectorXd& theta0,
                                        const NoiseModel& noise,
                                        std::span<const StateFunctional> functionals,
                                        const StationaryOptions& options);

double stationary_moment(const DriftModel& model, const Eigen::VectorXd& theta0,
                         const NoiseModel& noise, const StateFunctional& g,
                         const StationaryOptions& options);

}  // namespace zsq
