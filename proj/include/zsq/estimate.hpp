#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsq/models.hpp"
#include "zsq/nelder_mead.hpp"
#include "zsq/simulate.hpp"
#include "zsq/statistic.hpp"

namespace zsq {

struct EstimationResult {
  Eigen::VectorXd theta_hat;
  double q_at_min = 0.0;  // Q_n(theta_hat), signed
  std::size_t iterations = 0;
  Eigen::VectorXd grid_stage_min;
  double grid_stage_q = 0.0;
  bool converged = false;
};

struct ZeroSquaresOptions {
  std::size_t grid_points = 33;  // per axis
  NelderMeadOptions refine{};
};

/// Two-stage minimization of |f| over a box: a uniform grid (ties go to the
/// lexicographically smallest index) followed by projected Nelder-Mead from
/// the grid minimizer. Throws Error{NonFiniteStatistic} naming the offending
/// parameter when f is NaN.
EstimationResult minimize_abs(const std::function<double(const Eigen::VectorXd&)>& f,
                              const ParameterBox& box, const ZeroSquaresOptions& options = {});

/// argmin over the model box of |Q_n(theta)|.
EstimationResult zero_squares(const StatisticInput& input, const ZeroSquaresOptions& options = {});

struct ClosedFormResult {
  double theta_hat = 0.0;   // minus root
  double plus_root = 0.0;
  double discriminant = 0.0;
  bool clamped = false;     // discriminant was negative and set to 0
  bool plus_root_admissible = false;  // plus root also inside the supplied box
};

/// Explicit root of Q_n for b(x; theta) = theta x with d = 1. Throws
/// Error{DegeneratePath} when sum Y_k^2 = 0.
ClosedFormResult closed_form_fou(const Eigen::MatrixXd& obs_y, const ObservationScheme& scheme,
                                 NoiseParameters noise,
                                 const std::optional<ParameterBox>& box = std::nullopt);

struct HSigmaEstimate {
  double h_hat = 0.5;
  double sigma_norm_sq_hat = 1.0;
  std::pair<double, double> scales_used{};  // (alpha_n, 2 alpha_n)
  double v1 = 0.0;
  double v2 = 0.0;
};

/// H and |sigma|^2 from quadratic variations at spacings alpha_n and
/// 2 alpha_n. Throws Error{ZeroVariation}.
HSigmaEstimate estimate_h_sigma(const Eigen::MatrixXd& obs_y, const ObservationScheme& scheme);

/// Inversion step of estimate_h_sigma from the two variations directly.
HSigmaEstimate h_sigma_from_variations(double v1, double v2, std::size_t n, double spacing);

struct OracleOptions {
  double horizon = 5e3;
  std::size_t substeps_per_unit = 16;
  std::size_t seeds = 8;
  std::uint64_t base_seed = 0x5eed;
  std::optional<double> burn_in;
};

/// Stationary second moments E|b(Y; theta)|^2 for theta0 and every theta,
/// averaged over independent long trajectories. Shared by the limit curves.
struct DriftEnergy {
  double at_truth = 0.0;
  std::vector<double> at_theta;        // E|b(Y; theta)|^2
  std::vector<double> mismatch;        // E|b(Y; theta0) - b(Y; theta)|^2
};

DriftEnergy drift_energy(const DriftModel& model, const Eigen::VectorXd& theta0,
                         const NoiseModel& noise, const std::vector<Eigen::VectorXd>& thetas,
                         const OracleOptions& options = {});

/// L(theta) = E|b(Y; theta0)|^2 - E|b(Y; theta)|^2 under the stationary law.
std::vector<double> limit_curve(const DriftModel& model, const Eigen::VectorXd& theta0,
                                const NoiseModel& noise, const std::vector<Eigen::VectorXd>& thetas,
                                const OracleOptions& options = {});

/// E|b(Y; theta0) - b(Y; theta)|^2, the limit for Brownian noise.
std::vector<double> brownian_limit_curve(const DriftModel& model, const Eigen::VectorXd& theta0,
                                         const NoiseModel& noise,
                                         const std::vector<Eigen::VectorXd>& thetas,
                                         const OracleOptions& options = {});

}  // namespace zsq
