#pragma once

#include <span>

#include <Eigen/Dense>

#include "zsq/models.hpp"
#include "zsq/simulate.hpp"

namespace zsq {

/// Noise parameters as they enter the statistic: either the known (H, |sigma|^2)
/// of a NoiseModel or quadratic-variation estimates of them.
struct NoiseParameters {
  double h = 0.5;
  double sigma_norm_sq = 1.0;

  static NoiseParameters from(const NoiseModel& noise) {
    return {noise.h().value(), noise.sigma_norm_sq()};
  }
};

/// Observations Y_{t_0..t_n} (d x (n+1)) together with what Q_n needs.
/// Holds references; the referenced objects must outlive the input.
class StatisticInput {
 public:
  StatisticInput(const Eigen::MatrixXd& obs_y, const ObservationScheme& scheme,
                 NoiseParameters noise, const DriftModel& model);

  const Eigen::MatrixXd& obs_y() const noexcept { return *obs_y_; }
  const ObservationScheme& scheme() const noexcept { return *scheme_; }
  const NoiseParameters& noise() const noexcept { return noise_; }
  const DriftModel& model() const noexcept { return *model_; }

 private:
  const Eigen::MatrixXd* obs_y_;
  const ObservationScheme* scheme_;
  NoiseParameters noise_;
  const DriftModel* model_;
};

/// Q_n(theta) = 1/(n a^2) sum_k (|dY_k - b(Y_k; theta) a|^2 - |sigma|^2 a^{2H}),
/// a = alpha_n, accumulated with compensated summation.
double q_n(const StatisticInput& input, const Eigen::VectorXd& theta);

struct StatisticDecomposition {
  double q = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
  /// q - (q1 - 2 q2 + q3).
  double residual = 0.0;
  /// The three r_k sums recomputed directly from the fine grid:
  /// r_sq - r_drift + r_noise, with
  ///   r_sq    = 1/(n a^2) sum |r_k|^2
  ///   r_drift = 2/(n a)   sum <db(Y_k), r_k>
  ///   r_noise = 2/(n a^2) sum <dF_k, r_k>
  double r_sq = 0.0;
  double r_drift = 0.0;
  double r_noise = 0.0;

  double residual_direct() const noexcept { return r_sq - r_drift + r_noise; }
};

/// Simulation-only diagnostic. r_k uses the left-point rule on the fine grid,
/// matching the Euler integrator. Throws Error{MissingFineGrid}.
StatisticDecomposition decompose(const StatisticInput& input, const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& theta0, const PathRecord& path);

/// Q^(3) = 1/(n a^2) sum_k (|dF_k|^2 - |sigma|^2 a^{2H}) over the given columns.
double qv_statistic(const Eigen::MatrixXd& obs, const ObservationScheme& scheme,
                    NoiseParameters noise);

/// Same with an explicit spacing; n is the number of increments (>= 1).
double qv_statistic(const Eigen::MatrixXd& obs, double spacing, NoiseParameters noise);

/// (1/n) sum_k (x_k^2 - 1) for a unit-variance increment sequence.
double normalized_qv_sum(std::span<const double> increments);

}  // namespace zsq
