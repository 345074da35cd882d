#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zsq/fgn.hpp"

namespace zsq {

/// Axis-aligned compact parameter set.
class ParameterBox {
 public:
  ParameterBox(Eigen::VectorXd lower, Eigen::VectorXd upper);

  const Eigen::VectorXd& lower() const noexcept { return lower_; }
  const Eigen::VectorXd& upper() const noexcept { return upper_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(lower_.size()); }

  bool contains(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;

  /// Tensor grid with `points` nodes per axis, endpoints included, in
  /// lexicographic order (last axis fastest).
  std::vector<Eigen::VectorXd> grid(std::size_t points) const;

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

// Evaluator signatures. Matrices are written row-major into `out`.
using DriftFn = std::function<void(std::span<const double> x, std::span<const double> theta,
                                   std::span<double> out)>;
using PotentialFn = std::function<double(std::span<const double> x, std::span<const double> theta)>;

/// Parametric gradient-type drift b(x; theta) = grad_x U(x; theta).
struct DriftModel {
  std::string name;
  std::size_t dim = 1;
  std::size_t param_dim = 1;
  ParameterBox box;
  DriftFn drift;            // d
  DriftFn jacobian_x;       // d x d
  DriftFn jacobian_theta;   // d x q
  PotentialFn potential;
  /// Analytic dissipativity constant c1 over a given box; empty or <= 0 when
  /// the family is not dissipative there.
  std::function<double(const ParameterBox&)> contraction;

  double dissipativity() const { return contraction ? contraction(box) : 0.0; }
  Eigen::VectorXd eval(const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const;
};

/// Hurst index plus diffusion columns sigma_1..sigma_m (d x m).
class NoiseModel {
 public:
  NoiseModel(HurstIndex h, Eigen::MatrixXd sigma);

  HurstIndex h() const noexcept { return h_; }
  const Eigen::MatrixXd& sigma() const noexcept { return sigma_; }
  double sigma_norm_sq() const noexcept { return sigma_norm_sq_; }
  std::size_t state_dim() const noexcept { return static_cast<std::size_t>(sigma_.rows()); }
  std::size_t noise_dim() const noexcept { return static_cast<std::size_t>(sigma_.cols()); }

 private:
  HurstIndex h_;
  Eigen::MatrixXd sigma_;
  double sigma_norm_sq_;
};

struct DissipativityReport {
  /// Largest sampled <b(x)-b(y), x-y> / |x-y|^2.
  double max_ratio = 0.0;
  std::size_t pairs = 0;
  bool pass = false;
};

struct GradientReport {
  double max_abs_err = 0.0;
  bool pass = false;
};

struct JacobianReport {
  double max_abs_err_x = 0.0;
  double max_abs_err_theta = 0.0;
  bool pass = false;
};

inline constexpr double kDefaultFdStep = 1e-4;

/// Samples pairs uniformly in the ball of `radius` against a 5-per-axis grid
/// of parameters. Pairs closer than 1e-12 are skipped.
DissipativityReport check_dissipativity(const DriftModel& model, std::size_t sample_count,
                                        double radius, double c1_floor, std::uint64_t seed = 1);

/// Central differences of U against b at random states in [-radius, radius]^d
/// and random parameters in the box.
GradientReport check_gradient_type(const DriftModel& model, std::size_t sample_count, double tol,
                                   std::uint64_t seed = 1, double fd_step = kDefaultFdStep,
                                   double radius = 2.0);

/// Same as check_gradient_type but with theta pinned.
GradientReport check_gradient_type_at(const DriftModel& model, const Eigen::VectorXd& theta,
                                      std::size_t sample_count, double tol, std::uint64_t seed = 1,
                                      double fd_step = kDefaultFdStep, double radius = 2.0);

/// Central differences of b against both Jacobians.
JacobianReport check_jacobians(const DriftModel& model, std::size_t sample_count, double tol,
                               std::uint64_t seed = 1, double fd_step = kDefaultFdStep,
                               double radius = 2.0);

/// Built-in catalog: "fou", "fou-multi", "langevin-quartic", "zero".
std::vector<std::string> builtin_model_names();

/// Throws Error{UnknownModelName}. `dim` is honoured by the multi-dimensional
/// families and must be 1 for "fou".
DriftModel make_model(const std::string& name, std::size_t dim = 1);

}  // namespace zsq
