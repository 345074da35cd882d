#pragma once

#include <cstddef>
#include <functional>

#include <Eigen/Dense>

#include "zsq/models.hpp"

namespace zsq {

struct NelderMeadOptions {
  double tolerance = 1e-8;       // stop when simplex diameter falls below
  std::size_t max_iterations = 500;
};

struct NelderMeadResult {
  Eigen::VectorXd best;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Nelder-Mead simplex minimization with every trial point projected onto the
/// box. The initial simplex is start plus initial_step[i] along each axis
/// (flipped inward at the boundary). The returned point never has a larger
/// objective than `start`.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const ParameterBox& box, const Eigen::VectorXd& start,
                             const Eigen::VectorXd& initial_step,
                             const NelderMeadOptions& options = {});

}  // namespace zsq
