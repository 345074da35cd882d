#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace zsq {

/// Hurst index, strictly inside (0, 1).
class HurstIndex {
 public:
  explicit HurstIndex(double value);
  double value() const noexcept { return value_; }

 private:
  double value_;
};

struct FgnSpec {
  HurstIndex h;
  double step = 1.0;       // grid spacing in time units
  std::size_t count = 1;   // increments per component
  std::size_t dims = 1;    // independent components
  std::uint64_t seed = 0;

  void validate() const;
};

/// dims x count; row j holds the increments of component j.
using IncrementMatrix = Eigen::MatrixXd;

/// Autocovariance of fractional Gaussian noise at the given lag for a grid of
/// spacing `step`.
double fgn_autocovariance(HurstIndex h, std::size_t lag, double step);

/// Covariance of fractional Brownian motion, E[B_s B_t].
double fbm_covariance(HurstIndex h, double s, double t);

/// Exact fGN sampling. Uses circulant embedding when count >= 16 and falls
/// back to a dense Cholesky factorization otherwise, or when the embedding is
/// not nonnegative definite. Output is a pure function of the spec.
IncrementMatrix sample_fgn(const FgnSpec& spec);

namespace fgn_detail {

// Eigenvalues below -kNegativeEigenTolerance * max eigenvalue raise
// CirculantNotPSD; smaller negative values are clamped to zero.
inline constexpr double kNegativeEigenTolerance = 1e-9;
inline constexpr std::size_t kMinCirculantCount = 16;

/// Circulant-embedding sampler for a single stationary row. Throws
/// Error{CirculantNotPSD} instead of silently degrading.
void sample_circulant(HurstIndex h, double step, std::uint64_t stream_seed,
                      Eigen::Ref<Eigen::RowVectorXd> out);

/// Dense Cholesky sampler for a single stationary row.
void sample_cholesky(HurstIndex h, double step, std::uint64_t stream_seed,
                     Eigen::Ref<Eigen::RowVectorXd> out);

/// Eigenvalues of the circulant embedding of an arbitrary symmetric
/// autocovariance sequence (first_row[0..count-1]). Exposed for testing the
/// PSD guard.
Eigen::VectorXd circulant_eigenvalues(const Eigen::VectorXd& autocovariance);

}  // namespace fgn_detail

/// Row-wise prefix sums with a leading zero column: dims x (count + 1).
Eigen::MatrixXd cumulate(const IncrementMatrix& increments);

/// Row-wise first differences; inverse of cumulate.
IncrementMatrix difference(const Eigen::MatrixXd& path);

}  // namespace zsq
