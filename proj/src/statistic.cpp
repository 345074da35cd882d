#include "zsq/statistic.hpp"

#include <cmath>

#include "zsq/error.hpp"
#include "zsq/kahan.hpp"

namespace zsq {

StatisticInput::StatisticInput(const Eigen::MatrixXd& obs_y, const ObservationScheme& scheme,
                               NoiseParameters noise, const DriftModel& model)
    : obs_y_(&obs_y), scheme_(&scheme), noise_(noise), model_(&model) {
  if (static_cast<std::size_t>(obs_y.cols()) != scheme.n() + 1) {
    throw Error(ErrorKind::InvalidArgument, "observation count must equal n + 1 = " +
                                                std::to_string(scheme.n() + 1));
  }
  if (static_cast<std::size_t>(obs_y.rows()) != model.dim) {
    throw Error(ErrorKind::InvalidArgument, "observation dimension does not match the model");
  }
  if (!(noise.h > 0.0 && noise.h < 1.0) || noise.sigma_norm_sq < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "noise parameters out of range");
  }
}

namespace {

std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index k) {
  return {m.col(k).data(), static_cast<std::size_t>(m.rows())};
}

}  // namespace

double q_n(const StatisticInput& input, const Eigen::VectorXd& theta) {
  const auto& y = input.obs_y();
  const auto& model = input.model();
  const double a = input.scheme().spacing();
  const std::size_t n = input.scheme().n();
  const double offset = input.noise().sigma_norm_sq * std::pow(a, 2.0 * input.noise().h);
  const auto d = y.rows();
  Eigen::VectorXd b(d);
  const std::span<const double> th{theta.data(), static_cast<std::size_t>(theta.size())};
  CompensatedSum sum;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) {
    model.drift(column(y, k), th, {b.data(), static_cast<std::size_t>(d)});
    double sq = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double e = (y(i, k + 1) - y(i, k)) - b(i) * a;
      sq += e * e;
    }
    sum += sq - offset;
  }
  return sum.value() / (static_cast<double>(n) * a * a);
}

double qv_statistic(const Eigen::MatrixXd& obs, double spacing, NoiseParameters noise) {
  if (obs.cols() < 2) throw Error(ErrorKind::InvalidArgument, "need at least one increment");
  if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "spacing must be positive");
  const double a = spacing;
  const double offset = noise.sigma_norm_sq * std::pow(a, 2.0 * noise.h);
  CompensatedSum sum;
  for (Eigen::Index k = 0; k + 1 < obs.cols(); ++k) {
    sum += (obs.col(k + 1) - obs.col(k)).squaredNorm() - offset;
  }
  return sum.value() / (static_cast<double>(obs.cols() - 1) * a * a);
}

double qv_statistic(const Eigen::MatrixXd& obs, const ObservationScheme& scheme,
                    NoiseParameters noise) {
  if (static_cast<std::size_t>(obs.cols()) != scheme.n() + 1) {
    throw Error(ErrorKind::InvalidArgument, "observation count must equal n + 1");
  }
  return qv_statistic(obs, scheme.spacing(), noise);
}

double normalized_qv_sum(std::span<const double> increments) {
  if (increments.empty()) throw Error(ErrorKind::InvalidArgument, "no increments");
  CompensatedSum sum;
  for (double x : increments) sum += x * x - 1.0;
  return sum.value() / static_cast<double>(increments.size());
}

StatisticDecomposition decompose(const StatisticInput& input, const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& theta0, const PathRecord& path) {
  if (!path.has_fine()) {
    throw Error(ErrorKind::MissingFineGrid, "decomposition needs the fine-grid trajectory");
  }
  const auto& scheme = input.scheme();
  const std::size_t n = scheme.n();
  const std::size_t sub = path.plan.substeps;
  if (static_cast<std::size_t>(path.fine_y.cols()) != n * sub + 1 ||
      path.obs_noise.cols() != input.obs_y().cols()) {
    throw Error(ErrorKind::InvalidArgument, "path does not match the statistic input");
  }
  const auto& model = input.model();
  const auto& y = input.obs_y();
  const auto& noise_path = path.obs_noise;
  const double a = scheme.spacing();
  const double fine = path.plan.fine_step();
  const auto d = y.rows();
  const auto ds = static_cast<std::size_t>(d);
  const std::span<const double> th{theta.data(), static_cast<std::size_t>(theta.size())};
  const std::span<const double> th0{theta0.data(), static_cast<std::size_t>(theta0.size())};

  Eigen::VectorXd b(d), b0(d), bu(d), delta_b(d), r(d);
  CompensatedSum s1, s2, s_sq, s_drift, s_noise;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) {
    model.drift(column(y, k), th, {b.data(), ds});
    model.drift(column(y, k), th0, {b0.data(), ds});
    delta_b = b - b0;
    const Eigen::VectorXd dF = noise_path.col(k + 1) - noise_path.col(k);

    // r_k = sum over fine steps of (b(Y_u; theta0) - b(Y_{t_k}; theta0)) * fine.
    r.setZero();
    const auto start = static_cast<Eigen::Index>(static_cast<std::size_t>(k) * sub);
    for (std::size_t j = 0; j < sub; ++j) {
      model.drift(column(path.fine_y, start + static_cast<Eigen::Index>(j)), th0, {bu.data(), ds});
      r += (bu - b0) * fine;
    }
    s1 += delta_b.squaredNorm();
    s2 += delta_b.dot(dF);
    s_sq += r.squaredNorm();
    s_drift += delta_b.dot(r);
    s_noise += dF.dot(r);
  }
  const double nd = static_cast<double>(n);
  StatisticDecomposition out;
  out.q = q_n(input, theta);
  out.q1 = s1.value() / nd;
  out.q2 = s2.value() / (nd * a);
  out.q3 = qv_statistic(noise_path, scheme, input.noise());
  out.residual = out.q - (out.q1 - 2.0 * out.q2 + out.q3);
  out.r_sq = s_sq.value() / (nd * a * a);
  out.r_drift = 2.0 * s_drift.value() / (nd * a);
  out.r_noise = 2.0 * s_noise.value() / (nd * a * a);
  return out;
}

}  // namespace zsq
