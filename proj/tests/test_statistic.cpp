#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "zsq/error.hpp"
#include "zsq/fgn.hpp"
#include "zsq/kahan.hpp"
#include "zsq/models.hpp"
#include "zsq/simulate.hpp"
#include "zsq/statistic.hpp"

using namespace zsq;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::MatrixXd row(std::initializer_list<double> v) { return vec(v).transpose(); }

Eigen::VectorXd th(double t) { return vec({t}); }

PathRecord fou_path(std::size_t n, double h, std::uint64_t seed, bool keep_fine = true) {
  const SimulationPlan plan{.scheme = ObservationScheme(n, 0.5, 1.0),
                            .substeps = 8,
                            .burn_in = std::nullopt,
                            .y0 = vec({0.0}),
                            .seed = seed,
                            .keep_fine = keep_fine};
  return simulate_path(make_model("fou"), th(-1.0),
                       NoiseModel(HurstIndex(h), Eigen::MatrixXd::Ones(1, 1)), plan);
}

}  // namespace

TEST(CompensatedSum, RecoversSmallAddendsNextToLargeOnes) {
  CompensatedSum s;
  for (double x : {1.0, 1e100, 1.0, -1e100}) s += x;
  EXPECT_EQ(s.value(), 2.0);
}

TEST(StatisticInput, RejectsWrongShapes) {
  const auto model = make_model("fou");
  const ObservationScheme scheme(4, 0.5, 1.0);
  const Eigen::MatrixXd short_obs = Eigen::MatrixXd::Zero(1, 4);
  EXPECT_THROW(StatisticInput(short_obs, scheme, {0.7, 1.0}, model), Error);
  const Eigen::MatrixXd wide = Eigen::MatrixXd::Zero(2, 5);
  EXPECT_THROW(StatisticInput(wide, scheme, {0.7, 1.0}, model), Error);
}

TEST(QnStatistic, HandEvaluatedExample) {
  // n = 2, alpha_n = 1 (kappa = sqrt 2, alpha = 1/2), H = 1/2, theta = 0.
  const auto model = make_model("fou");
  auto box_model = model;
  box_model.box = ParameterBox(vec({-3.0}), vec({1.0}));
  const ObservationScheme scheme(2, 0.5, std::sqrt(2.0));
  ASSERT_NEAR(scheme.spacing(), 1.0, 1e-15);
  const Eigen::MatrixXd y = row({1.0, 0.5, 0.6});
  const StatisticInput input(y, scheme, {0.5, 1.0}, box_model);
  EXPECT_NEAR(q_n(input, th(0.0)), -0.87, 1e-12);
}

TEST(QnStatistic, ExactDriftIncrementsLeaveOnlyTheNoiseOffset) {
  // Y_{k+1} = Y_k + theta Y_k alpha_n with theta = -1, alpha_n = 1/2.
  const auto model = make_model("fou");
  const ObservationScheme scheme(4, 0.5, 1.0);
  ASSERT_EQ(scheme.spacing(), 0.5);
  const Eigen::MatrixXd y = row({8, 4, 2, 1, 0.5});
  const double h = 0.7, s2 = 1.3;
  const StatisticInput input(y, scheme, {h, s2}, model);
  EXPECT_NEAR(q_n(input, th(-1.0)), -s2 * std::pow(0.5, 2 * h - 2), 1e-12);
}

TEST(QnStatistic, ExactQuadraticInTheta) {
  const auto path = fou_path(512, 0.7, 4, false);
  const auto model = make_model("fou");
  const StatisticInput input(path.obs_y, path.plan.scheme, {0.7, 1.0}, model);
  const std::vector<double> t = {-2.5, -1.5, -0.5};
  std::vector<double> q;
  for (double x : t) q.push_back(q_n(input, th(x)));
  // Lagrange prediction at a fourth point.
  const double x = -1.1;
  double pred = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double l = 1.0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != i) l *= (x - t[j]) / (t[i] - t[j]);
    }
    pred += q[i] * l;
  }
  const double actual = q_n(input, th(x));
  EXPECT_LE(std::abs(pred - actual), 1e-10 * std::max(1.0, std::abs(actual)));
}

TEST(Decompose, TrueParameterKillsDriftTerms) {
  const auto path = fou_path(256, 0.7, 8);
  const auto model = make_model("fou");
  const StatisticInput input(path.obs_y, path.plan.scheme, {0.7, 1.0}, model);
  const auto d = decompose(input, th(-1.0), th(-1.0), path);
  EXPECT_EQ(d.q1, 0.0);
  EXPECT_EQ(d.q2, 0.0);
  EXPECT_EQ(d.q, q_n(input, th(-1.0)));
}

TEST(Decompose, ZeroDriftHasNoResidual) {
  const auto model = make_model("zero");
  const SimulationPlan plan{.scheme = ObservationScheme(256, 0.5, 1.0),
                            .substeps = 4,
                            .burn_in = std::nullopt,
                            .y0 = vec({0.0}),
                            .seed = 12,
                            .keep_fine = true};
  const NoiseModel noise(HurstIndex(0.7), Eigen::MatrixXd::Ones(1, 1));
  const auto path = simulate_path(model, th(0.0), noise, plan);
  const StatisticInput input(path.obs_y, plan.scheme, NoiseParameters::from(noise), model);
  const auto d = decompose(input, th(0.5), th(0.0), path);
  EXPECT_EQ(d.residual, 0.0);
  EXPECT_EQ(d.q, d.q3);
  EXPECT_EQ(q_n(input, th(0.0)), qv_statistic(path.obs_noise, plan.scheme, NoiseParameters::from(noise)));
}

TEST(Decompose, IdentityMatchesDirectRemainderSums) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto path = fou_path(1024, 0.7, seed);
    const auto model = make_model("fou");
    const StatisticInput input(path.obs_y, path.plan.scheme, {0.7, 1.0}, model);
    for (double t : {-3.0, -1.7, -1.0, -0.1}) {
      const auto d = decompose(input, th(t), th(-1.0), path);
      const double scale = std::max({std::abs(d.residual), std::abs(d.residual_direct()), 1e-300});
      EXPECT_LE(std::abs(d.residual - d.residual_direct()) / scale, 1e-10)
          << "seed=" << seed << " theta=" << t;
    }
  }
}

namespace {

// Left-point prediction of the dominant remainder term r_noise for b = theta x:
// 2 theta0 (1/s) sum_i f(i/s) alpha_n^{2H-1}, f(u) = (u^{2H} + 1 - (1-u)^{2H}) / 2.
double predicted_residual(double theta0, double h, double a, std::size_t s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(s);
    acc += 0.5 * (std::pow(u, 2 * h) + 1.0 - std::pow(1.0 - u, 2 * h));
  }
  return 2.0 * theta0 * acc / static_cast<double>(s) * std::pow(a, 2 * h - 1);
}

}  // namespace

TEST(Decompose, ResidualFollowsTheNoiseCorrelationBias) {
  const auto model = make_model("fou");
  for (std::size_t n : {1024u, 4096u}) {
    double mean = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
      const auto path = fou_path(n, 0.7, 100 + r);
      const StatisticInput input(path.obs_y, path.plan.scheme, {0.7, 1.0}, model);
      mean += decompose(input, th(-2.0), th(-1.0), path).residual / reps;
    }
    const double expect = predicted_residual(-1.0, 0.7, std::pow(double(n), -0.5), 8);
    EXPECT_NEAR(mean / expect, 1.0, 0.1) << "n=" << n;
  }
}

// The fixed bound 0.05 max(|q1|, 1) at n = 2^12 sits below the bias above
// (about 0.16 at H = 0.7), so this check cannot hold. Kept for the record.
TEST(Decompose, DISABLED_ResidualIsSmallAtDefaultSubsteps) {
  const auto path = fou_path(4096, 0.7, 21);
  const auto model = make_model("fou");
  const StatisticInput input(path.obs_y, path.plan.scheme, {0.7, 1.0}, model);
  for (double t : {-3.0, -2.0, -0.5}) {
    const auto d = decompose(input, th(t), th(-1.0), path);
    EXPECT_LE(std::abs(d.residual), 0.05 * std::max(std::abs(d.q1), 1.0)) << t;
  }
}

TEST(Decompose, NeedsTheFineGrid) {
  const auto path = fou_path(64, 0.7, 1, false);
  const auto model = make_model("fou");
  const StatisticInput input(path.obs_y, path.plan.scheme, {0.7, 1.0}, model);
  try {
    decompose(input, th(-1.0), th(-1.0), path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingFineGrid);
  }
}

TEST(QvStatistic, SpecExamples) {
  // |dF|^2 = |sigma|^2 a^{2H} for every increment: a = 1, increments +-1.
  const ObservationScheme scheme(4, 0.5, 2.0);
  ASSERT_EQ(scheme.spacing(), 1.0);
  EXPECT_EQ(qv_statistic(row({0, 1, 0, -1, 0}), scheme, {0.8, 1.0}), 0.0);
  EXPECT_EQ(qv_statistic(row({0, 2}), 1.0, {0.63, 1.0}), 3.0);
}

TEST(QvStatistic, MeanSquareDecaysLikeOneOverN) {
  // H = 0.7 is in the (BM1) regime.
  const std::vector<std::size_t> ns = {256, 512, 1024, 2048, 4096};
  std::vector<double> ms;
  for (std::size_t n : ns) {
    double acc = 0.0;
    for (std::size_t r = 0; r < 1000; ++r) {
      const auto x = sample_fgn({.h = HurstIndex(0.7), .step = 1.0, .count = n, .dims = 1, .seed = r * 7919 + n});
      const double v = normalized_qv_sum({x.data(), static_cast<std::size_t>(x.size())});
      acc += v * v;
    }
    ms.push_back(acc / 1000);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    mx += std::log(double(ns[i])) / ns.size();
    my += std::log(ms[i]) / ns.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    sxy += (std::log(double(ns[i])) - mx) * (std::log(ms[i]) - my);
    sxx += std::pow(std::log(double(ns[i])) - mx, 2);
  }
  const double slope = sxy / sxx;
  EXPECT_GE(slope, -1.3);
  EXPECT_LE(slope, -0.7);
}

TEST(QvStatistic, OffDiagonalSumMatchesRotatedQuadraticVariations) {
  // sum dB1 dB2 versus (QV(beta) - QV(beta~)) / 2 for fresh independent beta, beta~.
  const std::size_t n = 256, reps = 3000;
  std::vector<double> cross, rotated;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto b = sample_fgn({.h = HurstIndex(0.7), .step = 1.0, .count = n, .dims = 2, .seed = r});
    cross.push_back(b.row(0).dot(b.row(1)) / n);
    const auto f = sample_fgn({.h = HurstIndex(0.7), .step = 1.0, .count = n, .dims = 2, .seed = 1000000 + r});
    rotated.push_back(0.5 * (f.row(0).squaredNorm() - f.row(1).squaredNorm()) / n);
  }
  const auto moments = [](const std::vector<double>& v) {
    double m2 = 0, m4 = 0;
    for (double x : v) {
      m2 += x * x / v.size();
      m4 += x * x * x * x / v.size();
    }
    return std::pair{m2, std::sqrt((m4 - m2 * m2) / v.size())};
  };
  const auto [va, sa] = moments(cross);
  const auto [vb, sb] = moments(rotated);
  EXPECT_LE(std::abs(va - vb), 3 * std::hypot(sa, sb));
}
