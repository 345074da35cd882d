#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "zsq/error.hpp"
#include "zsq/estimate.hpp"
#include "zsq/fgn.hpp"
#include "zsq/nelder_mead.hpp"

using namespace zsq;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd th(double t) { return vec({t}); }
Eigen::MatrixXd row(std::initializer_list<double> v) { return vec(v).transpose(); }
ParameterBox box1(double lo, double hi) { return ParameterBox(th(lo), th(hi)); }

PathRecord fou_path(std::size_t n, double h, std::uint64_t seed, double theta0 = -1.0) {
  const SimulationPlan plan{.scheme = ObservationScheme(n, 0.5, 1.0),
                            .substeps = 8,
                            .burn_in = std::nullopt,
                            .y0 = th(0.0),
                            .seed = seed,
                            .keep_fine = false};
  return simulate_path(make_model("fou"), th(theta0),
                       NoiseModel(HurstIndex(h), Eigen::MatrixXd::Ones(1, 1)), plan);
}

}  // namespace

TEST(NelderMead, FindsInteriorMinimumOfAQuadratic) {
  const ParameterBox box(vec({-5, -5}), vec({5, 5}));
  const auto f = [](const Eigen::VectorXd& x) {
    return std::pow(x(0) - 1.0, 2) + 3 * std::pow(x(1) + 2.0, 2) + 0.5 * x(0) * x(1);
  };
  const auto r = nelder_mead(f, box, vec({0, 0}), vec({1, 1}));
  EXPECT_TRUE(r.converged);
  // Stationary point of the quadratic.
  Eigen::Matrix2d a;
  a << 2, 0.5, 0.5, 6;
  const Eigen::Vector2d expect = a.lu().solve(Eigen::Vector2d(2, -12));
  EXPECT_LT((r.best - expect).norm(), 1e-6);
}

TEST(NelderMead, StaysInsideTheBoxAndNeverWorsensTheStart) {
  const auto box = box1(0.0, 1.0);
  const auto f = [](const Eigen::VectorXd& x) { return -x(0); };  // optimum on the boundary
  const auto r = nelder_mead(f, box, th(1.0), th(0.25));
  EXPECT_TRUE(box.contains(r.best));
  EXPECT_EQ(r.best(0), 1.0);
  const auto r2 = nelder_mead(f, box, th(0.3), th(0.25));
  EXPECT_NEAR(r2.best(0), 1.0, 1e-7);
  EXPECT_LE(r2.value, f(th(0.3)));
}

TEST(NelderMead, RespectsIterationCap) {
  const auto r = nelder_mead([](const Eigen::VectorXd& x) { return x.squaredNorm(); },
                             ParameterBox(vec({-1, -1}), vec({1, 1})), vec({0.9, 0.9}),
                             vec({0.1, 0.1}), {.tolerance = 0.0, .max_iterations = 7});
  EXPECT_LE(r.iterations, 7u);
  EXPECT_FALSE(r.converged);
}

TEST(MinimizeAbs, SyntheticAbsoluteValue) {
  const auto r = minimize_abs([](const Eigen::VectorXd& x) { return x(0) - 2.0; }, box1(0, 5),
                              {.grid_points = 11, .refine = {}});
  EXPECT_EQ(r.grid_stage_min(0), 2.0);
  EXPECT_EQ(r.theta_hat(0), 2.0);
  EXPECT_EQ(r.q_at_min, 0.0);
}

TEST(MinimizeAbs, TiesGoToTheLexicographicallySmallestNode) {
  const ParameterBox box(vec({-1, -1}), vec({1, 1}));
  const auto r = minimize_abs([](const Eigen::VectorXd&) { return 1.0; }, box,
                              {.grid_points = 5, .refine = {}});
  EXPECT_EQ(r.grid_stage_min(0), -1.0);
  EXPECT_EQ(r.grid_stage_min(1), -1.0);
}

TEST(MinimizeAbs, NanNamesTheParameter) {
  try {
    minimize_abs([](const Eigen::VectorXd& x) { return x(0) > 0.5 ? std::nan("") : 1.0; },
                 box1(0, 1), {.grid_points = 5, .refine = {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteStatistic);
    EXPECT_NE(std::string(e.what()).find("theta = (0.75"), std::string::npos) << e.what();
  }
}

TEST(ClosedForm, HandEvaluatedExample) {
  const ObservationScheme scheme(2, 0.5, std::sqrt(2.0));
  const auto r = closed_form_fou(row({1.0, 0.5, 0.6}), scheme, {0.5, 1.0});
  EXPECT_NEAR(r.theta_hat, -0.36 - std::sqrt(0.1296 + 1.392), 1e-12);
  EXPECT_NEAR(r.theta_hat, -1.5935, 1e-4);
  EXPECT_FALSE(r.clamped);
}

TEST(ClosedForm, AgreesWithZeroSquaresOnTheHandExample) {
  const ObservationScheme scheme(2, 0.5, std::sqrt(2.0));
  const Eigen::MatrixXd y = row({1.0, 0.5, 0.6});
  const auto model = make_model("fou");
  const StatisticInput input(y, scheme, {0.5, 1.0}, model);
  const auto cf = closed_form_fou(y, scheme, {0.5, 1.0});
  const auto zs = zero_squares(input);
  EXPECT_NEAR(zs.theta_hat(0), cf.theta_hat, 1e-6);
  EXPECT_LE(std::abs(zs.q_at_min), std::abs(zs.grid_stage_q));
}

TEST(ClosedForm, RootZeroesTheStatistic) {
  const auto model = make_model("fou");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = fou_path(1024, 0.7, seed);
    const auto cf = closed_form_fou(p.obs_y, p.plan.scheme, {0.7, 1.0});
    if (cf.discriminant < 0) continue;
    auto wide = model;
    wide.box = box1(-50, 50);
    const StatisticInput input(p.obs_y, p.plan.scheme, {0.7, 1.0}, wide);
    EXPECT_NEAR(q_n(input, th(cf.theta_hat)), 0.0, 1e-9);
    EXPECT_NEAR(q_n(input, th(cf.plus_root)), 0.0, 1e-9);
  }
}

TEST(ClosedForm, NegativeDiscriminantIsClampedAndFlagged) {
  const ObservationScheme scheme(2, 0.5, std::sqrt(2.0));
  const auto r = closed_form_fou(row({1.0, 1.0, 3.5}), scheme, {0.5, 1.0});
  EXPECT_TRUE(r.clamped);
  EXPECT_LT(r.discriminant, 0.0);
  EXPECT_DOUBLE_EQ(r.theta_hat, r.plus_root);
}

TEST(ClosedForm, DegeneratePathIsNamed) {
  const ObservationScheme scheme(4, 0.5, 1.0);
  try {
    closed_form_fou(Eigen::MatrixXd::Zero(1, 5), scheme, {0.7, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegeneratePath);
  }
}

TEST(ClosedForm, NoiselessDecayConvergesAtRateAlpha) {
  const double theta0 = -1.0;
  for (std::size_t n : {16u, 256u, 4096u}) {
    const ObservationScheme scheme(n, 0.5, 1.0);
    Eigen::MatrixXd y(1, n + 1);
    for (std::size_t k = 0; k <= n; ++k) y(0, k) = std::exp(theta0 * scheme.time(k));
    const auto r = closed_form_fou(y, scheme, {0.7, 0.0});
    EXPECT_LE(std::abs(r.theta_hat - theta0), scheme.spacing()) << n;
  }
}

TEST(ClosedForm, PlusRootAdmissibilityIsReported) {
  const auto p = fou_path(256, 0.7, 3);
  const auto r = closed_form_fou(p.obs_y, p.plan.scheme, {0.7, 1.0}, box1(-100, 100));
  EXPECT_EQ(r.plus_root_admissible, std::abs(r.plus_root) <= 100);
}

TEST(SolverEquivalence, ZeroSquaresMatchesClosedForm) {
  const auto model = make_model("fou");
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto p = fou_path(1024, 0.7, 500 + seed);
    const auto cf = closed_form_fou(p.obs_y, p.plan.scheme, {0.7, 1.0}, model.box);
    if (cf.discriminant < 1e-8 || !model.box.contains(th(cf.theta_hat))) continue;
    const StatisticInput input(p.obs_y, p.plan.scheme, {0.7, 1.0}, model);
    EXPECT_NEAR(zero_squares(input).theta_hat(0), cf.theta_hat, 1e-6) << seed;
    ++compared;
  }
  EXPECT_GT(compared, 20);
}

TEST(ZeroSquares, ResultInsideBoxAndNoWorseThanGrid) {
  const auto model = make_model("langevin-quartic");
  const SimulationPlan plan{.scheme = ObservationScheme(2048, 0.5, 1.0),
                            .substeps = 8,
                            .burn_in = std::nullopt,
                            .y0 = th(0.0),
                            .seed = 77,
                            .keep_fine = false};
  const NoiseModel noise(HurstIndex(0.7), Eigen::MatrixXd::Ones(1, 1));
  const auto p = simulate_path(model, th(1.0), noise, plan);
  const StatisticInput input(p.obs_y, plan.scheme, NoiseParameters::from(noise), model);
  const auto r = zero_squares(input);
  EXPECT_TRUE(model.box.contains(r.theta_hat));
  EXPECT_LE(std::abs(r.q_at_min), std::abs(q_n(input, r.grid_stage_min)));
}

TEST(ZeroSquares, ReparametrizationScalesTheArgmin) {
  // b(x; t) = c t x over box / c gives theta_hat / c.
  const double c = 2.0;
  const auto p = fou_path(1024, 0.7, 9);
  const auto base = make_model("fou");
  auto scaled = base;
  scaled.drift = [c](std::span<const double> x, std::span<const double> t, std::span<double> out) {
    out[0] = c * t[0] * x[0];
  };
  scaled.box = box1(-3.0 / c, -0.1 / c);
  const StatisticInput a(p.obs_y, p.plan.scheme, {0.7, 1.0}, base);
  const StatisticInput b(p.obs_y, p.plan.scheme, {0.7, 1.0}, scaled);
  // The grids coincide exactly; the simplex stops on an absolute diameter, so
  // agreement is limited by the refinement tolerance.
  EXPECT_EQ(zero_squares(b).grid_stage_min(0), zero_squares(a).grid_stage_min(0) / c);
  EXPECT_NEAR(zero_squares(b).theta_hat(0), zero_squares(a).theta_hat(0) / c, 1e-8);
}

TEST(HSigma, InversionExamples) {
  const auto a = h_sigma_from_variations(1.0, std::pow(2.0, 0.4), 100, 1.0);
  EXPECT_NEAR(a.h_hat, 0.7, 1e-12);
  EXPECT_NEAR(a.sigma_norm_sq_hat, 1.0 / 100, 1e-12);
  EXPECT_NEAR(h_sigma_from_variations(3.0, 3.0, 10, 0.5).h_hat, 0.5, 1e-15);
  EXPECT_EQ(h_sigma_from_variations(1.0, 1000.0, 10, 0.5).h_hat, 0.99);
  EXPECT_EQ(h_sigma_from_variations(1000.0, 1.0, 10, 0.5).h_hat, 0.01);
  EXPECT_THROW(h_sigma_from_variations(0.0, 1.0, 10, 0.5), Error);
}

TEST(HSigma, ConstantPathIsZeroVariation) {
  const ObservationScheme scheme(8, 0.5, 1.0);
  try {
    estimate_h_sigma(Eigen::MatrixXd::Constant(1, 9, 2.0), scheme);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVariation);
  }
}

TEST(HSigma, RecoversParametersOfPureFbm) {
  const std::size_t n = 1 << 14;
  const double h = 0.75;
  const ObservationScheme scheme(n, 0.5, 128.0);  // unit spacing
  int good = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    const auto path = cumulate(sample_fgn(
        {.h = HurstIndex(h), .step = scheme.spacing(), .count = n, .dims = 1, .seed = 900 + static_cast<std::uint64_t>(r)}));
    const auto e = estimate_h_sigma(path, scheme);
    EXPECT_GT(e.h_hat, 0.0);
    EXPECT_LT(e.h_hat, 1.0);
    if (std::abs(e.h_hat - h) <= 0.05 && std::abs(e.sigma_norm_sq_hat - 1.0) <= 0.1) ++good;
  }
  EXPECT_GE(good, 36);
}

TEST(LimitCurve, VanishesAtTruthAndFactorizesForFou) {
  const auto model = make_model("fou");
  const NoiseModel noise(HurstIndex(0.7), Eigen::MatrixXd::Ones(1, 1));
  const std::vector<Eigen::VectorXd> thetas = {th(-3.0), th(-2.0), th(-1.0), th(-0.5), th(-0.1)};
  const OracleOptions opts{.horizon = 2000, .substeps_per_unit = 16, .seeds = 4, .base_seed = 1, .burn_in = 20.0};
  const auto e = drift_energy(model, th(-1.0), noise, thetas, opts);
  const auto l = limit_curve(model, th(-1.0), noise, thetas, opts);
  EXPECT_EQ(l[2], 0.0);
  const double ey2 = e.at_truth;  // theta0^2 E[Y^2] with theta0 = -1
  EXPECT_NEAR(ey2 / (0.7 * std::tgamma(1.4)), 1.0, 0.05);
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const double t = thetas[i](0);
    EXPECT_NEAR(l[i], (1.0 - t * t) * ey2, 1e-9);
    if (std::abs(t) > 1.0) EXPECT_LT(l[i], 0.0);
    if (std::abs(t) < 1.0) EXPECT_GT(l[i], 0.0);
    EXPECT_NEAR(e.mismatch[i], (t + 1.0) * (t + 1.0) * ey2, 1e-9);
  }
}

TEST(LimitCurve, BrownianValueAtMinusTwo) {
  const auto model = make_model("fou");
  const NoiseModel noise(HurstIndex(0.5), Eigen::MatrixXd::Ones(1, 1));
  const auto l = limit_curve(model, th(-1.0), noise, {th(-2.0), th(-1.0)});
  EXPECT_NEAR(l[0] / -1.5, 1.0, 0.1);
  EXPECT_EQ(l[1], 0.0);
  const auto m = brownian_limit_curve(model, th(-1.0), noise, {th(-2.0)});
  EXPECT_NEAR(m[0] / 0.5, 1.0, 0.1);
}

TEST(LimitCurve, RejectsThetaOutsideBox) {
  const NoiseModel noise(HurstIndex(0.7), Eigen::MatrixXd::Ones(1, 1));
  EXPECT_THROW(limit_curve(make_model("fou"), th(-1.0), noise, {th(1.0)}), Error);
}
