#include "zsq/models.hpp"

#include <algorithm>
#include <cmath>

#include "zsq/error.hpp"
#include "zsq/rng.hpp"

namespace zsq {

ParameterBox::ParameterBox(Eigen::VectorXd lower, Eigen::VectorXd upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size()) {
    throw Error(ErrorKind::EmptyBox, "parameter box bounds must be nonempty and of equal length");
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_(i) < upper_(i)) || !std::isfinite(lower_(i)) || !std::isfinite(upper_(i))) {
      throw Error(ErrorKind::EmptyBox, "parameter box axis " + std::to_string(i) +
                                           " needs finite lower < upper");
    }
  }
}

bool ParameterBox::contains(const Eigen::VectorXd& theta) const {
  if (theta.size() != lower_.size()) return false;
  return (theta.array() >= lower_.array()).all() && (theta.array() <= upper_.array()).all();
}

Eigen::VectorXd ParameterBox::project(const Eigen::VectorXd& theta) const {
  return theta.cwiseMax(lower_).cwiseMin(upper_);
}

std::vector<Eigen::VectorXd> ParameterBox::grid(std::size_t points) const {
  if (points < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least 2 points per axis");
  const auto q = dim();
  std::size_t total = 1;
  for (std::size_t i = 0; i < q; ++i) total *= points;
  std::vector<Eigen::VectorXd> nodes;
  nodes.reserve(total);
  std::vector<std::size_t> index(q, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(q));
    for (std::size_t a = 0; a < q; ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      const double frac = static_cast<double>(index[a]) / static_cast<double>(points - 1);
      theta(ia) = index[a] + 1 == points ? upper_(ia) : lower_(ia) + frac * (upper_(ia) - lower_(ia));
    }
    nodes.push_back(std::move(theta));
    for (std::size_t a = q; a-- > 0;) {
      if (++index[a] < points) break;
      index[a] = 0;
    }
  }
  return nodes;
}

Eigen::VectorXd DriftModel::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim));
  drift({x.data(), static_cast<std::size_t>(x.size())},
        {theta.data(), static_cast<std::size_t>(theta.size())},
        {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

NoiseModel::NoiseModel(HurstIndex h, Eigen::MatrixXd sigma)
    : h_(h), sigma_(std::move(sigma)), sigma_norm_sq_(sigma_.squaredNorm()) {
  if (sigma_.rows() == 0 || sigma_.cols() == 0) {
    throw Error(ErrorKind::InvalidArgument, "sigma must be a nonempty d x m matrix");
  }
  if (!(sigma_norm_sq_ > 0.0) || !std::isfinite(sigma_norm_sq_)) {
    throw Error(ErrorKind::InvalidArgument, "sum of squared sigma entries must be positive");
  }
}

namespace {

Eigen::VectorXd random_in_ball(RandomStream& rng, std::size_t d, double radius) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (auto& c : v) c = rng.normal();
  const double norm = v.norm();
  if (norm == 0.0) return v;
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  return v * (r / norm);
}

Eigen::VectorXd random_in_cube(RandomStream& rng, std::size_t d, double radius) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (auto& c : v) c = rng.uniform(-radius, radius);
  return v;
}

Eigen::VectorXd random_in_box(RandomStream& rng, const ParameterBox& box) {
  Eigen::VectorXd v(box.lower().size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(box.lower()(i), box.upper()(i));
  return v;
}

std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double potential_fd(const DriftModel& model, Eigen::VectorXd x, const Eigen::VectorXd& theta,
                    Eigen::Index i, double step) {
  const double xi = x(i);
  x(i) = xi + step;
  const double up = model.potential(view(x), view(theta));
  x(i) = xi - step;
  const double down = model.potential(view(x), view(theta));
  return (up - down) / (2.0 * step);
}

double gradient_error_at(const DriftModel& model, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& theta, double fd_step) {
  const Eigen::VectorXd b = model.eval(x, theta);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(potential_fd(model, x, theta, i, fd_step) - b(i)));
  }
  return worst;
}

}  // namespace

DissipativityReport check_dissipativity(const DriftModel& model, std::size_t sample_count,
                                        double radius, double c1_floor, std::uint64_t seed) {
  if (sample_count < 1) throw Error(ErrorKind::InvalidArgument, "sample_count must be >= 1");
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  RandomStream rng(seed);
  DissipativityReport report;
  report.max_ratio = -std::numeric_limits<double>::infinity();
  const auto thetas = model.box.grid(5);
  for (std::size_t s = 0; s < sample_count; ++s) {
    const Eigen::VectorXd x = random_in_ball(rng, model.dim, radius);
    const Eigen::VectorXd y = random_in_ball(rng, model.dim, radius);
    const Eigen::VectorXd dx = x - y;
    const double dist_sq = dx.squaredNorm();
    if (std::sqrt(dist_sq) < 1e-12) continue;
    for (const auto& theta : thetas) {
      const double ratio = (model.eval(x, theta) - model.eval(y, theta)).dot(dx) / dist_sq;
      report.max_ratio = std::max(report.max_ratio, ratio);
    }
    ++report.pairs;
  }
  if (report.pairs == 0) {
    throw Error(ErrorKind::DegeneratePair, "every sampled pair was degenerate");
  }
  report.pass = report.max_ratio <= -c1_floor;
  return report;
}

GradientReport check_gradient_type(const DriftModel& model, std::size_t sample_count, double tol,
                                   std::uint64_t seed, double fd_step, double radius) {
  if (sample_count < 1 || !(tol > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "need sample_count >= 1 and tol > 0");
  }
  RandomStream rng(seed);
  GradientReport report;
  for (std::size_t s = 0; s < sample_count; ++s) {
    const Eigen::VectorXd x = random_in_cube(rng, model.dim, radius);
    const Eigen::VectorXd theta = random_in_box(rng, model.box);
    report.max_abs_err = std::max(report.max_abs_err, gradient_error_at(model, x, theta, fd_step));
  }
  report.pass = report.max_abs_err <= tol;
  return report;
}

GradientReport check_gradient_type_at(const DriftModel& model, const Eigen::VectorXd& theta,
                                      std::size_t sample_count, double tol, std::uint64_t seed,
                                      double fd_step, double radius) {
  if (sample_count < 1 || !(tol > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "need sample_count >= 1 and tol > 0");
  }
  RandomStream rng(seed);
  GradientReport report;
  for (std::size_t s = 0; s < sample_count; ++s) {
    const Eigen::VectorXd x = random_in_cube(rng, model.dim, radius);
    report.max_abs_err = std::max(report.max_abs_err, gradient_error_at(model, x, theta, fd_step));
  }
  report.pass = report.max_abs_err <= tol;
  return report;
}

JacobianReport check_jacobians(const DriftModel& model, std::size_t sample_count, double tol,
                               std::uint64_t seed, double fd_step, double radius) {
  RandomStream rng(seed);
  const auto d = static_cast<Eigen::Index>(model.dim);
  const auto q = static_cast<Eigen::Index>(model.param_dim);
  JacobianReport report;
  Eigen::VectorXd jx(d * d);
  Eigen::VectorXd jt(d * q);
  for (std::size_t s = 0; s < sample_count; ++s) {
    Eigen::VectorXd x = random_in_cube(rng, model.dim, radius);
    Eigen::VectorXd theta = random_in_box(rng, model.box);
    model.jacobian_x(view(x), view(theta), {jx.data(), static_cast<std::size_t>(jx.size())});
    model.jacobian_theta(view(x), view(theta), {jt.data(), static_cast<std::size_t>(jt.size())});
    for (Eigen::Index c = 0; c < d; ++c) {
      const double xc = x(c);
      x(c) = xc + fd_step;
      const Eigen::VectorXd up = model.eval(x, theta);
      x(c) = xc - fd_step;
      const Eigen::VectorXd down = model.eval(x, theta);
      x(c) = xc;
      const Eigen::VectorXd fd = (up - down) / (2.0 * fd_step);
      for (Eigen::Index r = 0; r < d; ++r) {
        report.max_abs_err_x = std::max(report.max_abs_err_x, std::abs(fd(r) - jx(r * d + c)));
      }
    }
    // Parameter perturbations may leave the box; the evaluators are defined
    // on all of R^q.
    for (Eigen::Index c = 0; c < q; ++c) {
      const double tc = theta(c);
      theta(c) = tc + fd_step;
      const Eigen::VectorXd up = model.eval(x, theta);
      theta(c) = tc - fd_step;
      const Eigen::VectorXd down = model.eval(x, theta);
      theta(c) = tc;
      const Eigen::VectorXd fd = (up - down) / (2.0 * fd_step);
      for (Eigen::Index r = 0; r < d; ++r) {
        report.max_abs_err_theta =
            std::max(report.max_abs_err_theta, std::abs(fd(r) - jt(r * q + c)));
      }
    }
  }
  report.pass = report.max_abs_err_x <= tol && report.max_abs_err_theta <= tol;
  return report;
}

namespace {

ParameterBox scalar_box(double lo, double hi) {
  return ParameterBox(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi));
}

// b(x; theta) = theta * x, componentwise in any dimension.
DriftModel linear_model(std::string name, std::size_t dim) {
  DriftModel m{.name = std::move(name),
               .dim = dim,
               .param_dim = 1,
               .box = scalar_box(-3.0, -0.1),
               .drift = {},
               .jacobian_x = {},
               .jacobian_theta = {},
               .potential = {},
               .contraction = {}};
  m.drift = [](std::span<const double> x, std::span<const double> th, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = th[0] * x[i];
  };
  m.jacobian_x = [](std::span<const double> x, std::span<const double> th, std::span<double> out) {
    const std::size_t d = x.size();
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) out[r * d + c] = r == c ? th[0] : 0.0;
    }
  };
  m.jacobian_theta = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
  };
  m.potential = [](std::span<const double> x, std::span<const double> th) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return 0.5 * th[0] * s;
  };
  m.contraction = [](const ParameterBox& box) { return -box.upper()(0); };
  return m;
}

// b_i(x; theta) = -theta (x_i + x_i^3).
DriftModel quartic_model(std::size_t dim) {
  DriftModel m{.name = "langevin-quartic",
               .dim = dim,
               .param_dim = 1,
               .box = scalar_box(0.1, 3.0),
               .drift = {},
               .jacobian_x = {},
               .jacobian_theta = {},
               .potential = {},
               .contraction = {}};
  m.drift = [](std::span<const double> x, std::span<const double> th, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -th[0] * (x[i] + x[i] * x[i] * x[i]);
  };
  m.jacobian_x = [](std::span<const double> x, std::span<const double> th, std::span<double> out) {
    const std::size_t d = x.size();
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        out[r * d + c] = r == c ? -th[0] * (1.0 + 3.0 * x[r] * x[r]) : 0.0;
      }
    }
  };
  m.jacobian_theta = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -(x[i] + x[i] * x[i] * x[i]);
  };
  m.potential = [](std::span<const double> x, std::span<const double> th) {
    double s = 0.0;
    for (double v : x) s += 0.5 * v * v + 0.25 * v * v * v * v;
    return -th[0] * s;
  };
  m.contraction = [](const ParameterBox& box) { return box.lower()(0); };
  return m;
}

// Pure-noise control: b == 0 for every theta. Not dissipative.
DriftModel zero_model(std::size_t dim) {
  DriftModel m{.name = "zero",
               .dim = dim,
               .param_dim = 1,
               .box = scalar_box(-1.0, 1.0),
               .drift = {},
               .jacobian_x = {},
               .jacobian_theta = {},
               .potential = {},
               .contraction = {}};
  const auto zeros = [](std::span<const double>, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  m.drift = zeros;
  m.jacobian_x = zeros;
  m.jacobian_theta = zeros;
  m.potential = [](std::span<const double>, std::span<const double>) { return 0.0; };
  return m;
}

}  // namespace

std::vector<std::string> builtin_model_names() {
  return {"fou", "fou-multi", "langevin-quartic", "zero"};
}

DriftModel make_model(const std::string& name, std::size_t dim) {
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "model dimension must be >= 1");
  if (name == "fou") {
    if (dim != 1) throw Error(ErrorKind::InvalidArgument, "\"fou\" is one-dimensional; use fou-multi");
    return linear_model("fou", 1);
  }
  if (name == "fou-multi") return linear_model("fou-multi", dim);
  if (name == "langevin-quartic") return quartic_model(dim);
  if (name == "zero") return zero_model(dim);
  throw Error(ErrorKind::UnknownModelName, "no built-in model named \"" + name + "\"");
}

}  // namespace zsq
