#include "zsq/nelder_mead.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "zsq/error.hpp"

namespace zsq {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const ParameterBox& box, const Eigen::VectorXd& start,
                             const Eigen::VectorXd& initial_step, const NelderMeadOptions& options) {
  constexpr double kReflect = 1.0;
  constexpr double kExpand = 2.0;
  constexpr double kContract = 0.5;
  constexpr double kShrink = 0.5;

  const auto q = start.size();
  const auto nv = static_cast<std::size_t>(q) + 1;
  std::vector<Eigen::VectorXd> pts(nv);
  std::vector<double> vals(nv);

  pts[0] = box.project(start);
  for (Eigen::Index i = 0; i < q; ++i) {
    Eigen::VectorXd p = pts[0];
    p(i) += initial_step(i);
    if (p(i) > box.upper()(i)) p(i) = pts[0](i) - initial_step(i);
    pts[static_cast<std::size_t>(i) + 1] = box.project(p);
  }
  for (std::size_t v = 0; v < nv; ++v) vals[v] = objective(pts[v]);

  std::vector<std::size_t> order(nv);
  const auto sort = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
  };
  const auto diameter = [&] {
    double dmax = 0.0;
    for (std::size_t v = 1; v < nv; ++v) {
      dmax = std::max(dmax, (pts[order[v]] - pts[order[0]]).lpNorm<Eigen::Infinity>());
    }
    return dmax;
  };

  NelderMeadResult result;
  sort();
  while (result.iterations < options.max_iterations) {
    if (diameter() < options.tolerance) {
      result.converged = true;
      break;
    }
    ++result.iterations;
    const std::size_t best = order[0];
    const std::size_t worst = order[nv - 1];
    const std::size_t second = order[nv > 1 ? nv - 2 : 0];

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(q);
    for (std::size_t v = 0; v + 1 < nv; ++v) centroid += pts[order[v]];
    centroid /= static_cast<double>(nv - 1);

    const Eigen::VectorXd xr = box.project(centroid + kReflect * (centroid - pts[worst]));
    const double fr = objective(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = box.project(centroid + kExpand * (xr - centroid));
      const double fe = objective(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + kContract * (xr - centroid))
                                         : Eigen::VectorXd(centroid + kContract * (pts[worst] - centroid));
      const double fc = objective(xc);
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (std::size_t v = 0; v < nv; ++v) {
          if (v == best) continue;
          pts[v] = pts[best] + kShrink * (pts[v] - pts[best]);
          vals[v] = objective(pts[v]);
        }
      }
    }
    sort();
  }
  if (!result.converged && diameter() < options.tolerance) result.converged = true;
  result.best = pts[order[0]];
  result.value = vals[order[0]];
  return result;
}

}  // namespace zsq
