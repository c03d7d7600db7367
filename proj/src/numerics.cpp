#include "bgmm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "bgmm/errors.hpp"

namespace bgmm {

RidgeResult apply_ridge(Eigen::MatrixXd& a, double fallback_scale) {
  const auto m = a.rows();
  a = 0.5 * (a + a.transpose()).eval();
  double scale = m > 0 ? a.trace() / static_cast<double>(m) : 0.0;
  if (!(scale > 0.0)) scale = fallback_scale;
  if (!std::isfinite(scale) || !(scale > 0.0) || !a.allFinite())
    throw SingularMatrixError("matrix has no positive scale to ridge against");

  const double floor = kRidgeEps * scale;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues()(0);
  if (lambda_min >= floor) return {};
  const double added = floor - lambda_min;
  a.diagonal().array() += added;
  return {true, added};
}

double relative_asymmetry(const Eigen::MatrixXd& a) {
  const double mag = a.cwiseAbs().maxCoeff();
  if (mag == 0.0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff() / mag;
}

double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double prob) {
  if (!(prob > 0.0) || !(prob < 1.0)) {
    if (prob == 0.0) return -std::numeric_limits<double>::infinity();
    if (prob == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal quantile outside (0,1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

namespace {

NelderMeadResult nelder_mead_once(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                  const NelderMeadOptions& opt, int budget) {
  const auto d = x0.size();
  std::vector<Eigen::VectorXd> pts(d + 1, x0);
  std::vector<double> vals(d + 1);
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  vals[0] = eval(pts[0]);
  for (Eigen::Index k = 0; k < d; ++k) {
    pts[k + 1](k) += step(k);
    vals[k + 1] = eval(pts[k + 1]);
  }
  std::vector<std::size_t> order(d + 1);
  bool converged = false;
  while (evals < budget) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const auto best = order.front(), worst = order.back(), second = order[d - 1];
    double size = 0.0;
    for (auto i : order) size = std::max(size, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
    const double spread = vals[worst] - vals[best];
    if (size < opt.tol_x || (std::isfinite(spread) && spread <= opt.tol_f * (1.0 + std::abs(vals[best])) &&
                             size < std::sqrt(opt.tol_x))) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (auto i : order)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (auto i : order) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], evals, converged};
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const NelderMeadOptions& options) {
  if (x0.size() == 0) return {x0, f(x0), 1, true};
  NelderMeadResult result = nelder_mead_once(f, x0, step, options, options.max_evals);
  int used = result.evaluations;
  for (int r = 0; r < options.restarts && used < options.max_evals; ++r) {
    auto again = nelder_mead_once(f, result.x, step, options, options.max_evals - used);
    used += again.evaluations;
    const bool improved = again.value < result.value;
    if (improved) result = again;
    result.evaluations = used;
    if (!improved) {
      result.converged = again.converged || result.converged;
      break;
    }
  }
  result.evaluations = used;
  return result;
}

}  // namespace bgmm
