#pragma once

#include <functional>

#include <Eigen/Dense>

namespace bgmm {

/// Relative eigenvalue floor used for every weighting and information matrix.
inline constexpr double kRidgeEps = 1e-8;

struct RidgeResult {
  bool applied = false;
  double added = 0.0;
};

/// Ridge policy. With scale = mean diagonal of `a` (or `fallback_scale` when
/// that mean is zero), a multiple of the identity is added if the smallest
/// eigenvalue is below kRidgeEps * scale, lifting it to exactly that floor.
/// Throws SingularMatrixError when no positive scale exists.
RidgeResult apply_ridge(Eigen::MatrixXd& a, double fallback_scale = 0.0);

/// Largest relative asymmetry max|a - a^T| / max|a|.
double relative_asymmetry(const Eigen::MatrixXd& a);

double log_normal_pdf(double x, double mean, double sd);
double normal_cdf(double x);
double normal_quantile(double prob);

struct NelderMeadOptions {
  double tol_x = 1e-10;
  double tol_f = 1e-12;
  int max_evals = 20000;
  int restarts = 2;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f by the Nelder-Mead simplex method (standard coefficients
/// 1, 2, 0.5, 0.5), restarting from the incumbent with the original step.
/// f may return +inf to mark infeasible points.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const NelderMeadOptions& options = {});

}  // namespace bgmm
