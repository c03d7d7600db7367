#include "doctest.h"

#include <cmath>
#include <limits>

#include "bgmm/errors.hpp"
#include "bgmm/numerics.hpp"

using namespace bgmm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("ridge leaves well-conditioned matrices alone") {
  MatrixXd a = MatrixXd::Identity(3, 3);
  const auto r = apply_ridge(a);
  CHECK_FALSE(r.applied);
  CHECK(a.isApprox(MatrixXd::Identity(3, 3)));
}

TEST_CASE("ridge lifts the smallest eigenvalue to the floor") {
  MatrixXd a(2, 2);
  a << 1.0, 1.0, 1.0, 1.0;
  const auto r = apply_ridge(a);
  CHECK(r.applied);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
  CHECK(eig.eigenvalues()(0) == doctest::Approx(kRidgeEps * 1.0).epsilon(1e-6));
}

TEST_CASE("ridge of a zero matrix needs a fallback scale") {
  MatrixXd z = MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(apply_ridge(z), SingularMatrixError);
  MatrixXd w = MatrixXd::Zero(2, 2);
  apply_ridge(w, 4.0);
  CHECK(w(0, 0) == doctest::Approx(4.0 * kRidgeEps));
}

TEST_CASE("relative asymmetry") {
  MatrixXd a(2, 2);
  a << 2.0, 1.0, 0.5, 2.0;
  CHECK(relative_asymmetry(a) == doctest::Approx(0.25));
  CHECK(relative_asymmetry(MatrixXd::Zero(2, 2)) == 0.0);
}

TEST_CASE("normal helpers") {
  CHECK(log_normal_pdf(0.0, 0.0, 1.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)));
  CHECK(log_normal_pdf(10.0, 0.0, 10.0) == doctest::Approx(-0.5 * std::log(200.0 * M_PI) - 0.5));
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.0) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(normal_quantile(1.5), DomainError);
  for (double p : {1e-10, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-9})
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("Nelder-Mead minimizes a convex quadratic") {
  auto f = [](const VectorXd& x) { return (x(0) - 1.0) * (x(0) - 1.0) + 10.0 * (x(1) + 2.0) * (x(1) + 2.0); };
  const auto r = nelder_mead(f, VectorXd::Zero(2), VectorXd::Constant(2, 0.5));
  CHECK(r.converged);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x(1) == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("Nelder-Mead respects infeasible regions") {
  auto f = [](const VectorXd& x) {
    if (x(0) < 0.5) return std::numeric_limits<double>::infinity();
    return x(0) * x(0);
  };
  VectorXd x0(1);
  x0 << 2.0;
  const auto r = nelder_mead(f, x0, VectorXd::Constant(1, 0.5));
  CHECK(r.x(0) >= 0.5);
  CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-6));
}
