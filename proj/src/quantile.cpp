#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bgmm/errors.hpp"
#include "bgmm/models.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

void QuantileSpec::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
}

VectorXd quantile_moment(double y, const VectorXd& x, const VectorXd& theta, const QuantileSpec& spec) {
  if (x.size() != theta.size()) throw std::invalid_argument("quantile_moment: dimension mismatch");
  const double indicator = (y - x.dot(theta) <= 0.0) ? 1.0 : 0.0;
  return x * (indicator - spec.tau);
}

QuantileMoment::QuantileMoment(std::shared_ptr<const Dataset> data, QuantileSpec spec, double radius)
    : MomentModel(radius), data_(std::move(data)), spec_(spec) {
  data_->validate();
  spec_.validate();
  if (data_->s != 1) throw std::invalid_argument("quantile data must have one row per subject");
}

void QuantileMoment::moment(std::size_t i, const VectorXd& theta, Eigen::Ref<VectorXd> out) const {
  const auto row = static_cast<Eigen::Index>(i);
  const double indicator = (data_->Y(row) - data_->X.row(row).dot(theta) <= 0.0) ? 1.0 : 0.0;
  out = data_->X.row(row).transpose() * (indicator - spec_.tau);
}

VectorXd QuantileMoment::mean_moment(const VectorXd& theta) const {
  const VectorXd resid = data_->Y - data_->X * theta;
  VectorXd w(resid.size());
  for (Eigen::Index k = 0; k < resid.size(); ++k) w(k) = (resid(k) <= 0.0 ? 1.0 : 0.0) - spec_.tau;
  return data_->X.transpose() * w / static_cast<double>(data_->n);
}

MatrixXd QuantileMoment::mean_jacobian(const VectorXd& theta) const {
  const VectorXd resid = data_->Y - data_->X * theta;
  const double n = static_cast<double>(resid.size());
  const double mean = resid.mean();
  const double sd = std::sqrt((resid.array() - mean).square().sum() / std::max(1.0, n - 1.0));
  const double h = std::max(1.06 * sd * std::pow(n, -0.2), 1e-8);
  VectorXd k(resid.size());
  for (Eigen::Index i = 0; i < resid.size(); ++i) {
    const double z = resid(i) / h;
    k(i) = std::exp(-0.5 * z * z) / (h * std::sqrt(2.0 * std::numbers::pi));
  }
  return data_->X.transpose() * k.asDiagonal() * data_->X / n;
}

VectorXd quantile_preliminary(const Dataset& data, const QuantileSpec& spec, int max_iter) {
  data.validate();
  spec.validate();
  const MatrixXd& X = data.X;
  const VectorXd& Y = data.Y;
  Eigen::LDLT<MatrixXd> ols(X.transpose() * X);
  if (ols.info() != Eigen::Success || ols.vectorD().minCoeff() <= 0.0)
    throw SingularMatrixError("quantile design is rank deficient");
  VectorXd theta = ols.solve(X.transpose() * Y);
  const double floor = 1e-8 * (1.0 + Y.cwiseAbs().mean());
  VectorXd w(Y.size());
  for (int iter = 0; iter < max_iter; ++iter) {
    const VectorXd r = Y - X * theta;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      w(i) = (r(i) >= 0.0 ? spec.tau : 1.0 - spec.tau) / std::max(std::abs(r(i)), floor);
    Eigen::LDLT<MatrixXd> ldlt(X.transpose() * w.asDiagonal() * X);
    if (ldlt.info() != Eigen::Success) break;
    const VectorXd next = ldlt.solve(X.transpose() * w.asDiagonal() * Y);
    if (!next.allFinite()) break;
    const double change = (next - theta).norm();
    theta = next;
    if (change < 1e-10 * (1.0 + theta.norm())) break;
  }
  return theta;
}

WeightedCriterion quantile_weighting(const Dataset& data, const QuantileSpec& spec) {
  data.validate();
  spec.validate();
  MatrixXd v = spec.tau * (1.0 - spec.tau) * (data.X.transpose() * data.X) / static_cast<double>(data.n);
  apply_ridge(v);
  return WeightedCriterion(std::move(v), data.n);
}

}  // namespace bgmm
