#include <cmath>
#include <stdexcept>
#include <string>

#include "bgmm/errors.hpp"
#include "bgmm/models.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

namespace {

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

MatrixXd Dataset::response_matrix() const {
  MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s));
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = subject_y(i).transpose();
  return out;
}

void Dataset::validate() const {
  if (n == 0 || s == 0) throw std::invalid_argument("dataset has no observations");
  const auto rows = static_cast<Eigen::Index>(n * s);
  if (Y.size() != rows) throw std::invalid_argument("response length does not match n*s");
  if (X.rows() != rows && !(p == 0 && X.size() == 0))
    throw std::invalid_argument("covariate rows do not match n*s");
  if (X.cols() != static_cast<Eigen::Index>(p) && !(p == 0 && X.size() == 0))
    throw std::invalid_argument("covariate columns do not match p");
  if (!Y.allFinite() || !X.allFinite()) throw std::invalid_argument("dataset contains non-finite values");
}

double LongitudinalSpec::mu(double t) const { return link == Link::identity ? t : logistic(t); }

double LongitudinalSpec::mu_dot(double t) const {
  if (link == Link::identity) return 1.0;
  const double m = logistic(t);
  return m * (1.0 - m);
}

double LongitudinalSpec::mu_ddot(double t) const {
  if (link == Link::identity) return 0.0;
  const double m = logistic(t);
  return m * (1.0 - m) * (1.0 - 2.0 * m);
}

double LongitudinalSpec::phi(double t) const {
  if (link == Link::identity) return dispersion;
  const double m = logistic(t);
  return m * (1.0 - m);
}

void LongitudinalSpec::validate() const {
  const auto n = static_cast<Eigen::Index>(s);
  if (s == 0) throw std::invalid_argument("cluster size must be positive");
  if (working_correlation.rows() != n || working_correlation.cols() != n)
    throw std::invalid_argument("working correlation must be s x s");
  if (relative_asymmetry(working_correlation) > 1e-10)
    throw std::invalid_argument("working correlation not symmetric");
  if ((working_correlation.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10)
    throw std::invalid_argument("working correlation must have unit diagonal");
  Eigen::LLT<MatrixXd> llt(working_correlation);
  if (llt.info() != Eigen::Success) throw DomainError("working correlation not positive definite");
  if (!(dispersion > 0.0)) throw std::invalid_argument("dispersion must be positive");
}

namespace {

// B^T S^{-1} at the preliminary estimate for one subject (p x s).
MatrixXd subject_weight(const MatrixXd& x, const VectorXd& theta_tilde, const LongitudinalSpec& spec) {
  const auto s = x.rows();
  const VectorXd eta = x * theta_tilde;
  VectorXd root_phi(s);
  VectorXd slope(s);
  for (Eigen::Index j = 0; j < s; ++j) {
    const double v = spec.phi(eta(j));
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("variance function not positive");
    root_phi(j) = std::sqrt(v);
    slope(j) = spec.mu_dot(eta(j));
  }
  const MatrixXd S = root_phi.asDiagonal() * spec.working_correlation * root_phi.asDiagonal();
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw DomainError("S = A^{1/2} R A^{1/2} not positive definite");
  const MatrixXd B = slope.asDiagonal() * x;
  return llt.solve(B).transpose();
}

}  // namespace

VectorXd longitudinal_moment(const VectorXd& y, const MatrixXd& x, const VectorXd& theta,
                             const LongitudinalSpec& spec, const VectorXd& theta_tilde) {
  if (x.rows() != y.size() || x.cols() != theta.size() || theta_tilde.size() != theta.size())
    throw std::invalid_argument("longitudinal_moment: dimension mismatch");
  const VectorXd eta = x * theta;
  VectorXd resid(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) resid(j) = y(j) - spec.mu(eta(j));
  return subject_weight(x, theta_tilde, spec) * resid;
}

LongitudinalMoment::LongitudinalMoment(std::shared_ptr<const Dataset> data, LongitudinalSpec spec,
                                       VectorXd theta_tilde, double radius)
    : MomentModel(radius), data_(std::move(data)), spec_(std::move(spec)), theta_tilde_(std::move(theta_tilde)) {
  data_->validate();
  spec_.validate();
  if (spec_.s != data_->s) throw std::invalid_argument("spec cluster size does not match data");
  if (theta_tilde_.size() != static_cast<Eigen::Index>(data_->p))
    throw std::invalid_argument("preliminary estimate has wrong length");
  const auto p = static_cast<Eigen::Index>(data_->p);
  const auto s = static_cast<Eigen::Index>(data_->s);
  weights_.resize(p, static_cast<Eigen::Index>(data_->n) * s);
  for (std::size_t i = 0; i < data_->n; ++i)
    weights_.middleCols(static_cast<Eigen::Index>(i) * s, s) =
        subject_weight(data_->subject_x(i), theta_tilde_, spec_);
  weighted_y_ = weights_ * data_->Y / static_cast<double>(data_->n);
}

VectorXd LongitudinalMoment::linear_index(const VectorXd& theta) const {
  VectorXd eta = VectorXd::Zero(data_->X.rows());
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (theta(j) != 0.0) eta.noalias() += theta(j) * data_->X.col(j);
  return eta;
}

void LongitudinalMoment::moment(std::size_t i, const VectorXd& theta, Eigen::Ref<VectorXd> out) const {
  const auto s = static_cast<Eigen::Index>(data_->s);
  const VectorXd eta = data_->subject_x(i) * theta;
  VectorXd resid(s);
  const auto y = data_->subject_y(i);
  for (Eigen::Index j = 0; j < s; ++j) resid(j) = y(j) - spec_.mu(eta(j));
  out = weights_.middleCols(static_cast<Eigen::Index>(i) * s, s) * resid;
}

VectorXd LongitudinalMoment::mean_moment(const VectorXd& theta) const {
  VectorXd mu = linear_index(theta);
  if (spec_.link != Link::identity)
    for (Eigen::Index k = 0; k < mu.size(); ++k) mu(k) = spec_.mu(mu(k));
  return weighted_y_ - weights_ * mu / static_cast<double>(data_->n);
}

MatrixXd LongitudinalMoment::mean_jacobian(const VectorXd& theta) const {
  if (spec_.link == Link::identity) return -weights_ * data_->X / static_cast<double>(data_->n);
  const VectorXd eta = linear_index(theta);
  VectorXd slope(eta.size());
  for (Eigen::Index k = 0; k < eta.size(); ++k) slope(k) = spec_.mu_dot(eta(k));
  return -weights_ * (slope.asDiagonal() * data_->X) / static_cast<double>(data_->n);
}

VectorXd longitudinal_preliminary(const Dataset& data, const LongitudinalSpec& spec, int max_iter,
                                  double radius) {
  data.validate();
  const auto p = static_cast<Eigen::Index>(data.p);
  const MatrixXd& X = data.X;
  VectorXd theta = VectorXd::Zero(p);

  auto score = [&](const VectorXd& t) {
    VectorXd eta = X * t;
    for (Eigen::Index k = 0; k < eta.size(); ++k) eta(k) = data.Y(k) - spec.mu(eta(k));
    return VectorXd(X.transpose() * eta);
  };

  VectorXd u = score(theta);
  for (int iter = 0; iter < max_iter; ++iter) {
    const VectorXd eta = X * theta;
    VectorXd slope(eta.size());
    for (Eigen::Index k = 0; k < eta.size(); ++k) slope(k) = spec.mu_dot(eta(k));
    const MatrixXd info = X.transpose() * slope.asDiagonal() * X;
    Eigen::LDLT<MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
      throw ConvergenceError("preliminary Newton system singular", theta);
    VectorXd step = ldlt.solve(u);
    VectorXd next = theta + step;
    VectorXd u_next = score(next);
    for (int halving = 0; halving < 30 && u_next.norm() > u.norm(); ++halving) {
      step *= 0.5;
      next = theta + step;
      u_next = score(next);
    }
    theta = next;
    u = u_next;
    if (!theta.allFinite() || theta.norm() > radius)
      throw ConvergenceError("preliminary estimator diverged beyond the parameter radius", theta);
    if (step.norm() < 1e-10 * (1.0 + theta.norm())) return theta;
  }
  throw ConvergenceError("preliminary estimator did not converge in " + std::to_string(max_iter) +
                             " iterations",
                         theta);
}

MatrixXd estimate_working_correlation(const Dataset& data, const LongitudinalSpec& spec,
                                      const VectorXd& theta_tilde) {
  const auto s = static_cast<Eigen::Index>(data.s);
  MatrixXd r = MatrixXd::Zero(s, s);
  VectorXd e(s);
  for (std::size_t i = 0; i < data.n; ++i) {
    const VectorXd eta = data.subject_x(i) * theta_tilde;
    const auto y = data.subject_y(i);
    for (Eigen::Index j = 0; j < s; ++j) e(j) = (y(j) - spec.mu(eta(j))) / std::sqrt(spec.phi(eta(j)));
    r.noalias() += e * e.transpose();
  }
  r /= static_cast<double>(data.n);
  apply_ridge(r, 1.0);
  const VectorXd inv_sd = r.diagonal().array().rsqrt();
  MatrixXd corr = inv_sd.asDiagonal() * r * inv_sd.asDiagonal();
  corr = 0.5 * (corr + corr.transpose()).eval();
  corr.diagonal().setOnes();
  return corr;
}

MatrixXd exchangeable_correlation(std::size_t s, double rho) {
  const auto n = static_cast<Eigen::Index>(s);
  if (s > 1 && !(rho > -1.0 / static_cast<double>(s - 1) && rho < 1.0))
    throw std::invalid_argument("exchangeable correlation outside (-1/(s-1), 1)");
  MatrixXd r = MatrixXd::Constant(n, n, rho);
  r.diagonal().setOnes();
  return r;
}

}  // namespace bgmm
