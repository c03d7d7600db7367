#include <stdexcept>

#include "bgmm/errors.hpp"
#include "bgmm/models.hpp"

namespace bgmm {

std::size_t vech_size(std::size_t s) { return s * (s + 1) / 2; }

std::size_t vech_index(std::size_t i, std::size_t j, std::size_t s) {
  if (i > j || j >= s) throw std::out_of_range("vech_index expects i <= j < s");
  return i * s - (i * (i + 1)) / 2 + j;
}

VectorXd vech(const MatrixXd& a) {
  const auto s = static_cast<std::size_t>(a.rows());
  if (a.cols() != a.rows()) throw std::invalid_argument("vech expects a square matrix");
  VectorXd v(static_cast<Eigen::Index>(vech_size(s)));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i; j < a.cols(); ++j) v(k++) = a(i, j);
  return v;
}

MatrixXd unvech(const VectorXd& v, std::size_t s) {
  if (static_cast<std::size_t>(v.size()) != vech_size(s)) throw std::invalid_argument("unvech: wrong length");
  const auto n = static_cast<Eigen::Index>(s);
  MatrixXd a(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) a(i, j) = a(j, i) = v(k++);
  return a;
}

PrecisionParam PrecisionParam::from_omega(const MatrixXd& omega) {
  return {static_cast<std::size_t>(omega.rows()), vech(omega)};
}

namespace {

MatrixXd covariance_of(const MatrixXd& omega) {
  Eigen::LLT<MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) throw DomainError("precision matrix not positive definite");
  return llt.solve(MatrixXd::Identity(omega.rows(), omega.cols()));
}

}  // namespace

VectorXd partial_correlation_moment(const VectorXd& y, const PrecisionParam& param) {
  if (static_cast<std::size_t>(y.size()) != param.s) throw std::invalid_argument("response length != s");
  return vech(y * y.transpose()) - vech(covariance_of(param.omega()));
}

PrecisionMoment::PrecisionMoment(std::shared_ptr<const Dataset> data, PrecisionBounds bounds, double radius)
    : MomentModel(radius), s_(data->s), n_(data->n), bounds_(bounds) {
  if (data->n == 0 || data->s == 0 || data->Y.size() != static_cast<Eigen::Index>(data->n * data->s))
    throw std::invalid_argument("precision data must hold n*s responses");
  if (!(bounds.lambda_min > 0.0 && bounds.lambda_max > bounds.lambda_min))
    throw std::invalid_argument("invalid eigenvalue band");
  responses_ = data->response_matrix();
  mean_products_ = vech(responses_.transpose() * responses_ / static_cast<double>(n_));
}

bool PrecisionMoment::in_domain(const VectorXd& theta) const {
  if (!MomentModel::in_domain(theta)) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(unvech(theta, s_), Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return ev(0) >= bounds_.lambda_min && ev(ev.size() - 1) <= bounds_.lambda_max;
}

void PrecisionMoment::moment(std::size_t i, const VectorXd& theta, Eigen::Ref<VectorXd> out) const {
  const VectorXd y = responses_.row(static_cast<Eigen::Index>(i)).transpose();
  out = vech(y * y.transpose()) - vech(covariance_of(unvech(theta, s_)));
}

VectorXd PrecisionMoment::mean_moment(const VectorXd& theta) const {
  return mean_products_ - vech(covariance_of(unvech(theta, s_)));
}

MatrixXd PrecisionMoment::mean_jacobian(const VectorXd& theta) const {
  const MatrixXd sigma = covariance_of(unvech(theta, s_));
  const auto p = static_cast<Eigen::Index>(vech_size(s_));
  MatrixXd jac(p, p);
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(s_); ++a) {
    for (Eigen::Index b = a; b < static_cast<Eigen::Index>(s_); ++b, ++k) {
      MatrixXd d = sigma.col(a) * sigma.col(b).transpose();
      if (a != b) d += sigma.col(b) * sigma.col(a).transpose();
      jac.col(k) = vech(d);
    }
  }
  return jac;
}

PrecisionParam precision_preliminary(const Dataset& data) {
  const MatrixXd y = data.response_matrix();
  if (data.n < data.s + 1) throw std::invalid_argument("need n >= s + 1 observations");
  const MatrixXd centered = y.rowwise() - y.colwise().mean();
  const MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.n);
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("sample covariance singular");
  MatrixXd omega = llt.solve(MatrixXd::Identity(cov.rows(), cov.cols()));
  omega = 0.5 * (omega + omega.transpose()).eval();
  return PrecisionParam::from_omega(omega);
}

ModelIndex precision_diagonal(std::size_t s) {
  ModelIndex m(vech_size(s));
  for (std::size_t i = 0; i < s; ++i) m.insert(vech_index(i, i, s));
  return m;
}

ModelIndex precision_off_diagonal(std::size_t s) {
  return ModelIndex::full(vech_size(s)) - precision_diagonal(s);
}

}  // namespace bgmm
