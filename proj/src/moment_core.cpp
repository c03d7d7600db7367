#include "bgmm/moment_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bgmm/errors.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

MomentModel::MomentModel(double radius) : radius_(radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("parameter radius must be positive");
}

bool MomentModel::in_domain(const VectorXd& theta) const {
  return theta.allFinite() && theta.norm() <= radius_;
}

VectorXd MomentModel::mean_moment(const VectorXd& theta) const {
  const auto n = num_observations();
  VectorXd sum = VectorXd::Zero(static_cast<Eigen::Index>(num_moments()));
  VectorXd g(sum.size());
  for (std::size_t i = 0; i < n; ++i) {
    moment(i, theta, g);
    if (!g.allFinite())
      throw EvaluationError("non-finite moment at observation " + std::to_string(i), i);
    sum += g;
  }
  return sum / static_cast<double>(n);
}

MatrixXd MomentModel::mean_jacobian(const VectorXd& theta) const {
  return finite_difference_jacobian(*this, theta);
}

MatrixXd finite_difference_jacobian(const MomentModel& model, const VectorXd& theta) {
  const auto p = theta.size();
  MatrixXd jac(static_cast<Eigen::Index>(model.num_moments()), p);
  VectorXd probe = theta;
  for (Eigen::Index k = 0; k < p; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta(k)));
    probe(k) = theta(k) + h;
    const VectorXd up = model.mean_moment(probe);
    probe(k) = theta(k) - h;
    const VectorXd down = model.mean_moment(probe);
    probe(k) = theta(k);
    jac.col(k) = (up - down) / (2.0 * h);
  }
  return jac;
}

VectorXd sample_moment_mean(const MomentModel& model, const VectorXd& theta) {
  if (model.num_observations() == 0) throw std::invalid_argument("empty dataset");
  if (!model.in_domain(theta)) throw DomainError("theta outside the parameter domain");
  VectorXd mean = model.mean_moment(theta);
  if (mean.allFinite()) return mean;
  VectorXd g(mean.size());
  for (std::size_t i = 0; i < model.num_observations(); ++i) {
    model.moment(i, theta, g);
    if (!g.allFinite())
      throw EvaluationError("non-finite moment at observation " + std::to_string(i), i);
  }
  throw EvaluationError("non-finite sample moment", model.num_observations());
}

MatrixXd moment_matrix(const MomentModel& model, const VectorXd& theta) {
  const auto n = model.num_observations();
  MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.num_moments()));
  VectorXd g(out.cols());
  for (std::size_t i = 0; i < n; ++i) {
    model.moment(i, theta, g);
    if (!g.allFinite())
      throw EvaluationError("non-finite moment at observation " + std::to_string(i), i);
    out.row(static_cast<Eigen::Index>(i)) = g.transpose();
  }
  return out;
}

WeightedCriterion::WeightedCriterion(MatrixXd v, std::size_t n) : v_(std::move(v)), n_(n) {
  if (v_.rows() != v_.cols() || v_.rows() == 0)
    throw std::invalid_argument("weighting matrix must be square and nonempty");
  if (n == 0) throw std::invalid_argument("sample size must be positive");
  if (!v_.allFinite()) throw SingularMatrixError("weighting matrix has non-finite entries");
  if (relative_asymmetry(v_) > 1e-10) throw std::invalid_argument("weighting matrix not symmetric");
  ridged_ = apply_ridge(v_).applied;
  llt_.compute(v_);
  if (llt_.info() != Eigen::Success) throw SingularMatrixError("weighting matrix not positive definite");
  const auto m = static_cast<double>(v_.rows());
  const MatrixXd l = llt_.matrixL();
  log_det_scaled_ = 2.0 * l.diagonal().array().log().sum() +
                    m * std::log(2.0 * std::numbers::pi / static_cast<double>(n_));
}

VectorXd WeightedCriterion::whiten(const VectorXd& x) const { return llt_.matrixL().solve(x); }

MatrixXd WeightedCriterion::whiten(const MatrixXd& x) const { return llt_.matrixL().solve(x); }

double WeightedCriterion::quadratic_form(const VectorXd& x) const { return whiten(x).squaredNorm(); }

WeightedCriterion WeightedCriterion::with_sample_size(std::size_t n) const {
  WeightedCriterion out = *this;
  if (n == 0) throw std::invalid_argument("sample size must be positive");
  out.n_ = n;
  out.log_det_scaled_ = log_det_scaled_ + static_cast<double>(v_.rows()) *
                                              std::log(static_cast<double>(n_) / static_cast<double>(n));
  return out;
}

WeightedCriterion estimate_weighting_matrix(const MomentModel& model, const VectorXd& theta_tilde) {
  const MatrixXd g = moment_matrix(model, theta_tilde);
  const auto n = static_cast<double>(g.rows());
  const MatrixXd centered = g.rowwise() - g.colwise().mean();
  MatrixXd v = centered.transpose() * centered / n;
  const double raw_scale = g.squaredNorm() / (n * static_cast<double>(g.cols()));
  apply_ridge(v, raw_scale);
  return WeightedCriterion(std::move(v), static_cast<std::size_t>(g.rows()));
}

double quasi_log_likelihood(const VectorXd& gbar, const WeightedCriterion& crit) {
  return -0.5 * crit.log_det_scaled() -
         0.5 * static_cast<double>(crit.sample_size()) * crit.quadratic_form(gbar);
}

VectorXd embed(const ModelIndex& model, const VectorXd& active) {
  const auto idx = model.indices();
  if (static_cast<std::size_t>(active.size()) != idx.size())
    throw std::invalid_argument("active vector of length " + std::to_string(active.size()) +
                                " does not match model size " + std::to_string(idx.size()));
  VectorXd full = VectorXd::Zero(static_cast<Eigen::Index>(model.dimension()));
  for (std::size_t k = 0; k < idx.size(); ++k) full(static_cast<Eigen::Index>(idx[k])) = active(static_cast<Eigen::Index>(k));
  return full;
}

VectorXd restrict_to(const ModelIndex& model, const VectorXd& full) {
  const auto idx = model.indices();
  VectorXd active(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) active(static_cast<Eigen::Index>(k)) = full(static_cast<Eigen::Index>(idx[k]));
  return active;
}

namespace {

MatrixXd select_columns(const MatrixXd& a, const std::vector<std::size_t>& cols) {
  MatrixXd out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a.col(static_cast<Eigen::Index>(cols[k]));
  return out;
}

double criterion_at(const MomentModel& moments, const WeightedCriterion& crit, const VectorXd& full) {
  if (!moments.in_domain(full)) return std::numeric_limits<double>::infinity();
  const VectorXd g = moments.mean_moment(full);
  if (!g.allFinite()) return std::numeric_limits<double>::infinity();
  return crit.quadratic_form(g);
}

GmmFit direct_search(const MomentModel& moments, const ModelIndex& model, const WeightedCriterion& crit,
                     const VectorXd& init) {
  VectorXd step(init.size());
  for (Eigen::Index k = 0; k < init.size(); ++k) step(k) = std::max(0.1, 0.1 * std::abs(init(k)));
  auto objective = [&](const VectorXd& x) { return criterion_at(moments, crit, embed(model, x)); };
  NelderMeadOptions opt;
  opt.tol_x = 1e-8;
  opt.tol_f = 0.0;
  opt.restarts = 4;
  const auto nm = nelder_mead(objective, init, step, opt);
  GmmFit fit;
  fit.model = model;
  fit.theta_hat = nm.x;
  fit.theta_full = embed(model, nm.x);
  fit.criterion_value = nm.value;
  fit.iterations = nm.evaluations;
  fit.converged = nm.converged && std::isfinite(nm.value);
  return fit;
}

}  // namespace

GmmFit gmm_estimate(const MomentModel& moments, const ModelIndex& model_index, const WeightedCriterion& crit,
                    const VectorXd& init, const GmmOptions& options) {
  if (model_index.empty()) throw std::invalid_argument("gmm_estimate needs a nonempty model");
  if (model_index.dimension() != moments.num_params())
    throw std::invalid_argument("model dimension does not match moment model");
  const VectorXd start = static_cast<std::size_t>(init.size()) == model_index.size() ? init
                         : static_cast<std::size_t>(init.size()) == model_index.dimension()
                             ? restrict_to(model_index, init)
                             : throw std::invalid_argument("initial value has the wrong length");
  VectorXd full = embed(model_index, start);
  if (!moments.in_domain(full)) throw DomainError("initial value outside the parameter domain");
  if (!moments.differentiable()) return direct_search(moments, model_index, crit, start);

  const auto cols = model_index.indices();
  VectorXd x = start;
  VectorXd residual = crit.whiten(sample_moment_mean(moments, full));
  double value = residual.squaredNorm();
  double lambda = 0.0;

  GmmFit fit;
  fit.model = model_index;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    const MatrixXd jac = crit.whiten(select_columns(moments.mean_jacobian(full), cols));
    const VectorXd gradient = 2.0 * jac.transpose() * residual;
    if (gradient.norm() < options.tol_grad) {
      fit.converged = true;
      break;
    }
    const MatrixXd normal = jac.transpose() * jac;
    const VectorXd rhs = -jac.transpose() * residual;
    const double scale = std::max(normal.diagonal().mean(), std::numeric_limits<double>::min());

    bool accepted = false;
    bool stop = false;
    while (!accepted) {
      MatrixXd damped = normal;
      damped.diagonal().array() += lambda;
      Eigen::LDLT<MatrixXd> ldlt(damped);
      const bool solvable = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                            ldlt.vectorD().minCoeff() > 1e-14 * scale;
      if (!solvable) {
        if (!damped.allFinite()) throw SingularMatrixError("Gauss-Newton system is not finite");
        lambda = lambda == 0.0 ? 1e-3 * scale : lambda * 10.0;
        if (lambda > 1e20 * scale) throw SingularMatrixError("Gauss-Newton system singular after damping");
        continue;
      }
      const VectorXd step = ldlt.solve(rhs);
      const VectorXd x_new = x + step;
      const VectorXd full_new = embed(model_index, x_new);
      const double value_new = criterion_at(moments, crit, full_new);
      if (value_new <= value) {
        x = x_new;
        full = full_new;
        residual = crit.whiten(moments.mean_moment(full));
        value = value_new;
        lambda = lambda < 1e-12 * scale ? 0.0 : lambda / 10.0;
        accepted = true;
        if (step.norm() < options.tol_step) {
          fit.converged = true;
          stop = true;
        }
      } else {
        if (step.norm() < options.tol_step) {
          // No representable decrease left along the damped direction.
          fit.converged = true;
          stop = true;
          break;
        }
        lambda = lambda == 0.0 ? 1e-3 * scale : lambda * 10.0;
        if (lambda > 1e20 * scale) {
          stop = true;
          break;
        }
      }
    }
    if (stop) {
      ++iter;
      break;
    }
  }
  fit.theta_hat = x;
  fit.theta_full = full;
  fit.criterion_value = value;
  fit.iterations = iter;
  return fit;
}

MatrixXd information_matrix(const MomentModel& moments, const VectorXd& theta, const ModelIndex& model,
                            const WeightedCriterion& crit) {
  const MatrixXd jac = crit.whiten(select_columns(moments.mean_jacobian(theta), model.indices()));
  MatrixXd info = jac.transpose() * jac;
  if (!info.allFinite()) throw SingularMatrixError("non-finite moment Jacobian");
  apply_ridge(info);
  return info;
}

MatrixXd estimate_param_covariance(const MomentModel& moments, const VectorXd& theta_tilde,
                                   const WeightedCriterion& crit) {
  const MatrixXd info =
      information_matrix(moments, theta_tilde, ModelIndex::full(moments.num_params()), crit);
  Eigen::LLT<MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("information matrix singular after ridge");
  const auto p = info.rows();
  MatrixXd xi = llt.solve(MatrixXd::Identity(p, p)) / static_cast<double>(crit.sample_size());
  return 0.5 * (xi + xi.transpose());
}

}  // namespace bgmm
