#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "bgmm/model_index.hpp"

namespace bgmm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A moment-condition model g(D_i, theta) in R^m with E g(D, theta_0) = 0,
/// bound to its dataset.
///
/// Implementations must be immutable after construction; every method is
/// const and may be called concurrently.
class MomentModel {
 public:
  virtual ~MomentModel() = default;

  virtual std::size_t num_params() const = 0;
  virtual std::size_t num_moments() const = 0;
  virtual std::size_t num_observations() const = 0;

  /// Moment vector of observation i, written into out (length m).
  virtual void moment(std::size_t i, const VectorXd& theta, Eigen::Ref<VectorXd> out) const = 0;

  /// (1/n) sum_i g(D_i, theta). Families override this with sufficient statistics.
  virtual VectorXd mean_moment(const VectorXd& theta) const;

  /// m x p Jacobian of the mean moment. Default: central differences with
  /// step 1e-6 * max(1, |theta_k|).
  virtual MatrixXd mean_jacobian(const VectorXd& theta) const;

  virtual bool has_analytic_jacobian() const { return false; }

  /// False for moments that are step functions of theta; gmm_estimate then
  /// uses direct search instead of Gauss-Newton.
  virtual bool differentiable() const { return true; }

  /// Whether theta lies in the parameter domain. Default: L2 ball of radius().
  virtual bool in_domain(const VectorXd& theta) const;

  double radius() const { return radius_; }

 protected:
  explicit MomentModel(double radius);

 private:
  double radius_;
};

/// Central-difference Jacobian of model.mean_moment.
MatrixXd finite_difference_jacobian(const MomentModel& model, const VectorXd& theta);

/// (1/n) sum_i g(D_i, theta). Throws EvaluationError naming the first
/// observation with a non-finite moment, DomainError outside the domain.
VectorXd sample_moment_mean(const MomentModel& model, const VectorXd& theta);

/// n x m matrix of per-observation moments.
MatrixXd moment_matrix(const MomentModel& model, const VectorXd& theta);

/// Weighting matrix V_n with its Cholesky factor and the sample size n.
class WeightedCriterion {
 public:
  /// Validates symmetry (1e-10 relative), applies the ridge policy, factors.
  WeightedCriterion(MatrixXd v, std::size_t n);

  const MatrixXd& matrix() const { return v_; }
  MatrixXd lower() const { return llt_.matrixL(); }
  std::size_t sample_size() const { return n_; }
  std::size_t dimension() const { return static_cast<std::size_t>(v_.rows()); }
  bool ridged() const { return ridged_; }

  /// log det(2 pi V_n / n).
  double log_det_scaled() const { return log_det_scaled_; }

  /// L^{-1} x with V_n = L L^T.
  VectorXd whiten(const VectorXd& x) const;
  MatrixXd whiten(const MatrixXd& x) const;

  /// x^T V_n^{-1} x.
  double quadratic_form(const VectorXd& x) const;

  /// Same V_n, different n.
  WeightedCriterion with_sample_size(std::size_t n) const;

 private:
  MatrixXd v_;
  Eigen::LLT<MatrixXd> llt_;
  std::size_t n_;
  double log_det_scaled_;
  bool ridged_ = false;
};

/// Centered outer-product covariance of the per-observation moments at theta_tilde.
WeightedCriterion estimate_weighting_matrix(const MomentModel& model, const VectorXd& theta_tilde);

/// -1/2 log det(2 pi V_n / n) - (n/2) gbar^T V_n^{-1} gbar.
double quasi_log_likelihood(const VectorXd& gbar, const WeightedCriterion& crit);

struct GmmOptions {
  double tol_grad = 1e-8;
  double tol_step = 1e-10;
  int max_iter = 200;
};

struct GmmFit {
  ModelIndex model;
  VectorXd theta_hat;   // active coordinates, in increasing index order
  VectorXd theta_full;  // length p, zeros off the model
  double criterion_value = 0.0;  // gbar^T V_n^{-1} gbar at theta_hat
  int iterations = 0;
  bool converged = false;
};

/// Scatter active values into a length-p vector.
VectorXd embed(const ModelIndex& model, const VectorXd& active);
/// Gather the active coordinates of a length-p vector.
VectorXd restrict_to(const ModelIndex& model, const VectorXd& full);

/// GMM estimator restricted to the active coordinates of model_index.
/// Differentiable families use Levenberg-damped Gauss-Newton; the others use
/// Nelder-Mead. init holds either the active coordinates or a full length-p
/// vector. Non-convergence is reported through GmmFit::converged.
GmmFit gmm_estimate(const MomentModel& moments, const ModelIndex& model_index,
                    const WeightedCriterion& crit, const VectorXd& init,
                    const GmmOptions& options = {});

/// Xi = (G^T V_n^{-1} G)^{-1} / n with G the mean Jacobian at theta_tilde.
MatrixXd estimate_param_covariance(const MomentModel& moments, const VectorXd& theta_tilde,
                                   const WeightedCriterion& crit);

/// G^T V_n^{-1} G restricted to the columns of model (ridge policy applied).
MatrixXd information_matrix(const MomentModel& moments, const VectorXd& theta,
                            const ModelIndex& model, const WeightedCriterion& crit);

}  // namespace bgmm
