#pragma once

#include <cstddef>
#include <memory>

#include <Eigen/Dense>

#include "bgmm/moment_core.hpp"

namespace bgmm {

/// Balanced clustered data: n subjects with s positions each. Row
/// i*s + j of X and Y holds subject i at position j. The quantile family
/// uses s = 1; the partial-correlation family stores one s-vector per
/// subject in Y and leaves X with zero columns.
struct Dataset {
  std::size_t n = 0;
  std::size_t s = 1;
  std::size_t p = 0;
  MatrixXd X;
  VectorXd Y;

  auto subject_x(std::size_t i) const {
    return X.middleRows(static_cast<Eigen::Index>(i * s), static_cast<Eigen::Index>(s));
  }
  auto subject_y(std::size_t i) const {
    return Y.segment(static_cast<Eigen::Index>(i * s), static_cast<Eigen::Index>(s));
  }
  /// Partial-correlation layout: n x s matrix of responses.
  MatrixXd response_matrix() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Longitudinal (GEE-type) moments

enum class Link { identity, logit };

struct LongitudinalSpec {
  std::size_t s = 1;
  Link link = Link::identity;
  MatrixXd working_correlation;  // s x s, unit diagonal
  double dispersion = 1.0;       // phi for the identity link

  double mu(double t) const;
  double mu_dot(double t) const;
  double mu_ddot(double t) const;
  /// Conditional variance as a function of the single index.
  double phi(double t) const;

  void validate() const;
};

/// B(theta_tilde)^T S(theta_tilde)^{-1} (Y - mu(X theta)) for one subject.
VectorXd longitudinal_moment(const VectorXd& y, const MatrixXd& x, const VectorXd& theta,
                             const LongitudinalSpec& spec, const VectorXd& theta_tilde);

/// Longitudinal moment with the preliminary estimate plugged into B and S.
/// The per-subject weights B_i^T S_i^{-1} are precomputed, so evaluation is
/// linear in the data for every link.
class LongitudinalMoment final : public MomentModel {
 public:
  LongitudinalMoment(std::shared_ptr<const Dataset> data, LongitudinalSpec spec, VectorXd theta_tilde,
                     double radius = 100.0);

  std::size_t num_params() const override { return data_->p; }
  std::size_t num_moments() const override { return data_->p; }
  std::size_t num_observations() const override { return data_->n; }
  void moment(std::size_t i, const VectorXd& theta, Eigen::Ref<VectorXd> out) const override;
  VectorXd mean_moment(const VectorXd& theta) const override;
  MatrixXd mean_jacobian(const VectorXd& theta) const override;
  bool has_analytic_jacobian() const override { return true; }

  const LongitudinalSpec& spec() const { return spec_; }
  const Dataset& data() const { return *data_; }
  const VectorXd& theta_tilde() const { return theta_tilde_; }

 private:
  VectorXd linear_index(const VectorXd& theta) const;

  std::shared_ptr<const Dataset> data_;
  LongitudinalSpec spec_;
  VectorXd theta_tilde_;
  MatrixXd weights_;  // p x (n s): column block i is B_i^T S_i^{-1}
  VectorXd weighted_y_;  // (1/n) sum_i B_i^T S_i^{-1} Y_i
};

/// Newton solve of sum_i X_i^T (Y_i - mu_i(theta)) = 0. Throws
/// ConvergenceError carrying the last iterate when the iteration leaves the
/// radius or fails to settle within max_iter.
VectorXd longitudinal_preliminary(const Dataset& data, const LongitudinalSpec& spec, int max_iter = 100,
                                  double radius = 100.0);

/// Unstructured correlation of the standardized residuals at theta_tilde.
MatrixXd estimate_working_correlation(const Dataset& data, const LongitudinalSpec& spec,
                                      const VectorXd& theta_tilde);

MatrixXd exchangeable_correlation(std::size_t s, double rho);

// ---------------------------------------------------------------------------
// Quantile regression moments

struct QuantileSpec {
  double tau = 0.5;
  void validate() const;
};

/// X [1(Y - X^T theta <= 0) - tau].
VectorXd quantile_moment(double y, const VectorXd& x, const VectorXd& theta, const QuantileSpec& spec);

class QuantileMoment final : public MomentModel {
 public:
  QuantileMoment(std::shared_ptr<const Dataset> data, QuantileSpec spec, double radius = 100.0);

  std::size_t num_params() const override { return data_->p; }
  std::size_t num_moments() const override { return data_->p; }
  std::size_t num_observations() const override { return data_->n; }
  void moment(std::size_t i, const VectorXd& theta, Eigen::Ref<VectorXd> out) const override;
  VectorXd mean_moment(const VectorXd& theta) const override;
  /// Gaussian-kernel estimate (1/n) sum K_h(Y - X^T theta) X X^T of the
  /// derivative of the expected moment; bandwidth by Silverman's rule on the
  /// residuals. The sample moment itself is a step function.
  MatrixXd mean_jacobian(const VectorXd& theta) const override;
  bool has_analytic_jacobian() const override { return true; }
  bool differentiable() const override { return false; }

  const QuantileSpec& spec() const { return spec_; }

 private:
  std::shared_ptr<const Dataset> data_;
  QuantileSpec spec_;
};

/// Linear quantile regression fit by iteratively reweighted least squares on
/// the check loss; the starting point for GMM and the sampler.
VectorXd quantile_preliminary(const Dataset& data, const QuantileSpec& spec, int max_iter = 200);

/// tau (1 - tau) (1/n) sum X_i X_i^T, ridge policy applied.
WeightedCriterion quantile_weighting(const Dataset& data, const QuantileSpec& spec);

// ---------------------------------------------------------------------------
// Partial-correlation moments

/// Length of the vectorized upper triangle of an s x s matrix.
std::size_t vech_size(std::size_t s);
/// Position of entry (i, j), i <= j, in the row-major upper triangle.
std::size_t vech_index(std::size_t i, std::size_t j, std::size_t s);
VectorXd vech(const MatrixXd& a);
MatrixXd unvech(const VectorXd& v, std::size_t s);

/// Precision matrix Omega parameterized by its row-major upper triangle.
struct PrecisionParam {
  std::size_t s = 0;
  VectorXd theta;

  MatrixXd omega() const { return unvech(theta, s); }
  static PrecisionParam from_omega(const MatrixXd& omega);
};

/// vech(Y Y^T - Omega^{-1}). Throws DomainError when Omega is not PD.
VectorXd partial_correlation_moment(const VectorXd& y, const PrecisionParam& param);

struct PrecisionBounds {
  double lambda_min = 1e-3;
  double lambda_max = 1e3;
};

class PrecisionMoment final : public MomentModel {
 public:
  PrecisionMoment(std::shared_ptr<const Dataset> data, PrecisionBounds bounds = {}, double radius = 1e4);

  std::size_t num_params() const override { return vech_size(s_); }
  std::size_t num_moments() const override { return vech_size(s_); }
  std::size_t num_observations() const override { return n_; }
  void moment(std::size_t i, const VectorXd& theta, Eigen::Ref<VectorXd> out) const override;
  VectorXd mean_moment(const VectorXd& theta) const override;
  MatrixXd mean_jacobian(const VectorXd& theta) const override;
  bool has_analytic_jacobian() const override { return true; }
  /// Radius check plus eigenvalues of Omega inside [lambda_min, lambda_max].
  bool in_domain(const VectorXd& theta) const override;

  std::size_t variables() const { return s_; }

 private:
  std::size_t s_;
  std::size_t n_;
  PrecisionBounds bounds_;
  MatrixXd responses_;       // n x s
  VectorXd mean_products_;   // vech((1/n) sum Y Y^T)
};

/// Inverse of the mean-centered sample covariance (divisor n).
PrecisionParam precision_preliminary(const Dataset& data);

/// Diagonal coordinates of the vectorized precision matrix.
ModelIndex precision_diagonal(std::size_t s);
/// Off-diagonal coordinates, the ones subject to selection.
ModelIndex precision_off_diagonal(std::size_t s);

}  // namespace bgmm
