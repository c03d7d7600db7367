#pragma once

#include <cstddef>
#include <memory>

#include "bgmm/model_index.hpp"
#include "bgmm/moment_core.hpp"

namespace bgmm {

/// Prior on the active coordinates given a model.
struct ParamPrior {
  enum class Kind { normal, uniform_box };
  Kind kind = Kind::normal;
  double sigma = 10.0;        // normal: sd of each active coordinate
  double half_width = 100.0;  // uniform_box: each active coordinate ~ U[-half_width, half_width]

  void validate() const;
};

/// Prior over models, defined on the selectable coordinates.
///   uniform:       pi(M) = 1 / (2^p - 1)              (2^p with the null model)
///   size_uniform:  pi(M) = (1/p) C(p, |M|)^{-1}       (1/(p+1) with the null model)
struct ModelPrior {
  enum class Kind { uniform, size_uniform };
  Kind kind = Kind::size_uniform;
  std::size_t p = 0;
  bool include_null = false;

  void validate() const;
};

/// Sum of log prior densities over theta_active.
double log_param_prior(const VectorXd& theta_active, const ParamPrior& prior);
/// Same, reading the active coordinates of a full-length theta.
double log_param_prior(const VectorXd& theta, const ModelIndex& model, const ParamPrior& prior);

/// Log prior of a model with `size` selected coordinates. Throws
/// DomainError for the empty model when the null model is excluded.
double log_model_prior(std::size_t size, const ModelPrior& prior);
double log_model_prior(const ModelIndex& model, const ModelPrior& prior);

/// Unnormalized log density on the joint (theta, M) space, as seen by the
/// sampler. theta has length dimension() with zeros off the model.
class JointDensity {
 public:
  virtual ~JointDensity() = default;
  virtual double log_density(const VectorXd& theta, const ModelIndex& model) const = 0;
  /// Coordinates that between-model moves may add or remove.
  virtual const ModelIndex& selectable() const = 0;
  virtual std::size_t dimension() const = 0;
  /// Whether the model has positive prior mass.
  virtual bool admissible(const ModelIndex& model) const { return model.dimension() == dimension(); }
};

/// Unnormalized joint quasi-posterior over (theta, M):
///   log q(D|theta) + log pi(theta|M) + log pi(M).
///
/// Coordinates outside `selectable` are always active (diagonal entries of a
/// precision matrix); the model prior counts selectable coordinates only.
/// Immutable and shareable across threads.
class QuasiPosterior : public JointDensity {
 public:
  QuasiPosterior(std::shared_ptr<const MomentModel> moments, WeightedCriterion criterion,
                 ParamPrior param_prior, ModelPrior model_prior, ModelIndex selectable);

  /// Joint log density; -inf outside the domain or for inadmissible models.
  /// Throws std::invalid_argument if theta is nonzero off the model.
  double log_density(const VectorXd& theta, const ModelIndex& model) const override;

  /// log q(D|theta) + log pi(theta|M): the integrand of the marginal
  /// quasi-likelihood of M.
  double log_integrand(const VectorXd& theta, const ModelIndex& model) const;

  double log_quasi_likelihood(const VectorXd& theta) const;

  /// Whether M contains every fixed coordinate and has an admissible selectable part.
  bool admissible(const ModelIndex& model) const override;
  double log_model_prior_of(const ModelIndex& model) const;

  const MomentModel& moments() const { return *moments_; }
  std::shared_ptr<const MomentModel> moments_ptr() const { return moments_; }
  const WeightedCriterion& criterion() const { return criterion_; }
  const ParamPrior& param_prior() const { return param_prior_; }
  const ModelPrior& model_prior() const { return model_prior_; }
  const ModelIndex& selectable() const override { return selectable_; }
  const ModelIndex& fixed() const { return fixed_; }
  std::size_t dimension() const override { return moments_->num_params(); }

 private:
  std::shared_ptr<const MomentModel> moments_;
  WeightedCriterion criterion_;
  ParamPrior param_prior_;
  ModelPrior model_prior_;
  ModelIndex selectable_;
  ModelIndex fixed_;
};

/// Free-function form of QuasiPosterior::log_density.
double log_joint_quasi_posterior(const VectorXd& theta, const ModelIndex& model, const QuasiPosterior& posterior);

}  // namespace bgmm
