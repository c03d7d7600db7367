#include "bgmm/priors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bgmm/errors.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_binomial(std::size_t p, std::size_t k) {
  return std::lgamma(static_cast<double>(p) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(p - k) + 1.0);
}

}  // namespace

void ParamPrior::validate() const {
  if (kind == Kind::normal && !(sigma > 0.0)) throw std::invalid_argument("prior sd must be positive");
  if (kind == Kind::uniform_box && !(half_width > 0.0))
    throw std::invalid_argument("prior half-width must be positive");
}

void ModelPrior::validate() const {
  if (p == 0 && !include_null) throw std::invalid_argument("model prior over an empty model space");
}

double log_param_prior(const VectorXd& theta_active, const ParamPrior& prior) {
  double total = 0.0;
  if (prior.kind == ParamPrior::Kind::normal) {
    for (Eigen::Index k = 0; k < theta_active.size(); ++k)
      total += log_normal_pdf(theta_active(k), 0.0, prior.sigma);
    return total;
  }
  for (Eigen::Index k = 0; k < theta_active.size(); ++k)
    if (std::abs(theta_active(k)) > prior.half_width) return kNegInf;
  return -static_cast<double>(theta_active.size()) * std::log(2.0 * prior.half_width);
}

double log_param_prior(const VectorXd& theta, const ModelIndex& model, const ParamPrior& prior) {
  return log_param_prior(restrict_to(model, theta), prior);
}

double log_model_prior(std::size_t size, const ModelPrior& prior) {
  if (size > prior.p) throw std::invalid_argument("model larger than the model space");
  if (size == 0 && !prior.include_null) throw DomainError("null model excluded by the model prior");
  const double p = static_cast<double>(prior.p);
  if (prior.kind == ModelPrior::Kind::uniform) {
    // log(2^p - 1) = p log 2 + log1p(-2^-p)
    const double log_count = p * std::log(2.0) + (prior.include_null ? 0.0 : std::log1p(-std::exp2(-p)));
    return -log_count;
  }
  const double sizes = prior.include_null ? p + 1.0 : p;
  return -std::log(sizes) - log_binomial(prior.p, size);
}

double log_model_prior(const ModelIndex& model, const ModelPrior& prior) {
  return log_model_prior(model.size(), prior);
}

QuasiPosterior::QuasiPosterior(std::shared_ptr<const MomentModel> moments, WeightedCriterion criterion,
                               ParamPrior param_prior, ModelPrior model_prior, ModelIndex selectable)
    : moments_(std::move(moments)),
      criterion_(std::move(criterion)),
      param_prior_(param_prior),
      model_prior_(model_prior),
      selectable_(std::move(selectable)) {
  if (!moments_) throw std::invalid_argument("missing moment model");
  const auto p = moments_->num_params();
  if (selectable_.dimension() != p) throw std::invalid_argument("selectable mask has wrong dimension");
  if (criterion_.dimension() != moments_->num_moments())
    throw std::invalid_argument("weighting matrix does not match the moment dimension");
  if (model_prior_.p != selectable_.size())
    throw std::invalid_argument("model prior dimension must equal the number of selectable coordinates");
  param_prior_.validate();
  model_prior_.validate();
  fixed_ = ModelIndex::full(p) - selectable_;
}

bool QuasiPosterior::admissible(const ModelIndex& model) const {
  if (model.dimension() != dimension() || !fixed_.is_subset_of(model)) return false;
  return model_prior_.include_null || !(model & selectable_).empty();
}

double QuasiPosterior::log_model_prior_of(const ModelIndex& model) const {
  if (!admissible(model)) return kNegInf;
  return log_model_prior((model & selectable_).size(), model_prior_);
}

double QuasiPosterior::log_quasi_likelihood(const VectorXd& theta) const {
  if (!moments_->in_domain(theta)) return kNegInf;
  return quasi_log_likelihood(sample_moment_mean(*moments_, theta), criterion_);
}

double QuasiPosterior::log_integrand(const VectorXd& theta, const ModelIndex& model) const {
  if (theta.size() != static_cast<Eigen::Index>(dimension()) || model.dimension() != dimension())
    throw std::invalid_argument("theta/model dimension mismatch");
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (theta(j) != 0.0 && !model.contains(static_cast<std::size_t>(j)))
      throw std::invalid_argument("inactive coordinate of theta is nonzero");
  const double prior = log_param_prior(theta, model, param_prior_);
  if (prior == kNegInf) return kNegInf;
  return log_quasi_likelihood(theta) + prior;
}

double QuasiPosterior::log_density(const VectorXd& theta, const ModelIndex& model) const {
  const double model_term = log_model_prior_of(model);
  if (model_term == kNegInf) return kNegInf;
  const double rest = log_integrand(theta, model);
  if (rest == kNegInf) return kNegInf;
  return rest + model_term;
}

double log_joint_quasi_posterior(const VectorXd& theta, const ModelIndex& model, const QuasiPosterior& posterior) {
  return posterior.log_density(theta, model);
}

}  // namespace bgmm
