#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bgmm/model_index.hpp"
#include "bgmm/models.hpp"
#include "bgmm/moment_core.hpp"
#include "bgmm/priors.hpp"
#include "bgmm/sampler.hpp"

namespace bgmm {

inline constexpr int kSummarySchemaVersion = 1;

struct PosteriorSummary {
  std::size_t num_draws = 0;
  /// Visited models, most probable first (ties: smaller, then lexicographic).
  std::vector<std::pair<ModelIndex, double>> model_probs;
  ModelIndex map_model;
  VectorXd inclusion_probs;
  VectorXd posterior_mean;  // model-averaged, zeros counted off-model
  VectorXd posterior_sd;

  double probability(const ModelIndex& model) const;
};

/// Empirical summaries over the retained draws. Throws std::invalid_argument on an empty chain.
PosteriorSummary summarize_chain(const Chain& chain);
PosteriorSummary summarize_draws(const std::vector<Draw>& draws);

nlohmann::json to_json(const PosteriorSummary& summary);

struct QuadratureOptions {
  double rel_tol = 1e-6;
  std::size_t max_nodes_per_axis = 8192;
  std::size_t max_total_nodes = std::size_t{1} << 24;
  std::size_t max_dimension = 3;
  /// Shift of the inner window centre, in units of the per-axis scale.
  double center_shift = 0.0;
};

struct QuadratureResult {
  double log_marginal = 0.0;
  std::size_t nodes_per_axis = 0;
  int levels = 0;
  VectorXd mode;  // active coordinates
  VectorXd scale;
};

/// log of the integral over theta_M of q(D|theta, M) pi(theta|M) on
/// [-B, B]^|M| (B = 6 sigma for the normal prior, the half-width for the
/// box prior), by tensor-product composite Gauss-Legendre refined until two
/// successive levels agree to rel_tol. Throws BudgetError for |M| above
/// max_dimension or when the node budget runs out.
QuadratureResult quadrature_log_marginal(const ModelIndex& model, const QuasiPosterior& posterior,
                                         const QuadratureOptions& options = {});

/// BF[m1 : m2] = marginal(m1) / marginal(m2), and its logarithm.
double log_bayes_factor_quadrature(const ModelIndex& m1, const ModelIndex& m2, const QuasiPosterior& posterior,
                                   const QuadratureOptions& options = {});
double bayes_factor_quadrature(const ModelIndex& m1, const ModelIndex& m2, const QuasiPosterior& posterior,
                               const QuadratureOptions& options = {});

/// Posterior model probabilities over `models` from quadrature marginals and the model prior.
std::vector<std::pair<ModelIndex, double>> quadrature_model_probabilities(const std::vector<ModelIndex>& models,
                                                                          const QuasiPosterior& posterior,
                                                                          const QuadratureOptions& options = {});

struct LaplaceTerms {
  double criterion = 0.0;        // -(n/2) Q(theta_hat)
  double volume = 0.0;           // (|M|/2) log(2 pi / n)
  double information = 0.0;      // -1/2 log det(G^T V^-1 G)
  double normalization = 0.0;    // -1/2 log det(2 pi V / n)
  double prior = 0.0;            // log pi(theta_hat | M)
  double total() const { return criterion + volume + information + normalization + prior; }
};

/// Laplace terms at a given restricted fit, with G the mean Jacobian at the fit.
LaplaceTerms laplace_terms(const GmmFit& fit, const QuasiPosterior& posterior);

/// Laplace approximation to the log marginal quasi-likelihood of M at the
/// exact restricted GMM estimator. Throws ConvergenceError if the fit fails.
double laplace_log_marginal(const ModelIndex& model, const QuasiPosterior& posterior,
                            const VectorXd& init = VectorXd(), const GmmOptions& options = {});

/// Average over draws, subjects and positions of [mu(x_ij' theta_k) - mu(x_ij' theta_0)]^2.
double posterior_pmse(const Chain& chain, const Dataset& data, const VectorXd& theta0, const LongitudinalSpec& spec);
double posterior_pmse(const std::vector<Draw>& draws, const Dataset& data, const VectorXd& theta0,
                      const LongitudinalSpec& spec);

/// Same average for a single point estimate.
double point_pmse(const VectorXd& theta, const Dataset& data, const VectorXd& theta0, const LongitudinalSpec& spec);

}  // namespace bgmm
