#include "bgmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "bgmm/errors.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

double PosteriorSummary::probability(const ModelIndex& model) const {
  for (const auto& [m, prob] : model_probs)
    if (m == model) return prob;
  return 0.0;
}

PosteriorSummary summarize_draws(const std::vector<Draw>& draws) {
  if (draws.empty()) throw std::invalid_argument("cannot summarize an empty chain");
  const auto p = draws.front().theta.size();
  const double n = static_cast<double>(draws.size());
  PosteriorSummary out;
  out.num_draws = draws.size();

  std::unordered_map<ModelIndex, std::size_t> counts;
  VectorXd included = VectorXd::Zero(p);
  VectorXd sum = VectorXd::Zero(p);
  for (const auto& d : draws) {
    if (d.theta.size() != p) throw std::invalid_argument("draws of different dimension");
    ++counts[d.model];
    for (std::size_t j : d.model.indices()) included(static_cast<Eigen::Index>(j)) += 1.0;
    sum += d.theta;
  }
  out.posterior_mean = sum / n;
  VectorXd sq = VectorXd::Zero(p);
  for (const auto& d : draws) sq += (d.theta - out.posterior_mean).cwiseAbs2();
  out.posterior_sd = (sq / n).cwiseSqrt();
  out.inclusion_probs = included / n;

  std::vector<std::pair<ModelIndex, std::size_t>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  out.model_probs.reserve(sorted.size());
  for (const auto& [m, c] : sorted) out.model_probs.emplace_back(m, static_cast<double>(c) / n);
  out.map_model = out.model_probs.front().first;
  return out;
}

PosteriorSummary summarize_chain(const Chain& chain) { return summarize_draws(chain.draws); }

nlohmann::json to_json(const PosteriorSummary& summary) {
  using nlohmann::json;
  json models = json::array();
  for (const auto& [m, prob] : summary.model_probs)
    models.push_back({{"model", m.to_hex()}, {"size", m.size()}, {"probability", prob}});
  auto vec = [](const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
  };
  return {{"schema_version", kSummarySchemaVersion},
          {"num_draws", summary.num_draws},
          {"map_model", summary.map_model.to_hex()},
          {"map_indices", summary.map_model.indices()},
          {"model_probs", models},
          {"inclusion_probs", vec(summary.inclusion_probs)},
          {"posterior_mean", vec(summary.posterior_mean)},
          {"posterior_sd", vec(summary.posterior_sd)}};
}

LaplaceTerms laplace_terms(const GmmFit& fit, const QuasiPosterior& posterior) {
  const auto& crit = posterior.criterion();
  const double n = static_cast<double>(crit.sample_size());
  const auto k = static_cast<double>(fit.model.size());
  LaplaceTerms t;
  t.criterion = -0.5 * n * fit.criterion_value;
  t.volume = 0.5 * k * std::log(2.0 * std::numbers::pi / n);
  if (fit.model.size() > 0) {
    const MatrixXd info = information_matrix(posterior.moments(), fit.theta_full, fit.model, crit);
    Eigen::LLT<MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) throw SingularMatrixError("information matrix not positive definite");
    const MatrixXd l = llt.matrixL();
    t.information = -l.diagonal().array().log().sum();
  }
  t.normalization = -0.5 * crit.log_det_scaled();
  t.prior = log_param_prior(fit.theta_hat, posterior.param_prior());
  return t;
}

double laplace_log_marginal(const ModelIndex& model, const QuasiPosterior& posterior, const VectorXd& init,
                            const GmmOptions& options) {
  const auto p = static_cast<Eigen::Index>(posterior.dimension());
  const VectorXd start = init.size() == p ? init : VectorXd::Zero(p);
  const GmmFit fit = gmm_estimate(posterior.moments(), model, posterior.criterion(), start, options);
  if (!fit.converged) throw ConvergenceError("restricted GMM fit did not converge", fit.theta_full);
  return laplace_terms(fit, posterior).total();
}

double point_pmse(const VectorXd& theta, const Dataset& data, const VectorXd& theta0, const LongitudinalSpec& spec) {
  if (theta.size() != theta0.size() || theta.size() != data.X.cols())
    throw std::invalid_argument("pMSE: dimension mismatch");
  const VectorXd eta = data.X * theta;
  const VectorXd eta0 = data.X * theta0;
  double total = 0.0;
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    const double d = spec.mu(eta(k)) - spec.mu(eta0(k));
    total += d * d;
  }
  return total / static_cast<double>(eta.size());
}

double posterior_pmse(const std::vector<Draw>& draws, const Dataset& data, const VectorXd& theta0,
                      const LongitudinalSpec& spec) {
  if (draws.empty()) throw std::invalid_argument("pMSE of an empty chain");
  double total = 0.0;
  for (const auto& d : draws) total += point_pmse(d.theta, data, theta0, spec);
  return total / static_cast<double>(draws.size());
}

double posterior_pmse(const Chain& chain, const Dataset& data, const VectorXd& theta0, const LongitudinalSpec& spec) {
  return posterior_pmse(chain.draws, data, theta0, spec);
}

}  // namespace bgmm
