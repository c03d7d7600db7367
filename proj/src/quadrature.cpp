#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "bgmm/errors.hpp"
#include "bgmm/inference.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kInnerPanels = 6;
constexpr double kInnerHalfWidth = 10.0;

struct AxisRule {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};

std::vector<double> initial_breaks(double center, double scale, double bound) {
  const double c = std::clamp(center, -bound, bound);
  const double lo = std::max(-bound, c - kInnerHalfWidth * scale);
  const double hi = std::min(bound, c + kInnerHalfWidth * scale);
  std::vector<double> breaks;
  if (lo > -bound) {
    breaks.push_back(-bound);
    const double mid = c - std::sqrt((c - lo) * (c + bound));
    if (mid > -bound && mid < lo) breaks.push_back(mid);
  }
  for (int k = 0; k <= kInnerPanels; ++k) breaks.push_back(lo + (hi - lo) * k / kInnerPanels);
  if (hi < bound) {
    const double mid = c + std::sqrt((hi - c) * (bound - c));
    if (mid > hi && mid < bound) breaks.push_back(mid);
    breaks.push_back(bound);
  }
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  return breaks;
}

std::vector<double> bisect(const std::vector<double>& breaks) {
  std::vector<double> out;
  out.reserve(2 * breaks.size());
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    out.push_back(breaks[k]);
    out.push_back(0.5 * (breaks[k] + breaks[k + 1]));
  }
  out.push_back(breaks.back());
  return out;
}

AxisRule gauss_legendre(const std::vector<double>& breaks) {
  using Rule = boost::math::quadrature::gauss<double, 8>;
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();
  AxisRule rule;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double half = 0.5 * (breaks[k + 1] - breaks[k]);
    const double mid = 0.5 * (breaks[k + 1] + breaks[k]);
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
      for (double sign : {-1.0, 1.0}) {
        if (abscissa[i] == 0.0 && sign > 0.0) continue;
        rule.nodes.push_back(mid + sign * half * abscissa[i]);
        rule.log_weights.push_back(std::log(half * weights[i]));
      }
    }
  }
  return rule;
}

double integration_bound(const ParamPrior& prior) {
  return prior.kind == ParamPrior::Kind::normal ? 6.0 * prior.sigma : prior.half_width;
}

class ActiveIntegrand {
 public:
  ActiveIntegrand(const ModelIndex& model, const QuasiPosterior& posterior)
      : model_(model), posterior_(posterior), idx_(model.indices()),
        full_(VectorXd::Zero(static_cast<Eigen::Index>(posterior.dimension()))) {}

  double operator()(const VectorXd& x) {
    for (std::size_t k = 0; k < idx_.size(); ++k)
      full_(static_cast<Eigen::Index>(idx_[k])) = x(static_cast<Eigen::Index>(k));
    try {
      const double v = posterior_.log_integrand(full_, model_);
      return std::isnan(v) ? kNegInf : v;
    } catch (const DomainError&) {
      return kNegInf;
    } catch (const EvaluationError&) {
      return kNegInf;
    }
  }

 private:
  const ModelIndex& model_;
  const QuasiPosterior& posterior_;
  std::vector<std::size_t> idx_;
  VectorXd full_;
};

void locate_mode(ActiveIntegrand& f, const ModelIndex& model, const QuasiPosterior& posterior, double bound,
                 VectorXd& mode, VectorXd& scale) {
  const auto d = static_cast<Eigen::Index>(model.size());
  VectorXd best = VectorXd::Zero(d);
  double best_value = f(best);

  if (posterior.moments().differentiable()) {
    try {
      const GmmFit fit = gmm_estimate(posterior.moments(), model, posterior.criterion(),
                                      VectorXd::Zero(static_cast<Eigen::Index>(posterior.dimension())));
      const double v = f(fit.theta_hat);
      if (v > best_value) {
        best = fit.theta_hat;
        best_value = v;
      }
    } catch (const Error&) {
    }
  }
  const int per_axis = d == 1 ? 41 : (d == 2 ? 21 : 11);
  std::vector<int> counter(static_cast<std::size_t>(d), 0);
  VectorXd x(d);
  while (true) {
    for (Eigen::Index k = 0; k < d; ++k)
      x(k) = -bound + 2.0 * bound * counter[static_cast<std::size_t>(k)] / (per_axis - 1);
    const double v = f(x);
    if (v > best_value) {
      best = x;
      best_value = v;
    }
    Eigen::Index k = 0;
    for (; k < d; ++k) {
      if (++counter[static_cast<std::size_t>(k)] < per_axis) break;
      counter[static_cast<std::size_t>(k)] = 0;
    }
    if (k == d) break;
  }
  if (best_value == kNegInf) throw DomainError("integrand is zero on the search grid");

  auto neg = [&](const VectorXd& z) {
    const double v = f(z);
    return v == kNegInf ? std::numeric_limits<double>::infinity() : -v;
  };
  const VectorXd step = VectorXd::Constant(d, 0.05 * (1.0 + best.cwiseAbs().maxCoeff()));
  NelderMeadOptions nm;
  nm.tol_x = 1e-10;
  nm.tol_f = 1e-13;
  nm.restarts = 3;
  const auto res = nelder_mead(neg, best, step, nm);
  mode = res.value < -best_value ? res.x : best;
  const double f0 = f(mode);

  VectorXd sd0(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double h = 1e-4 * (1.0 + std::abs(mode(j)));
    double s = bound / 10.0;
    for (int pass = 0; pass < 2; ++pass) {
      VectorXd up = mode, dn = mode;
      up(j) += h;
      dn(j) -= h;
      const double h2 = (f(up) - 2.0 * f0 + f(dn)) / (h * h);
      if (!(h2 < 0.0) || !std::isfinite(h2)) break;
      s = 1.0 / std::sqrt(-h2);
      h = 0.2 * s;
    }
    sd0(j) = std::clamp(s, 1e-9 * bound, bound / 4.0);
  }
  scale = sd0;

  MatrixXd hess(d, d);
  bool finite = true;
  for (Eigen::Index j = 0; j < d && finite; ++j) {
    for (Eigen::Index k = j; k < d && finite; ++k) {
      const double hj = 0.2 * sd0(j), hk = 0.2 * sd0(k);
      auto at = [&](double sj, double sk) {
        VectorXd z = mode;
        z(j) += sj * hj;
        z(k) += sk * hk;
        return f(z);
      };
      double v;
      if (j == k) {
        v = (at(0.5, 0.5) - 2.0 * f0 + at(-0.5, -0.5)) / (hj * hj);
      } else {
        v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hj * hk);
      }
      finite = std::isfinite(v);
      hess(j, k) = hess(k, j) = v;
    }
  }
  if (finite) {
    Eigen::LLT<MatrixXd> llt(-hess);
    if (llt.info() == Eigen::Success) {
      const MatrixXd cov = llt.solve(MatrixXd::Identity(d, d));
      for (Eigen::Index j = 0; j < d; ++j)
        if (cov(j, j) > 0.0) scale(j) = std::clamp(std::sqrt(cov(j, j)), 1e-9 * bound, bound / 4.0);
    }
  }
}

double tensor_log_sum(ActiveIntegrand& f, const std::vector<AxisRule>& rules) {
  const std::size_t d = rules.size();
  std::vector<std::size_t> counter(d, 0);
  VectorXd x(static_cast<Eigen::Index>(d));
  std::vector<double> terms;
  std::size_t total = 1;
  for (const auto& r : rules) total *= r.nodes.size();
  terms.reserve(total);
  double peak = kNegInf;
  while (true) {
    double lw = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      x(static_cast<Eigen::Index>(k)) = rules[k].nodes[counter[k]];
      lw += rules[k].log_weights[counter[k]];
    }
    const double t = f(x) + lw;
    terms.push_back(t);
    peak = std::max(peak, t);
    std::size_t k = 0;
    for (; k < d; ++k) {
      if (++counter[k] < rules[k].nodes.size()) break;
      counter[k] = 0;
    }
    if (k == d) break;
  }
  if (peak == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return peak + std::log(sum);
}

}  // namespace

QuadratureResult quadrature_log_marginal(const ModelIndex& model, const QuasiPosterior& posterior,
                                         const QuadratureOptions& options) {
  const std::size_t d = model.size();
  if (model.dimension() != posterior.dimension()) throw std::invalid_argument("model dimension mismatch");
  if (d > options.max_dimension)
    throw BudgetError("quadrature limited to |M| <= " + std::to_string(options.max_dimension) + ", got |M| = " +
                          std::to_string(d),
                      d);
  ActiveIntegrand f(model, posterior);
  QuadratureResult result;
  if (d == 0) {
    result.log_marginal = f(VectorXd());
    return result;
  }
  const double bound = integration_bound(posterior.param_prior());
  locate_mode(f, model, posterior, bound, result.mode, result.scale);

  std::vector<std::vector<double>> breaks(d);
  for (std::size_t k = 0; k < d; ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    breaks[k] = initial_breaks(result.mode(j) + options.center_shift * result.scale(j), result.scale(j), bound);
  }

  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int level = 0;; ++level) {
    std::vector<AxisRule> rules;
    std::size_t per_axis = 0;
    std::size_t total = 1;
    for (const auto& b : breaks) {
      rules.push_back(gauss_legendre(b));
      per_axis = std::max(per_axis, rules.back().nodes.size());
      total *= rules.back().nodes.size();
    }
    if (per_axis > options.max_nodes_per_axis || total > options.max_total_nodes)
      throw BudgetError("quadrature budget exhausted before reaching tolerance for |M| = " + std::to_string(d), d);
    const double current = tensor_log_sum(f, rules);
    result.nodes_per_axis = per_axis;
    result.levels = level + 1;
    result.log_marginal = current;
    if (current == kNegInf) throw DomainError("quadrature marginal is zero");
    if (level > 0 && std::abs(std::expm1(current - previous)) <= options.rel_tol) return result;
    previous = current;
    for (auto& b : breaks) b = bisect(b);
  }
}

double log_bayes_factor_quadrature(const ModelIndex& m1, const ModelIndex& m2, const QuasiPosterior& posterior,
                                   const QuadratureOptions& options) {
  if (m1 == m2) return 0.0;
  return quadrature_log_marginal(m1, posterior, options).log_marginal -
         quadrature_log_marginal(m2, posterior, options).log_marginal;
}

double bayes_factor_quadrature(const ModelIndex& m1, const ModelIndex& m2, const QuasiPosterior& posterior,
                               const QuadratureOptions& options) {
  return std::exp(log_bayes_factor_quadrature(m1, m2, posterior, options));
}

std::vector<std::pair<ModelIndex, double>> quadrature_model_probabilities(const std::vector<ModelIndex>& models,
                                                                          const QuasiPosterior& posterior,
                                                                          const QuadratureOptions& options) {
  std::vector<double> logs;
  logs.reserve(models.size());
  double peak = kNegInf;
  for (const auto& m : models) {
    const double prior = posterior.log_model_prior_of(m);
    const double v = prior == kNegInf ? kNegInf : quadrature_log_marginal(m, posterior, options).log_marginal + prior;
    logs.push_back(v);
    peak = std::max(peak, v);
  }
  if (peak == kNegInf) throw DomainError("all models have zero quadrature mass");
  double sum = 0.0;
  for (double v : logs) sum += std::exp(v - peak);
  std::vector<std::pair<ModelIndex, double>> out;
  for (std::size_t k = 0; k < models.size(); ++k) out.emplace_back(models[k], std::exp(logs[k] - peak) / sum);
  return out;
}

}  // namespace bgmm
