#include "bgmm/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "bgmm/errors.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::size_t pick(const std::vector<std::size_t>& items, Rng& rng) { return items[rng.index(items.size())]; }

}  // namespace

void SamplerConfig::validate() const {
  if (!(n_iter > burn_in)) throw ConfigError("n_iter must exceed burn_in");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (thin > n_iter - burn_in) throw ConfigError("thin exceeds the post-burn-in chain length");
  if (!(sigma_add > 0.0) || !std::isfinite(sigma_add)) throw ConfigError("sigma_add must be positive");
  if (!(c_within > 0.0) || !std::isfinite(c_within)) throw ConfigError("c_within must be positive");
  if (init_theta && init_model &&
      static_cast<std::size_t>(init_theta->size()) != init_model->dimension())
    throw ConfigError("init_theta and init_model dimensions differ");
}

void PosteriorContext::validate() const {
  if (!target) throw std::invalid_argument("posterior context has no target");
  const auto p = static_cast<Eigen::Index>(target->dimension());
  if (xi.rows() != p || xi.cols() != p) throw std::invalid_argument("Xi must be p x p");
}

double ChainDiagnostics::between_acceptance() const {
  return ratio(add_accepts + remove_accepts, add_attempts + remove_attempts + boundary_noops);
}

double ChainDiagnostics::within_acceptance() const { return ratio(within_accepts, within_attempts); }

ProposalCache::ProposalCache(const MatrixXd& xi, double c) : xi_(xi), c_(c) {}

const MatrixXd& ProposalCache::factor(const ModelIndex& model, bool* fallback) {
  auto it = cache_.find(model);
  if (it == cache_.end()) {
    const auto idx = model.indices();
    const auto k = static_cast<Eigen::Index>(idx.size());
    MatrixXd sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        sub(a, b) = c_ * xi_(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b]));
    Entry entry;
    Eigen::LLT<MatrixXd> llt(sub);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
      entry.lower = llt.matrixL();
    } else {
      VectorXd d = sub.diagonal().cwiseAbs();
      const double floor = std::max(1e-12, d.size() > 0 ? kRidgeEps * d.mean() : 0.0);
      entry.lower = d.cwiseMax(floor).cwiseSqrt().asDiagonal();
      entry.fallback = true;
    }
    it = cache_.emplace(model, std::move(entry)).first;
  }
  if (fallback) *fallback = it->second.fallback;
  return it->second.lower;
}

bool metropolis_accept(double log_post_new, double log_post_old, double log_proposal_ratio, double u) {
  if (std::isnan(log_post_new) || log_post_new == kNegInf) return false;
  if (log_post_old == kNegInf) return true;
  const double log_alpha = log_post_new - log_post_old + log_proposal_ratio;
  if (std::isnan(log_alpha)) return false;
  return log_alpha >= 0.0 || std::log(u) < log_alpha;
}

ChainState between_model_step(const ChainState& state, const JointDensity& target, const SamplerConfig& config,
                              Rng& rng, ChainDiagnostics* diagnostics) {
  const ModelIndex& selectable = target.selectable();
  const ModelIndex active = state.model & selectable;
  const bool add = rng.uniform() <= 0.5;

  if (add) {
    const auto candidates = (selectable - active).indices();
    if (candidates.empty()) {
      if (diagnostics) ++diagnostics->boundary_noops;
      return state;
    }
    if (diagnostics) ++diagnostics->add_attempts;
    const std::size_t j = pick(candidates, rng);
    const double v = config.sigma_add * rng.normal();
    ChainState next = state;
    next.model.insert(j);
    next.theta(static_cast<Eigen::Index>(j)) = v;
    next.log_post = target.log_density(next.theta, next.model);
    double log_q = -log_normal_pdf(v, 0.0, config.sigma_add);
    if (config.index_correction)
      log_q += std::log(static_cast<double>(candidates.size())) - std::log(static_cast<double>(active.size() + 1));
    if (metropolis_accept(next.log_post, state.log_post, log_q, rng.uniform())) {
      if (diagnostics) ++diagnostics->add_accepts;
      return next;
    }
    return state;
  }

  const auto candidates = active.indices();
  if (candidates.empty()) {
    if (diagnostics) ++diagnostics->boundary_noops;
    return state;
  }
  const std::size_t j = pick(candidates, rng);
  ChainState next = state;
  const double v = next.theta(static_cast<Eigen::Index>(j));
  next.model.erase(j);
  next.theta(static_cast<Eigen::Index>(j)) = 0.0;
  if (!target.admissible(next.model)) {
    if (diagnostics) ++diagnostics->boundary_noops;
    return state;
  }
  if (diagnostics) ++diagnostics->remove_attempts;
  next.log_post = target.log_density(next.theta, next.model);
  double log_q = log_normal_pdf(v, 0.0, config.sigma_add);
  if (config.index_correction)
    log_q += std::log(static_cast<double>(candidates.size())) -
             std::log(static_cast<double>(selectable.size() - active.size() + 1));
  if (metropolis_accept(next.log_post, state.log_post, log_q, rng.uniform())) {
    if (diagnostics) ++diagnostics->remove_accepts;
    return next;
  }
  return state;
}

ChainState within_model_step(const ChainState& state, ProposalCache& proposals, const JointDensity& target,
                             Rng& rng, ChainDiagnostics* diagnostics) {
  if (state.model.empty()) return state;
  bool fallback = false;
  const MatrixXd& lower = proposals.factor(state.model, &fallback);
  if (fallback && diagnostics) ++diagnostics->cholesky_fallbacks;
  const auto idx = state.model.indices();
  VectorXd z(static_cast<Eigen::Index>(idx.size()));
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  const VectorXd step = lower * z;
  ChainState next = state;
  for (std::size_t k = 0; k < idx.size(); ++k)
    next.theta(static_cast<Eigen::Index>(idx[k])) += step(static_cast<Eigen::Index>(k));
  if (diagnostics) ++diagnostics->within_attempts;
  next.log_post = target.log_density(next.theta, next.model);
  if (metropolis_accept(next.log_post, state.log_post, 0.0, rng.uniform())) {
    if (diagnostics) ++diagnostics->within_accepts;
    return next;
  }
  return state;
}

ChainState within_model_step(const ChainState& state, const MatrixXd& xi, const JointDensity& target,
                             double c_within, Rng& rng, ChainDiagnostics* diagnostics) {
  ProposalCache proposals(xi, c_within);
  return within_model_step(state, proposals, target, rng, diagnostics);
}

ChainState initial_state(const SamplerConfig& config, const JointDensity& target) {
  const std::size_t p = target.dimension();
  ChainState state;
  state.model = config.init_model ? *config.init_model : ModelIndex::full(p) - target.selectable();
  if (state.model.dimension() != p) throw ConfigError("initial model has wrong dimension");
  state.theta = config.init_theta ? *config.init_theta : VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (static_cast<std::size_t>(state.theta.size()) != p) throw ConfigError("initial theta has wrong dimension");
  for (std::size_t j = 0; j < p; ++j)
    if (!state.model.contains(j)) state.theta(static_cast<Eigen::Index>(j)) = 0.0;
  state.log_post = target.log_density(state.theta, state.model);
  return state;
}

Chain run_chain(const SamplerConfig& config, const PosteriorContext& ctx) {
  config.validate();
  ctx.validate();
  const JointDensity& target = *ctx.target;
  Chain chain;
  auto& diag = chain.diagnostics;
  Rng rng(config.seed);
  ProposalCache proposals(ctx.xi, config.c_within);
  ChainState state = initial_state(config, target);
  chain.draws.reserve((config.n_iter - config.burn_in) / config.thin);

  auto check = [&](const ChainState& s) {
    if (!config.check_coherence || s.log_post == kNegInf) return;
    const double fresh = target.log_density(s.theta, s.model);
    diag.max_coherence_error = std::max(diag.max_coherence_error, std::abs(fresh - s.log_post));
  };

  try {
    for (std::size_t i = 1; i <= config.n_iter; ++i) {
      state = between_model_step(state, target, config, rng, &diag);
      check(state);
      state = within_model_step(state, proposals, target, rng, &diag);
      check(state);
      diag.iterations = i;
      if (i > config.burn_in && (i - config.burn_in) % config.thin == 0)
        chain.draws.push_back({i, state.model, state.theta, state.log_post});
    }
  } catch (const std::exception& e) {
    diag.error = e.what();
  }
  chain.final_state = state;
  return chain;
}

double pilot_tune_sigma_add(const SamplerConfig& config, const PosteriorContext& ctx,
                            const std::vector<double>& candidates, std::size_t pilot_iterations) {
  if (candidates.empty()) throw std::invalid_argument("empty sigma_add grid");
  std::vector<double> grid = candidates;
  std::sort(grid.begin(), grid.end());
  double best = grid.front();
  double best_rate = -1.0;
  for (double sd : grid) {
    SamplerConfig pilot = config;
    pilot.sigma_add = sd;
    pilot.n_iter = std::max<std::size_t>(pilot_iterations, 1);
    pilot.burn_in = 0;
    pilot.thin = pilot.n_iter;
    pilot.check_coherence = false;
    const double rate = run_chain(pilot, ctx).diagnostics.between_acceptance();
    if (rate > best_rate) {
      best_rate = rate;
      best = sd;
    }
  }
  return best;
}

void write_chain_csv(std::ostream& out, const Chain& chain) {
  out << "iteration,model,log_posterior,values\n";
  char buf[64];
  auto put = [&](double x) {
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    out.write(buf, res.ptr - buf);
  };
  for (const auto& d : chain.draws) {
    out << d.iteration << ',' << d.model.to_hex() << ',';
    put(d.log_post);
    out << ',';
    bool first = true;
    for (std::size_t j : d.model.indices()) {
      if (!first) out << ';';
      first = false;
      put(d.theta(static_cast<Eigen::Index>(j)));
    }
    out << '\n';
  }
}

}  // namespace bgmm
