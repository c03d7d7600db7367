// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "bgmm/generators.hpp"
#include "bgmm/inference.hpp"
#include "bgmm/priors.hpp"
#include "bgmm/sampler.hpp"
#include "bgmm/study.hpp"

using namespace bgmm;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Line {
  std::string id;
  bool pass;
  std::string detail;
};

std::vector<Line> g_lines;

void report(const std::string& id, bool pass, const std::string& detail) {
  g_lines.push_back({id, pass, detail});
  std::cout << (pass ? "PASS " : "FAIL ") << id << ": " << detail << std::endl;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

StudyConfig from_file(const std::string& leaf, std::size_t replications) {
  StudyConfig c = load_study_config(std::string(BGMM_SOURCE_DIR) + "/configs/" + leaf, false);
  c.replications = replications;
  c.validate();
  return c;
}

Problem simulate_problem(const StudyConfig& config) {
  Rng rng(derive_seed(derive_seed(config.seed, 0), 0));
  auto data = std::make_shared<const Dataset>(simulate_dataset(config, rng));
  return prepare_problem(data, config);
}

StudyConfig linear_config(std::size_t n, std::vector<double> theta0, std::uint64_t seed) {
  json j = {{"family", "longitudinal-gaussian"},
            {"n", n},
            {"s", 1},
            {"p", theta0.size()},
            {"theta0", theta0},
            {"working_correlation", "independence"},
            {"seed", seed},
            {"sampler", {{"n_iter", 100000}, {"burn_in", 5000}, {"thin", 1}, {"sigma_add", 0.2}}}};
  return parse_study_config(j);
}

// 1. Chain frequencies against quadrature on a p = 3 linear model.
void criterion_quadrature() {
  const auto t0 = Clock::now();
  const StudyConfig config = linear_config(200, {0.5, 0.25, 0.1}, 1);
  const Problem pr = simulate_problem(config);
  const QuasiPosterior& post = *pr.posterior;
  const auto models = enumerate_models(post.selectable(), post.fixed(), post.model_prior().include_null);
  const auto quad = quadrature_model_probabilities(models, post);
  const SamplerConfig sc = sampler_for(pr, config, derive_seed(derive_seed(config.seed, 0), 1));
  const Chain chain = run_chain(sc, {pr.posterior, pr.xi});
  const PosteriorSummary summary = summarize_chain(chain);
  const double elapsed = seconds_since(t0);

  double gap = 0.0, lo = 1.0, hi = 0.0;
  VectorXd incl_quad = VectorXd::Zero(3);
  for (const auto& [m, q] : quad) {
    gap = std::max(gap, std::abs(summary.probability(m) - q));
    lo = std::min(lo, q);
    hi = std::max(hi, q);
    for (std::size_t j : m.indices()) incl_quad(static_cast<Eigen::Index>(j)) += q;
  }
  const double incl_gap = (summary.inclusion_probs - incl_quad).cwiseAbs().maxCoeff();
  report("1 quadrature agreement", chain.diagnostics.error.empty() && gap <= 0.03 && incl_gap <= 0.03,
         fmt("%zu models, quadrature probabilities in [%.4f, %.4f], max model gap %.4f, max inclusion gap %.4f "
             "(limit 0.03)",
             models.size(), lo, hi, gap, incl_gap));
  report("1 runtime", elapsed <= 120.0, fmt("%.1f s single-threaded (limit 120 s)", elapsed));
}

struct Studies {
  StudyReport bgmm2, bgmm1;
  double seconds = 0.0;
};

const Studies& reduced_studies() {
  static std::optional<Studies> cache;
  if (!cache) {
    Studies s;
    const auto t0 = Clock::now();
    s.bgmm2 = run_study(from_file("p50_bgmm2.json", 20), worker_count());
    s.bgmm1 = run_study(from_file("p50_bgmm1.json", 20), worker_count());
    s.seconds = seconds_since(t0);
    cache = std::move(s);
  }
  return *cache;
}

std::string summary_line(const StudyReport& r) {
  return fmt("EX %.2f UN %.2f OV %.2f TP %.2f FP %.2f, failures %zu", r.aggregate("ex").mean, r.aggregate("un").mean,
             r.aggregate("ov").mean, r.aggregate("tp").mean, r.aggregate("fp").mean, r.failures);
}

// 2. Reduced selection study plus the smoke tier.
void criterion_selection() {
  const Studies& s = reduced_studies();
  const auto& b2 = s.bgmm2;
  const auto& b1 = s.bgmm1;
  report("2 BGMM2 selection",
         b2.failures == 0 && b2.aggregate("ex").mean >= 0.85 && b2.aggregate("un").mean == 0.0 &&
             b2.aggregate("fp").mean <= 0.15,
         summary_line(b2) + " (need EX >= 0.85, UN = 0, FP <= 0.15)");
  report("2 BGMM1 selection", b1.failures == 0 && b1.aggregate("ex").mean >= 0.70,
         summary_line(b1) + " (need EX >= 0.70)");
  report("2 runtime", s.seconds <= 7200.0,
         fmt("%.0f s for both studies on %zu thread(s) (limit 7200 s)", s.seconds, worker_count()));

  const auto t0 = Clock::now();
  const StudyReport smoke = run_study(from_file("p12_smoke_bgmm2.json", 10), worker_count());
  const double elapsed = seconds_since(t0);
  report("2 smoke tier", smoke.failures == 0 && smoke.aggregate("ex").mean >= 0.8 && elapsed <= 600.0,
         summary_line(smoke) + fmt(", %.0f s (need EX >= 0.8 within 600 s)", elapsed));
}

// 3. MAP posterior probability level.
void criterion_map_probability() {
  const auto& a = reduced_studies().bgmm2.aggregate("map_prob");
  report("3 MAP probability", a.mean >= 0.70 && a.mean <= 0.95,
         fmt("mean BGMM2 MAP probability %.4f (se %.4f), need [0.70, 0.95]", a.mean, a.se));
}

// 4. Posterior normality on the true model.
void criterion_normality() {
  json j = {{"family", "longitudinal-binary"},
            {"n", 2000},
            {"s", 10},
            {"p", 12},
            {"theta0_leading", {1.5, -1.5, 1.0, -1.0, 0.5, -0.5}},
            {"rho", 0.3},
            {"seed", 4242},
            {"sampler", {{"n_iter", 200000}, {"burn_in", 20000}, {"thin", 2}, {"sigma_add", 0.2}}}};
  const StudyConfig config = parse_study_config(j);
  const Problem pr = simulate_problem(config);
  ModelIndex truth(config.p);
  for (std::size_t j = 0; j < config.p; ++j)
    if (config.theta0(static_cast<Eigen::Index>(j)) != 0.0) truth.insert(j);
  SamplerConfig sc = sampler_for(pr, config, derive_seed(derive_seed(config.seed, 0), 1));
  const Chain chain = run_chain(sc, {pr.posterior, pr.xi});

  const auto idx = truth.indices();
  const auto k = static_cast<Eigen::Index>(idx.size());
  std::vector<VectorXd> kept;
  for (const auto& d : chain.draws)
    if (d.model == truth) kept.push_back(restrict_to(truth, d.theta));
  if (kept.size() < 100) {
    report("4 posterior normality", false, fmt("only %zu draws on the true model", kept.size()));
    return;
  }
  VectorXd mean = VectorXd::Zero(k);
  for (const auto& v : kept) mean += v;
  mean /= static_cast<double>(kept.size());
  MatrixXd cov = MatrixXd::Zero(k, k);
  for (const auto& v : kept) cov += (v - mean) * (v - mean).transpose();
  cov /= static_cast<double>(kept.size() - 1);

  const GmmFit fit = gmm_estimate(*pr.moments, truth, pr.posterior->criterion(), pr.theta_tilde);
  const double n = static_cast<double>(config.n);
  const MatrixXd target =
      information_matrix(*pr.moments, fit.theta_full, truth, pr.posterior->criterion()).inverse() / n;

  double worst_z = 0.0;
  for (Eigen::Index a = 0; a < k; ++a)
    worst_z = std::max(worst_z, std::abs(mean(a) - fit.theta_hat(a)) / std::sqrt(cov(a, a)));
  const double frob = (cov - target).norm() / target.norm();
  report("4 posterior mean", worst_z <= 3.0,
         fmt("%zu true-model draws (%.3f of retained), max |mean - GMM| / sd = %.3f (limit 3)", kept.size(),
             static_cast<double>(kept.size()) / static_cast<double>(chain.draws.size()), worst_z));
  report("4 posterior covariance", frob <= 0.25,
         fmt("relative Frobenius error %.4f (limit 0.25), within acceptance %.3f", frob,
             chain.diagnostics.within_acceptance()));
}

// 5. Bayes-factor rates.
void criterion_bayes_factor() {
  const std::vector<double> theta0 = {1.0, -0.5, 0.0, 0.0, 0.0};
  const ModelIndex truth = ModelIndex::from_indices(5, {0, 1});
  const std::vector<std::size_t> sizes = {500, 2000, 8000};
  const std::size_t reps = 30;
  std::vector<double> log_n, mean_bf;
  for (std::size_t n : sizes) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Problem pr = simulate_problem(linear_config(n, theta0, 1000 + r));
      const double base = laplace_log_marginal(truth, *pr.posterior, pr.theta_tilde);
      for (std::size_t extra = 2; extra < 5; ++extra) {
        ModelIndex super = truth;
        super.insert(extra);
        sum += laplace_log_marginal(super, *pr.posterior, pr.theta_tilde) - base;
        ++count;
      }
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    mean_bf.push_back(sum / static_cast<double>(count));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    mx += log_n[k] / 3.0;
    my += mean_bf[k] / 3.0;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    sxy += (log_n[k] - mx) * (mean_bf[k] - my);
    sxx += (log_n[k] - mx) * (log_n[k] - mx);
  }
  const double slope = sxy / sxx;
  report("5 supermodel log-BF slope", slope >= -0.75 && slope <= -0.25,
         fmt("mean log-BF %.3f, %.3f, %.3f at n = 500, 2000, 8000; slope %.3f (need [-0.75, -0.25])", mean_bf[0],
             mean_bf[1], mean_bf[2], slope));

  const Problem pr = simulate_problem(linear_config(2000, {1.0, 0.5}, 77));
  const ModelIndex full = ModelIndex::full(2);
  const ModelIndex missing = ModelIndex::from_indices(2, {1});
  const double laplace = laplace_log_marginal(missing, *pr.posterior, pr.theta_tilde) -
                         laplace_log_marginal(full, *pr.posterior, pr.theta_tilde);
  const double quad = log_bayes_factor_quadrature(missing, full, *pr.posterior);
  report("5 missing-coordinate log-BF", laplace <= -20.0 && quad <= -20.0,
         fmt("n = 2000: Laplace %.1f, quadrature %.1f (limit -20)", laplace, quad));
}

// 6. Oracle, naive and BGMM2 estimation error.
void criterion_oracle() {
  const auto& r = reduced_studies().bgmm2;
  const double naive = r.aggregate("naive_mse").mean;
  const double oracle = r.aggregate("oracle_mse").mean;
  const double bgmm = r.aggregate("mse").mean;
  report("6 oracle vs naive", oracle < naive && oracle / naive <= 0.5,
         fmt("MSE x 1e3: naive %.3f, oracle %.3f, ratio %.3f (limit 0.5)", naive * 1e3, oracle * 1e3, oracle / naive));
  report("6 BGMM2 vs oracle", bgmm <= 2.0 * oracle,
         fmt("MSE x 1e3: BGMM2 %.3f, oracle %.3f, ratio %.3f (limit 2)", bgmm * 1e3, oracle * 1e3, bgmm / oracle));
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// 7. Generator fidelity.
void criterion_generators() {
  Rng rng(derive_seed(7, 0));
  const VectorXd theta0 = (VectorXd(2) << 0.6, -0.4).finished();
  const std::size_t n = 2300, s = 10;
  BinaryGenerationStats stats;
  const Dataset d =
      generate_correlated_binary(n, s, uniform_covariates(), theta0, 0.3, rng, FeasibilityPolicy::strict, &stats);

  double worst_mean_z = 0.0, pair_sum = 0.0;
  std::size_t pairs = 0;
  VectorXd ones = VectorXd::Zero(static_cast<Eigen::Index>(s)), expect = ones, var = ones;
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd mu = (d.subject_x(i) * theta0).unaryExpr([](double t) { return logistic(t); });
    const VectorXd y = d.subject_y(i);
    ones += y;
    expect += mu;
    var += mu.cwiseProduct(VectorXd::Ones(mu.size()) - mu);
    for (Eigen::Index a = 0; a < mu.size(); ++a)
      for (Eigen::Index b = a + 1; b < mu.size(); ++b) {
        pair_sum += (y(a) - mu(a)) * (y(b) - mu(b)) / std::sqrt(mu(a) * (1 - mu(a)) * mu(b) * (1 - mu(b)));
        ++pairs;
      }
  }
  for (Eigen::Index j = 0; j < ones.size(); ++j)
    worst_mean_z = std::max(worst_mean_z, std::abs(ones(j) - expect(j)) / std::sqrt(var(j)));
  const double corr = pair_sum / static_cast<double>(pairs);
  report("7 binary marginal means", worst_mean_z <= 4.0,
         fmt("max |count - expected| over %zu positions = %.2f binomial sd (limit 4)", s, worst_mean_z));
  report("7 binary pairwise correlation", pairs >= 100000 && stats.clamped_pairs == 0 && std::abs(corr - 0.3) <= 0.02,
         fmt("%.4f over %zu pairs, %zu clamped (need 0.30 +- 0.02)", corr, pairs, stats.clamped_pairs));

  double worst = 0.0;
  const std::size_t nq = 20000;
  const VectorXd beta = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
  for (double tau : {0.1, 0.25, 0.5, 0.75, 0.9})
    for (auto kind : {NoiseSpec::Kind::normal, NoiseSpec::Kind::laplace}) {
      NoiseSpec noise;
      noise.kind = kind;
      const Dataset q = generate_quantile_data(nq, 3, tau, beta, noise, rng);
      const double below = ((q.Y - q.X * beta).array() <= 0.0).cast<double>().mean();
      worst = std::max(worst, std::abs(below - tau) / std::sqrt(tau * (1 - tau) / static_cast<double>(nq)));
    }
  report("7 quantile coverage", worst <= 4.0,
         fmt("max |coverage - tau| = %.2f sd over 10 settings, n = %zu (limit 4)", worst, nq));
}

// 8. Invariant suites.
void criterion_invariants() {
  double worst_norm = 0.0;
  for (std::size_t p = 1; p <= 12; ++p)
    for (auto kind : {ModelPrior::Kind::uniform, ModelPrior::Kind::size_uniform})
      for (bool include_null : {false, true}) {
        ModelPrior mp;
        mp.kind = kind;
        mp.p = p;
        mp.include_null = include_null;
        double total = 0.0;
        for (const auto& m : enumerate_models(ModelIndex::full(p), ModelIndex(p), include_null))
          total += std::exp(log_model_prior(m, mp));
        worst_norm = std::max(worst_norm, std::abs(total - 1.0));
      }
  report("8 prior normalization", worst_norm <= 1e-12, fmt("max |sum - 1| = %.2e over p = 1..12 (limit 1e-12)", worst_norm));

  std::size_t violations = 0, checked = 0;
  const ModelIndex all = ModelIndex::full(6);
  const auto models = enumerate_models(all, ModelIndex(6), true);
  for (const auto& truth : models)
    for (const auto& sel : models) {
      const auto m = selection_metrics(sel, truth, all);
      if (m.ex + m.un + m.ov != 1 || m.tp + m.fp != sel.size()) ++violations;
      ++checked;
    }
  report("8 EX/UN/OV exhaustive", violations == 0, fmt("%zu of %zu selection pairs violate", violations, checked));

  StudyConfig config = linear_config(200, {0.5, 0.25, 0.1}, 1);
  const Problem pr = simulate_problem(config);
  SamplerConfig sc = sampler_for(pr, config, 99);
  sc.n_iter = 20000;
  sc.burn_in = 0;
  sc.check_coherence = true;
  const Chain a = run_chain(sc, {pr.posterior, pr.xi});
  report("8 cache coherence", a.diagnostics.error.empty() && a.diagnostics.max_coherence_error <= 1e-10,
         fmt("max recomputation error %.2e over %zu iterations (limit 1e-10)", a.diagnostics.max_coherence_error,
             a.diagnostics.iterations));

  const Chain b = run_chain(sc, {pr.posterior, pr.xi});
  std::ostringstream ca, cb;
  write_chain_csv(ca, a);
  write_chain_csv(cb, b);
  config.replications = 4;
  config.sampler.n_iter = 3000;
  config.sampler.burn_in = 500;
  std::ostringstream ra, rb;
  write_report_csv(ra, run_study(config, 1));
  write_report_csv(rb, run_study(config, 4));
  report("8 seed determinism", ca.str() == cb.str() && ra.str() == rb.str(),
         fmt("chain CSV %zu bytes, study report %zu bytes, identical across reruns and thread counts",
             ca.str().size(), ra.str().size()));

  double worst_bf = 0.0;
  const auto all3 = enumerate_models(ModelIndex::full(3), ModelIndex(3), false);
  for (const auto& m1 : all3)
    for (const auto& m2 : all3) {
      const double prod =
          bayes_factor_quadrature(m1, m2, *pr.posterior) * bayes_factor_quadrature(m2, m1, *pr.posterior);
      worst_bf = std::max(worst_bf, std::abs(prod - 1.0));
    }
  report("8 reciprocal Bayes factors", worst_bf <= 1e-9,
         fmt("max |BF12 BF21 - 1| = %.2e over %zu pairs (limit 1e-9)", worst_bf, all3.size() * all3.size()));
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<void()>> criteria = {
      {1, criterion_quadrature},   {2, criterion_selection}, {3, criterion_map_probability},
      {4, criterion_normality},    {5, criterion_bayes_factor}, {6, criterion_oracle},
      {7, criterion_generators},   {8, criterion_invariants},
  };
  std::vector<int> chosen;
  for (int k = 1; k < argc; ++k) chosen.push_back(std::stoi(argv[k]));
  if (chosen.empty())
    for (const auto& [id, fn] : criteria) chosen.push_back(id);

  const auto t0 = Clock::now();
  for (int id : chosen) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    try {
      it->second();
    } catch (const std::exception& e) {
      report(std::to_string(id) + " error", false, e.what());
    }
  }
  std::size_t failed = 0;
  for (const auto& l : g_lines)
    if (!l.pass) ++failed;
  std::cout << g_lines.size() - failed << " of " << g_lines.size() << " checks passed in "
            << fmt("%.0f s", seconds_since(t0)) << std::endl;
  return failed == 0 ? 0 : 1;
}
