#include "bgmm/study.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "bgmm/errors.hpp"

namespace bgmm {

using nlohmann::json;

Family parse_family(const std::string& name) {
  if (name == "longitudinal-binary") return Family::longitudinal_binary;
  if (name == "longitudinal-gaussian") return Family::longitudinal_gaussian;
  if (name == "quantile") return Family::quantile;
  if (name == "partial-correlation") return Family::partial_correlation;
  throw ConfigError("unknown family '" + name + "'");
}

std::string family_name(Family family) {
  switch (family) {
    case Family::longitudinal_binary: return "longitudinal-binary";
    case Family::longitudinal_gaussian: return "longitudinal-gaussian";
    case Family::quantile: return "quantile";
    case Family::partial_correlation: return "partial-correlation";
  }
  return "";
}

namespace {

bool is_longitudinal(Family f) { return f == Family::longitudinal_binary || f == Family::longitudinal_gaussian; }

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

VectorXd read_vector(const json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  return v;
}

json write_vector(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

std::string working_correlation_name(WorkingCorrelation w) {
  switch (w) {
    case WorkingCorrelation::estimated: return "estimated";
    case WorkingCorrelation::exchangeable_known: return "exchangeable-known";
    case WorkingCorrelation::independence: return "independence";
  }
  return "";
}

}  // namespace

std::size_t StudyConfig::dimension() const {
  return family == Family::partial_correlation ? vech_size(static_cast<std::size_t>(omega0.rows())) : p;
}

VectorXd StudyConfig::truth() const {
  return family == Family::partial_correlation ? vech(omega0) : theta0;
}

void StudyConfig::validate() const {
  if (n == 0) throw ConfigError("n must be positive");
  if (replications == 0) throw ConfigError("replications must be positive");
  if (family == Family::partial_correlation) {
    if (omega0.rows() == 0 || omega0.rows() != omega0.cols()) throw ConfigError("omega0 must be a square matrix");
    if ((omega0 - omega0.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("omega0 must be symmetric");
    Eigen::LLT<MatrixXd> llt(omega0);
    if (llt.info() != Eigen::Success) throw ConfigError("omega0 must be positive definite");
    if (n < static_cast<std::size_t>(omega0.rows()) + 1) throw ConfigError("n must exceed the number of variables");
  } else {
    if (p == 0) throw ConfigError("p must be positive");
    if (s == 0) throw ConfigError("s must be positive");
    if (theta0.size() != static_cast<Eigen::Index>(p))
      throw ConfigError("theta0 has length " + std::to_string(theta0.size()) + ", expected p = " + std::to_string(p));
    if (!theta0.allFinite()) throw ConfigError("theta0 must be finite");
  }
  if (is_longitudinal(family) && s > 1 && !(rho > -1.0 / static_cast<double>(s - 1) && rho < 1.0))
    throw ConfigError("rho outside (-1/(s-1), 1)");
  if (family == Family::quantile) {
    if (s != 1) throw ConfigError("quantile family requires s = 1");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0,1)");
  }
  if (family == Family::longitudinal_gaussian && !(sigma > 0.0)) throw ConfigError("sigma must be positive");
  sampler.validate();
  for (double sd : pilot_grid)
    if (!(sd > 0.0)) throw ConfigError("pilot grid entries must be positive");
  try {
    param_prior.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

StudyConfig parse_study_config(const json& j, bool validate) {
  StudyConfig c;
  try {
    reject_unknown(j,
                   {"family", "n", "s", "p", "theta0", "theta0_leading", "omega0", "rho", "sigma", "tau", "noise",
                    "working_correlation", "feasibility", "replications", "seed", "sampler", "priors", "baselines"},
                   "config");
    if (!j.contains("family")) throw ConfigError("config needs a 'family'");
    c.family = parse_family(j.at("family").get<std::string>());
    read(j, "n", c.n);
    read(j, "s", c.s);
    read(j, "p", c.p);
    read(j, "rho", c.rho);
    read(j, "sigma", c.sigma);
    read(j, "tau", c.tau);
    read(j, "replications", c.replications);
    read(j, "seed", c.seed);
    read(j, "baselines", c.baselines);
    if (c.family == Family::quantile && !j.contains("s")) c.s = 1;
    if (j.contains("theta0") && j.contains("theta0_leading"))
      throw ConfigError("give either theta0 or theta0_leading, not both");
    if (j.contains("theta0")) c.theta0 = read_vector(j.at("theta0"));
    if (j.contains("theta0_leading")) {
      const VectorXd lead = read_vector(j.at("theta0_leading"));
      if (lead.size() > static_cast<Eigen::Index>(c.p)) throw ConfigError("theta0_leading longer than p");
      c.theta0 = VectorXd::Zero(static_cast<Eigen::Index>(c.p));
      c.theta0.head(lead.size()) = lead;
    }
    if (j.contains("omega0")) {
      const auto& rows = j.at("omega0");
      if (!rows.is_array() || rows.empty()) throw ConfigError("omega0 must be a nonempty array of rows");
      const auto s = static_cast<Eigen::Index>(rows.size());
      c.omega0.resize(s, s);
      for (Eigen::Index a = 0; a < s; ++a) {
        const VectorXd row = read_vector(rows[static_cast<std::size_t>(a)]);
        if (row.size() != s) throw ConfigError("omega0 must be square");
        c.omega0.row(a) = row.transpose();
      }
      if (c.family == Family::partial_correlation) {
        c.s = static_cast<std::size_t>(s);
        c.p = vech_size(c.s);
      }
    }
    if (j.contains("noise")) {
      const auto& nz = j.at("noise");
      reject_unknown(nz, {"kind", "scale"}, "noise");
      const auto kind = nz.value("kind", std::string("normal"));
      if (kind == "normal") c.noise.kind = NoiseSpec::Kind::normal;
      else if (kind == "laplace") c.noise.kind = NoiseSpec::Kind::laplace;
      else if (kind == "zero") c.noise.kind = NoiseSpec::Kind::zero;
      else throw ConfigError("unknown noise kind '" + kind + "'");
      read(nz, "scale", c.noise.scale);
    }
    if (j.contains("working_correlation")) {
      const auto w = j.at("working_correlation").get<std::string>();
      if (w == "estimated") c.working_correlation = WorkingCorrelation::estimated;
      else if (w == "exchangeable-known") c.working_correlation = WorkingCorrelation::exchangeable_known;
      else if (w == "independence") c.working_correlation = WorkingCorrelation::independence;
      else throw ConfigError("unknown working_correlation '" + w + "'");
    }
    if (j.contains("feasibility")) {
      const auto f = j.at("feasibility").get<std::string>();
      if (f == "strict") c.feasibility = FeasibilityPolicy::strict;
      else if (f == "clamp") c.feasibility = FeasibilityPolicy::clamp;
      else throw ConfigError("unknown feasibility policy '" + f + "'");
    }
    if (j.contains("sampler")) {
      const auto& sj = j.at("sampler");
      reject_unknown(sj, {"n_iter", "burn_in", "thin", "sigma_add", "c_within", "pilot_grid", "index_correction"},
                     "sampler");
      read(sj, "n_iter", c.sampler.n_iter);
      read(sj, "burn_in", c.sampler.burn_in);
      read(sj, "thin", c.sampler.thin);
      read(sj, "sigma_add", c.sampler.sigma_add);
      read(sj, "c_within", c.sampler.c_within);
      read(sj, "index_correction", c.sampler.index_correction);
      read(sj, "pilot_grid", c.pilot_grid);
    }
    if (j.contains("priors")) {
      const auto& pj = j.at("priors");
      reject_unknown(pj, {"param", "model"}, "priors");
      if (pj.contains("param")) {
        const auto& pp = pj.at("param");
        reject_unknown(pp, {"kind", "sigma", "half_width"}, "priors.param");
        const auto kind = pp.value("kind", std::string("normal"));
        if (kind == "normal") c.param_prior.kind = ParamPrior::Kind::normal;
        else if (kind == "uniform") c.param_prior.kind = ParamPrior::Kind::uniform_box;
        else throw ConfigError("unknown parameter prior '" + kind + "'");
        read(pp, "sigma", c.param_prior.sigma);
        read(pp, "half_width", c.param_prior.half_width);
      }
      if (pj.contains("model")) {
        const auto& pm = pj.at("model");
        reject_unknown(pm, {"kind", "include_null"}, "priors.model");
        const auto kind = pm.value("kind", std::string("size-uniform"));
        if (kind == "uniform" || kind == "pim1") c.model_prior = ModelPrior::Kind::uniform;
        else if (kind == "size-uniform" || kind == "pim2") c.model_prior = ModelPrior::Kind::size_uniform;
        else throw ConfigError("unknown model prior '" + kind + "'");
        if (pm.contains("include_null")) c.include_null = pm.at("include_null").get<bool>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (validate) c.validate();
  return c;
}

StudyConfig load_study_config(const std::filesystem::path& path, bool validate) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_study_config(j, validate);
}

json to_json(const StudyConfig& c) {
  json j;
  j["family"] = family_name(c.family);
  j["n"] = c.n;
  if (c.family == Family::partial_correlation) {
    json rows = json::array();
    for (Eigen::Index a = 0; a < c.omega0.rows(); ++a) rows.push_back(write_vector(c.omega0.row(a).transpose()));
    j["omega0"] = rows;
  } else {
    j["s"] = c.s;
    j["p"] = c.p;
    j["theta0"] = write_vector(c.theta0);
  }
  if (is_longitudinal(c.family)) {
    j["rho"] = c.rho;
    j["working_correlation"] = working_correlation_name(c.working_correlation);
  }
  if (c.family == Family::longitudinal_binary)
    j["feasibility"] = c.feasibility == FeasibilityPolicy::strict ? "strict" : "clamp";
  if (c.family == Family::longitudinal_gaussian) j["sigma"] = c.sigma;
  if (c.family == Family::quantile) {
    j["tau"] = c.tau;
    j["noise"] = {{"kind", c.noise.kind == NoiseSpec::Kind::normal    ? "normal"
                           : c.noise.kind == NoiseSpec::Kind::laplace ? "laplace"
                                                                      : "zero"},
                  {"scale", c.noise.scale}};
  }
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["baselines"] = c.baselines;
  j["sampler"] = {{"n_iter", c.sampler.n_iter},         {"burn_in", c.sampler.burn_in},
                  {"thin", c.sampler.thin},             {"sigma_add", c.sampler.sigma_add},
                  {"c_within", c.sampler.c_within},     {"pilot_grid", c.pilot_grid},
                  {"index_correction", c.sampler.index_correction}};
  json model = {{"kind", c.model_prior == ModelPrior::Kind::uniform ? "uniform" : "size-uniform"}};
  if (c.include_null) model["include_null"] = *c.include_null;
  json param = {{"kind", c.param_prior.kind == ParamPrior::Kind::normal ? "normal" : "uniform"}};
  if (c.param_prior.kind == ParamPrior::Kind::normal)
    param["sigma"] = c.param_prior.sigma;
  else
    param["half_width"] = c.param_prior.half_width;
  j["priors"] = {{"param", param}, {"model", model}};
  return j;
}

Dataset simulate_dataset(const StudyConfig& c, Rng& rng, BinaryGenerationStats* stats) {
  switch (c.family) {
    case Family::longitudinal_binary:
      return generate_correlated_binary(c.n, c.s, uniform_covariates(), c.theta0, c.rho, rng, c.feasibility, stats);
    case Family::longitudinal_gaussian:
      return generate_longitudinal_gaussian(c.n, c.s, uniform_covariates(), c.theta0, c.rho, c.sigma, rng);
    case Family::quantile:
      return generate_quantile_data(c.n, c.p, c.tau, c.theta0, c.noise, rng);
    case Family::partial_correlation:
      return generate_precision_data(c.n, c.omega0, rng);
  }
  throw ConfigError("unknown family");
}

Problem prepare_problem(std::shared_ptr<const Dataset> data, const StudyConfig& config) {
  data->validate();
  Problem pr;
  pr.family = config.family;
  pr.data = data;
  std::size_t p = 0;
  ModelIndex selectable;
  std::optional<WeightedCriterion> crit;

  if (is_longitudinal(config.family)) {
    p = data->p;
    LongitudinalSpec spec;
    spec.s = data->s;
    spec.link = config.family == Family::longitudinal_binary ? Link::logit : Link::identity;
    spec.working_correlation = MatrixXd::Identity(static_cast<Eigen::Index>(data->s), static_cast<Eigen::Index>(data->s));
    pr.theta_tilde = longitudinal_preliminary(*data, spec);
    if (spec.link == Link::identity) {
      const VectorXd r = data->Y - data->X * pr.theta_tilde;
      spec.dispersion = std::max(r.squaredNorm() / static_cast<double>(r.size()), 1e-12);
    }
    switch (config.working_correlation) {
      case WorkingCorrelation::estimated:
        spec.working_correlation = estimate_working_correlation(*data, spec, pr.theta_tilde);
        break;
      case WorkingCorrelation::exchangeable_known:
        spec.working_correlation = exchangeable_correlation(data->s, config.rho);
        break;
      case WorkingCorrelation::independence:
        break;
    }
    auto moments = std::make_shared<LongitudinalMoment>(data, spec, pr.theta_tilde);
    crit.emplace(estimate_weighting_matrix(*moments, pr.theta_tilde));
    pr.moments = moments;
    pr.longitudinal = spec;
    selectable = ModelIndex::full(p);
  } else if (config.family == Family::quantile) {
    p = data->p;
    const QuantileSpec spec{config.tau};
    pr.theta_tilde = quantile_preliminary(*data, spec);
    pr.moments = std::make_shared<QuantileMoment>(data, spec);
    crit.emplace(quantile_weighting(*data, spec));
    selectable = ModelIndex::full(p);
  } else {
    p = vech_size(data->s);
    pr.theta_tilde = precision_preliminary(*data).theta;
    auto moments = std::make_shared<PrecisionMoment>(data);
    crit.emplace(estimate_weighting_matrix(*moments, pr.theta_tilde));
    pr.moments = moments;
    selectable = precision_off_diagonal(data->s);
  }

  const ModelIndex full = ModelIndex::full(p);
  if (pr.moments->differentiable() || p <= 12) {
    pr.naive = gmm_estimate(*pr.moments, full, *crit, pr.theta_tilde);
  } else {
    pr.naive.model = full;
    pr.naive.theta_hat = pr.theta_tilde;
    pr.naive.theta_full = pr.theta_tilde;
    pr.naive.criterion_value = crit->quadratic_form(pr.moments->mean_moment(pr.theta_tilde));
  }
  const VectorXd xi_at = pr.naive.theta_full.allFinite() ? pr.naive.theta_full : pr.theta_tilde;
  pr.xi = estimate_param_covariance(*pr.moments, xi_at, *crit);

  const bool include_null = config.include_null.value_or(config.family == Family::partial_correlation);
  ModelPrior model_prior{config.model_prior, selectable.size(), include_null};
  pr.posterior = std::make_shared<QuasiPosterior>(pr.moments, *crit, config.param_prior, model_prior, selectable);

  pr.start.model = full - selectable;
  pr.start.theta = VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (config.family == Family::partial_correlation)
    for (std::size_t j : pr.start.model.indices())
      pr.start.theta(static_cast<Eigen::Index>(j)) = pr.theta_tilde(static_cast<Eigen::Index>(j));
  pr.start.log_post = pr.posterior->log_density(pr.start.theta, pr.start.model);
  return pr;
}

SamplerConfig sampler_for(const Problem& problem, const StudyConfig& config, std::uint64_t seed) {
  SamplerConfig sc = config.sampler;
  sc.seed = seed;
  sc.init_model = problem.start.model;
  sc.init_theta = problem.start.theta;
  return sc;
}

SelectionMetrics selection_metrics(const ModelIndex& selected, const ModelIndex& truth, const ModelIndex& selectable) {
  const ModelIndex sel = selected & selectable;
  const ModelIndex tru = truth & selectable;
  SelectionMetrics m;
  m.tp = (sel & tru).size();
  m.fp = (sel - tru).size();
  const std::size_t k0 = tru.size();
  m.un = m.tp < k0 ? 1 : 0;
  m.ex = (m.tp == k0 && m.fp == 0) ? 1 : 0;
  m.ov = (m.tp == k0 && m.fp > 0) ? 1 : 0;
  return m;
}

namespace {

ModelIndex support(const VectorXd& theta) {
  ModelIndex m(static_cast<std::size_t>(theta.size()));
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (theta(j) != 0.0) m.insert(static_cast<std::size_t>(j));
  return m;
}

}  // namespace

ReplicationResult run_replication(const StudyConfig& config, std::size_t k) {
  ReplicationResult row;
  row.replication = k;
  row.seed = derive_seed(config.seed, k);
  try {
    Rng data_rng(derive_seed(row.seed, 0));
    BinaryGenerationStats stats;
    auto data = std::make_shared<const Dataset>(simulate_dataset(config, data_rng, &stats));
    row.clamped_pairs = stats.clamped_pairs;
    const Problem pr = prepare_problem(data, config);

    SamplerConfig sc = sampler_for(pr, config, derive_seed(row.seed, 1));
    PosteriorContext ctx{pr.posterior, pr.xi};
    if (!config.pilot_grid.empty()) sc.sigma_add = pilot_tune_sigma_add(sc, ctx, config.pilot_grid);
    row.sigma_add = sc.sigma_add;
    const Chain chain = run_chain(sc, ctx);
    if (!chain.diagnostics.error.empty()) throw Error("chain stopped: " + chain.diagnostics.error);
    row.between_acceptance = chain.diagnostics.between_acceptance();
    row.within_acceptance = chain.diagnostics.within_acceptance();

    const PosteriorSummary summary = summarize_chain(chain);
    const VectorXd theta0 = config.truth();
    const ModelIndex truth = support(theta0);
    const double k0 = std::max<double>(1.0, static_cast<double>(truth.size()));
    row.map_model = summary.map_model;
    row.selection = selection_metrics(summary.map_model, truth, pr.posterior->selectable());
    row.map_prob = summary.model_probs.front().second;
    row.true_prob = summary.probability(truth);
    row.mse = (summary.posterior_mean - theta0).squaredNorm() / k0;
    if (pr.longitudinal) row.pmse = posterior_pmse(chain, *data, theta0, *pr.longitudinal);

    if (config.baselines) {
      row.naive_mse = (pr.naive.theta_full - theta0).squaredNorm() / k0;
      const GmmFit oracle = gmm_estimate(*pr.moments, truth, pr.posterior->criterion(), pr.theta_tilde);
      row.oracle_mse = (oracle.theta_full - theta0).squaredNorm() / k0;
      if (pr.longitudinal) {
        row.naive_pmse = point_pmse(pr.naive.theta_full, *data, theta0, *pr.longitudinal);
        row.oracle_pmse = point_pmse(oracle.theta_full, *data, theta0, *pr.longitudinal);
      }
    }
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  return row;
}

const Aggregate& StudyReport::aggregate(const std::string& name) const {
  for (const auto& [key, value] : aggregates)
    if (key == name) return value;
  throw std::out_of_range("no aggregate named " + name);
}

namespace {

Aggregate fold(const std::vector<double>& values) {
  Aggregate a;
  double sum = 0.0;
  for (double v : values)
    if (!std::isnan(v)) {
      sum += v;
      ++a.count;
    }
  if (a.count == 0) return a;
  a.mean = sum / static_cast<double>(a.count);
  double ss = 0.0;
  for (double v : values)
    if (!std::isnan(v)) ss += (v - a.mean) * (v - a.mean);
  a.se = a.count > 1 ? std::sqrt(ss / static_cast<double>(a.count - 1) / static_cast<double>(a.count)) : 0.0;
  return a;
}

}  // namespace

StudyReport run_study(const StudyConfig& config, std::size_t threads) {
  config.validate();
  StudyReport report;
  report.config = config;
  report.rows.resize(config.replications);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, config.replications);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < config.replications; k = next++) report.rows[k] = run_replication(config, k);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  using Getter = double (*)(const ReplicationResult&);
  const std::vector<std::pair<std::string, Getter>> metrics = {
      {"ex", [](const ReplicationResult& r) { return double(r.selection.ex); }},
      {"un", [](const ReplicationResult& r) { return double(r.selection.un); }},
      {"ov", [](const ReplicationResult& r) { return double(r.selection.ov); }},
      {"tp", [](const ReplicationResult& r) { return double(r.selection.tp); }},
      {"fp", [](const ReplicationResult& r) { return double(r.selection.fp); }},
      {"mse", [](const ReplicationResult& r) { return r.mse; }},
      {"pmse", [](const ReplicationResult& r) { return r.pmse; }},
      {"map_prob", [](const ReplicationResult& r) { return r.map_prob; }},
      {"true_prob", [](const ReplicationResult& r) { return r.true_prob; }},
      {"naive_mse", [](const ReplicationResult& r) { return r.naive_mse; }},
      {"oracle_mse", [](const ReplicationResult& r) { return r.oracle_mse; }},
      {"naive_pmse", [](const ReplicationResult& r) { return r.naive_pmse; }},
      {"oracle_pmse", [](const ReplicationResult& r) { return r.oracle_pmse; }},
      {"between_acceptance", [](const ReplicationResult& r) { return r.between_acceptance; }},
      {"within_acceptance", [](const ReplicationResult& r) { return r.within_acceptance; }},
  };
  for (const auto& row : report.rows)
    if (!row.ok) ++report.failures;
  for (const auto& [name, get] : metrics) {
    std::vector<double> values;
    for (const auto& row : report.rows)
      if (row.ok) values.push_back(get(row));
    report.aggregates.emplace_back(name, fold(values));
  }
  return report;
}

namespace {

void put(std::ostream& out, double x) {
  if (std::isnan(x)) return;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, res.ptr - buf);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + '"';
}

}  // namespace

void write_report_csv(std::ostream& out, const StudyReport& report) {
  out << "replication,seed,status,map_model,map_size,ex,un,ov,tp,fp,mse,pmse,map_prob,true_prob,naive_mse,"
         "oracle_mse,naive_pmse,oracle_pmse,sigma_add,between_acceptance,within_acceptance,clamped_pairs,error\n";
  for (const auto& r : report.rows) {
    out << r.replication << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      out << r.map_model.to_hex() << ',' << r.map_model.size() << ',' << r.selection.ex << ',' << r.selection.un
          << ',' << r.selection.ov << ',' << r.selection.tp << ',' << r.selection.fp << ',';
      for (double v : {r.mse, r.pmse, r.map_prob, r.true_prob, r.naive_mse, r.oracle_mse, r.naive_pmse,
                       r.oracle_pmse, r.sigma_add, r.between_acceptance, r.within_acceptance}) {
        put(out, v);
        out << ',';
      }
      out << r.clamped_pairs << ",\n";
    } else {
      out << ",,,,,,,,,,,,,,,,,," << quote(r.error) << '\n';
    }
  }
}

json to_json(const StudyReport& report) {
  json aggregates = json::object();
  for (const auto& [name, a] : report.aggregates) {
    json entry = {{"count", a.count}};
    entry["mean"] = std::isnan(a.mean) ? json(nullptr) : json(a.mean);
    entry["se"] = std::isnan(a.se) ? json(nullptr) : json(a.se);
    aggregates[name] = entry;
  }
  json failures = json::array();
  for (const auto& r : report.rows)
    if (!r.ok) failures.push_back({{"replication", r.replication}, {"seed", r.seed}, {"error", r.error}});
  return {{"schema_version", kReportSchemaVersion},
          {"config", to_json(report.config)},
          {"replications", report.rows.size()},
          {"failures", report.failures},
          {"failed_replications", failures},
          {"aggregates", aggregates}};
}

}  // namespace bgmm
