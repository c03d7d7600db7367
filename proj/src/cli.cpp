#include "bgmm/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "bgmm/dataset_io.hpp"
#include "bgmm/errors.hpp"
#include "bgmm/inference.hpp"
#include "bgmm/study.hpp"

namespace bgmm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  bool verbose = false;
  std::optional<std::size_t> n_iter, burn_in, thin;
  std::optional<double> sigma_add;
};

class Log {
 public:
  Log(std::ostream& err, bool on) : err_(err), on_(on), start_(std::chrono::steady_clock::now()) {}
  template <class... Args>
  void operator()(const Args&... args) {
    if (!on_) return;
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    err_ << "[" << std::fixed << std::setprecision(1) << t << "s] ";
    (err_ << ... << args);
    err_ << std::defaultfloat << '\n';
  }

 private:
  std::ostream& err_;
  bool on_;
  std::chrono::steady_clock::time_point start_;
};

void apply_overrides(StudyConfig& config, const Options& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.n_iter) config.sampler.n_iter = *o.n_iter;
  if (o.burn_in) config.sampler.burn_in = *o.burn_in;
  if (o.thin) config.sampler.thin = *o.thin;
  if (o.sigma_add) {
    config.sampler.sigma_add = *o.sigma_add;
    config.pilot_grid.clear();
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

// Adapts a study configuration to an existing dataset.
StudyConfig config_for_data(StudyConfig config, const Dataset& data) {
  config.n = data.n;
  if (config.family == Family::partial_correlation) {
    if (data.p != 0) throw ConfigError("partial-correlation data must not have X columns");
    config.s = data.s;
    config.p = vech_size(data.s);
    if (config.omega0.rows() != static_cast<Eigen::Index>(data.s))
      config.omega0 = MatrixXd::Identity(static_cast<Eigen::Index>(data.s), static_cast<Eigen::Index>(data.s));
  } else {
    if (data.p == 0) throw ConfigError("dataset has no covariate columns");
    if (config.family == Family::quantile && data.s != 1) throw ConfigError("quantile data must have one position per subject");
    config.s = data.s;
    config.p = data.p;
    if (config.theta0.size() != static_cast<Eigen::Index>(data.p)) config.theta0 = VectorXd::Zero(static_cast<Eigen::Index>(data.p));
  }
  config.validate();
  return config;
}

json diagnostics_json(const ChainDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"add_attempts", d.add_attempts},
          {"add_accepts", d.add_accepts},
          {"remove_attempts", d.remove_attempts},
          {"remove_accepts", d.remove_accepts},
          {"boundary_noops", d.boundary_noops},
          {"within_attempts", d.within_attempts},
          {"within_accepts", d.within_accepts},
          {"between_acceptance", d.between_acceptance()},
          {"within_acceptance", d.within_acceptance()},
          {"cholesky_fallbacks", d.cholesky_fallbacks},
          {"error", d.error}};
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

int cmd_generate(const Options& o, std::ostream& out, Log& log) {
  StudyConfig config = load_study_config(o.config);
  apply_overrides(config, o);
  config.validate();
  const std::uint64_t data_seed = derive_seed(derive_seed(config.seed, 0), 0);
  Rng rng(data_seed);
  BinaryGenerationStats stats;
  log("generating ", family_name(config.family), " data, n = ", config.n);
  const Dataset data = simulate_dataset(config, rng, &stats);
  const fs::path path(o.out);
  auto file = open_output(path);
  write_dataset_csv(file, data);
  file.close();
  if (!file) throw IoError("write failed for " + path.string());
  json meta = {{"schema_version", kReportSchemaVersion},
               {"family", family_name(config.family)},
               {"n", data.n},
               {"s", data.s},
               {"p", data.p},
               {"seed", config.seed},
               {"data_seed", data_seed},
               {"theta0", vector_json(config.truth())},
               {"config", to_json(config)}};
  if (config.family == Family::longitudinal_binary)
    meta["generator"] = {{"method", "emrich-piedmonte"},
                         {"rho", config.rho},
                         {"pairs", stats.total_pairs},
                         {"clamped_pairs", stats.clamped_pairs},
                         {"repaired_subjects", stats.repaired_subjects}};
  write_json(fs::path(path.string() + ".meta.json"), meta);
  out << "wrote " << path.string() << " (" << data.n * data.s << " rows)\n";
  return 0;
}

int cmd_fit(const Options& o, std::ostream& out, Log& log) {
  StudyConfig config = load_study_config(o.config, false);
  apply_overrides(config, o);
  auto data = std::make_shared<const Dataset>(read_dataset_csv(fs::path(o.data)));
  config = config_for_data(config, *data);
  log("read ", data->n, " subjects x ", data->s, " positions, p = ", data->p);
  const Problem pr = prepare_problem(data, config);
  SamplerConfig sc = sampler_for(pr, config, derive_seed(derive_seed(config.seed, 0), 1));
  const PosteriorContext ctx{pr.posterior, pr.xi};
  if (!config.pilot_grid.empty()) {
    sc.sigma_add = pilot_tune_sigma_add(sc, ctx, config.pilot_grid);
    log("pilot-tuned sigma_add = ", sc.sigma_add);
  }
  log("running chain: ", sc.n_iter, " iterations");
  const Chain chain = run_chain(sc, ctx);
  const fs::path dir(o.out);
  ensure_directory(dir);
  {
    auto file = open_output(dir / "chain.csv");
    write_chain_csv(file, chain);
  }
  if (!chain.diagnostics.error.empty()) throw Error("chain stopped early: " + chain.diagnostics.error);
  if (chain.draws.empty()) throw Error("chain retained no draws");
  const PosteriorSummary summary = summarize_chain(chain);
  json j = to_json(summary);
  j["family"] = family_name(config.family);
  j["sigma_add"] = sc.sigma_add;
  j["seed"] = sc.seed;
  j["diagnostics"] = diagnostics_json(chain.diagnostics);
  j["theta_tilde"] = vector_json(pr.theta_tilde);
  j["naive_gmm"] = vector_json(pr.naive.theta_full);
  write_json(dir / "summary.json", j);
  out << "MAP model " << summary.map_model.to_hex() << " (probability " << summary.model_probs.front().second
      << "); wrote " << (dir / "summary.json").string() << "\n";
  return 0;
}

int cmd_study(const Options& o, std::ostream& out, Log& log) {
  StudyConfig config = load_study_config(o.config);
  apply_overrides(config, o);
  config.validate();
  const std::size_t threads = o.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : o.threads;
  log("study: ", config.replications, " replications on ", threads, " threads");
  const StudyReport report = run_study(config, threads);
  const fs::path dir(o.out);
  ensure_directory(dir);
  {
    auto file = open_output(dir / "report.csv");
    write_report_csv(file, report);
  }
  write_json(dir / "report.json", to_json(report));
  const auto& ex = report.aggregate("ex");
  out << "replications " << report.rows.size() << ", failures " << report.failures << ", EX " << ex.mean
      << "; wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_oracle_check(const Options& o, std::ostream& out, Log& log) {
  StudyConfig config = load_study_config(o.config, o.data.empty());
  apply_overrides(config, o);
  std::shared_ptr<const Dataset> data;
  if (o.data.empty()) {
    config.validate();
    Rng rng(derive_seed(derive_seed(config.seed, 0), 0));
    data = std::make_shared<const Dataset>(simulate_dataset(config, rng));
  } else {
    data = std::make_shared<const Dataset>(read_dataset_csv(fs::path(o.data)));
    config = config_for_data(config, *data);
  }
  const std::size_t dim = config.family == Family::partial_correlation ? vech_size(data->s) : data->p;
  QuadratureOptions qopt;
  if (dim > qopt.max_dimension)
    throw BudgetError("oracle check needs at most " + std::to_string(qopt.max_dimension) + " parameters, got " +
                          std::to_string(dim),
                      dim);
  const Problem pr = prepare_problem(data, config);
  const QuasiPosterior& post = *pr.posterior;
  const auto models = enumerate_models(post.selectable(), post.fixed(), post.model_prior().include_null);

  log("quadrature over ", models.size(), " models");
  const auto quad = quadrature_model_probabilities(models, post, qopt);

  std::vector<double> laplace_logs;
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& m : models) {
    double v = -std::numeric_limits<double>::infinity();
    try {
      v = laplace_log_marginal(m, post, pr.theta_tilde) + post.log_model_prior_of(m);
    } catch (const Error&) {
    }
    laplace_logs.push_back(v);
    peak = std::max(peak, v);
  }
  double norm = 0.0;
  for (double v : laplace_logs) norm += std::exp(v - peak);

  SamplerConfig sc = sampler_for(pr, config, derive_seed(derive_seed(config.seed, 0), 1));
  log("running chain: ", sc.n_iter, " iterations");
  const Chain chain = run_chain(sc, {pr.posterior, pr.xi});
  if (!chain.diagnostics.error.empty()) throw Error("chain stopped early: " + chain.diagnostics.error);
  const PosteriorSummary summary = summarize_chain(chain);

  json rows = json::array();
  double gap_chain = 0.0, gap_laplace = 0.0;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    const double q = quad[k].second;
    const double lap = std::exp(laplace_logs[k] - peak) / norm;
    const double ch = summary.probability(m);
    gap_chain = std::max(gap_chain, std::abs(ch - q));
    gap_laplace = std::max(gap_laplace, std::abs(lap - q));
    json row = {{"model", m.to_hex()},
                {"indices", m.indices()},
                {"quadrature_log_marginal", quadrature_log_marginal(m, post, qopt).log_marginal},
                {"quadrature_prob", q},
                {"laplace_prob", lap},
                {"chain_prob", ch}};
    row["laplace_log_marginal"] = std::isfinite(laplace_logs[k])
                                      ? json(laplace_logs[k] - post.log_model_prior_of(m))
                                      : json(nullptr);
    rows.push_back(row);
  }
  json j = {{"schema_version", kReportSchemaVersion},
            {"family", family_name(config.family)},
            {"n", data->n},
            {"models", rows},
            {"max_gap_chain_quadrature", gap_chain},
            {"max_gap_laplace_quadrature", gap_laplace},
            {"chain_draws", chain.draws.size()}};
  write_json(fs::path(o.out), j);
  out << "max |chain - quadrature| = " << gap_chain << ", max |laplace - quadrature| = " << gap_laplace << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian GMM model selection with reversible-jump MCMC"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the master seed");
    sub->add_flag("--verbose", o.verbose, "Progress messages on stderr");
  };
  auto sampler_flags = [&](CLI::App* sub) {
    sub->add_option("--n-iter", o.n_iter, "Chain length");
    sub->add_option("--burn-in", o.burn_in, "Burn-in iterations");
    sub->add_option("--thin", o.thin, "Thinning stride");
    sub->add_option("--sigma-add", o.sigma_add, "Add-move proposal sd (disables pilot tuning)");
  };

  auto* gen = app.add_subcommand("generate", "Simulate one dataset from a study configuration");
  common(gen);
  gen->add_option("--out", o.out, "Output CSV path")->required();

  auto* fit = app.add_subcommand("fit", "Run the sampler on a dataset and summarize the posterior");
  common(fit);
  sampler_flags(fit);
  fit->add_option("--data", o.data, "Dataset CSV")->required();
  fit->add_option("--out", o.out, "Output directory")->required();

  auto* study = app.add_subcommand("study", "Run a replication study");
  common(study);
  sampler_flags(study);
  study->add_option("--out", o.out, "Output directory")->required();
  study->add_option("--threads", o.threads, "Worker threads (default: logical cores)");

  auto* oracle = app.add_subcommand("oracle-check", "Compare chain, Laplace and quadrature model probabilities");
  common(oracle);
  sampler_flags(oracle);
  oracle->add_option("--data", o.data, "Dataset CSV (default: simulate from the config)");
  oracle->add_option("--out", o.out, "Output JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Log log(err, o.verbose);
  try {
    if (*gen) return cmd_generate(o, out, log);
    if (*fit) return cmd_fit(o, out, log);
    if (*study) return cmd_study(o, out, log);
    if (*oracle) return cmd_oracle_check(o, out, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 2;
}

}  // namespace bgmm
