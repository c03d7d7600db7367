#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bgmm/generators.hpp"
#include "bgmm/inference.hpp"
#include "bgmm/models.hpp"
#include "bgmm/priors.hpp"
#include "bgmm/sampler.hpp"

namespace bgmm {

inline constexpr int kReportSchemaVersion = 1;

enum class Family { longitudinal_binary, longitudinal_gaussian, quantile, partial_correlation };

Family parse_family(const std::string& name);
std::string family_name(Family family);

enum class WorkingCorrelation { estimated, exchangeable_known, independence };

/// Everything needed to simulate and analyse one replication. Parsed from
/// JSON; see README for the schema.
struct StudyConfig {
  Family family = Family::longitudinal_binary;
  std::size_t n = 400;
  std::size_t s = 10;
  std::size_t p = 50;
  VectorXd theta0;
  MatrixXd omega0;  // partial-correlation family only
  double rho = 0.3;
  double sigma = 1.0;  // longitudinal-gaussian noise sd
  double tau = 0.5;
  NoiseSpec noise;
  WorkingCorrelation working_correlation = WorkingCorrelation::estimated;
  FeasibilityPolicy feasibility = FeasibilityPolicy::clamp;
  std::size_t replications = 100;
  std::uint64_t seed = 2024;
  SamplerConfig sampler;
  std::vector<double> pilot_grid;  // empty: use sampler.sigma_add as given
  ParamPrior param_prior;
  ModelPrior::Kind model_prior = ModelPrior::Kind::size_uniform;
  std::optional<bool> include_null;  // default: false, true for partial-correlation
  bool baselines = true;

  void validate() const;
  /// Number of parameter coordinates (p, or s(s+1)/2 for partial-correlation).
  std::size_t dimension() const;
  /// Truth as a length-dimension() vector.
  VectorXd truth() const;
};

/// Throws ConfigError for unknown keys, wrong types or (when validate is set)
/// invalid values.
StudyConfig parse_study_config(const nlohmann::json& j, bool validate = true);
StudyConfig load_study_config(const std::filesystem::path& path, bool validate = true);
nlohmann::json to_json(const StudyConfig& config);

/// Analysis pieces shared by fit, study and oracle-check.
struct Problem {
  Family family = Family::longitudinal_binary;
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const MomentModel> moments;
  std::shared_ptr<const QuasiPosterior> posterior;
  std::optional<LongitudinalSpec> longitudinal;
  VectorXd theta_tilde;
  GmmFit naive;     // full-model GMM
  MatrixXd xi;      // proposal covariance for the within-model step
  ChainState start; // sampler starting point
};

/// Preliminary estimate, V_n, full-model GMM fit and Xi for a dataset.
Problem prepare_problem(std::shared_ptr<const Dataset> data, const StudyConfig& config);

/// Simulates one dataset for the configuration.
Dataset simulate_dataset(const StudyConfig& config, Rng& rng, BinaryGenerationStats* stats = nullptr);

/// Sampler configuration for a problem: config.sampler with the problem's start.
SamplerConfig sampler_for(const Problem& problem, const StudyConfig& config, std::uint64_t seed);

struct SelectionMetrics {
  int ex = 0, un = 0, ov = 0;
  std::size_t tp = 0, fp = 0;
};

/// EX/UN/OV and TP/FP of a selected model against the true model, over the selectable coordinates.
SelectionMetrics selection_metrics(const ModelIndex& selected, const ModelIndex& truth, const ModelIndex& selectable);

struct ReplicationResult {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  ModelIndex map_model;
  SelectionMetrics selection;
  double mse = 0.0;
  double pmse = std::numeric_limits<double>::quiet_NaN();
  double map_prob = 0.0;
  double true_prob = 0.0;
  double naive_mse = std::numeric_limits<double>::quiet_NaN();
  double oracle_mse = std::numeric_limits<double>::quiet_NaN();
  double naive_pmse = std::numeric_limits<double>::quiet_NaN();
  double oracle_pmse = std::numeric_limits<double>::quiet_NaN();
  double sigma_add = 0.0;
  double between_acceptance = 0.0;
  double within_acceptance = 0.0;
  std::size_t clamped_pairs = 0;
};

struct Aggregate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();  // sd / sqrt(count)
  std::size_t count = 0;
};

struct StudyReport {
  StudyConfig config;
  std::vector<ReplicationResult> rows;
  std::size_t failures = 0;
  std::vector<std::pair<std::string, Aggregate>> aggregates;

  const Aggregate& aggregate(const std::string& name) const;
};

/// Replication k of a study, reproducible in isolation (seed derive_seed(config.seed, k)).
ReplicationResult run_replication(const StudyConfig& config, std::size_t k);

/// Runs all replications on up to `threads` workers and folds in replication
/// order. Failures are recorded per row and excluded from the aggregates.
StudyReport run_study(const StudyConfig& config, std::size_t threads = 1);

void write_report_csv(std::ostream& out, const StudyReport& report);
nlohmann::json to_json(const StudyReport& report);

}  // namespace bgmm
