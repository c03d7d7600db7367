#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bgmm/model_index.hpp"
#include "bgmm/moment_core.hpp"
#include "bgmm/priors.hpp"
#include "bgmm/rng.hpp"

namespace bgmm {

struct SamplerConfig {
  std::size_t n_iter = 30000;
  std::size_t burn_in = 10000;
  std::size_t thin = 20;
  double sigma_add = 0.2;
  double c_within = 2.4 * 2.4;
  std::uint64_t seed = 1;
  /// Starting point; when unset the chain starts at theta = 0 on the
  /// smallest model (the fixed coordinates only).
  std::optional<ModelIndex> init_model;
  std::optional<VectorXd> init_theta;
  /// Include the index-selection probabilities in the add/remove ratios.
  /// false gives the uncorrected ratios q_new / (q_old phi) and q_new phi / q_old.
  bool index_correction = true;
  /// Recompute the log posterior after every accepted move and record the
  /// largest discrepancy in the diagnostics.
  bool check_coherence = false;

  void validate() const;
};

/// Target plus the frozen proposal covariance Xi (p x p).
struct PosteriorContext {
  std::shared_ptr<const JointDensity> target;
  MatrixXd xi;

  void validate() const;
};

struct ChainState {
  VectorXd theta;  // length p, zeros off the model
  ModelIndex model;
  double log_post = 0.0;
};

struct Draw {
  std::size_t iteration = 0;
  ModelIndex model;
  VectorXd theta;
  double log_post = 0.0;
};

struct ChainDiagnostics {
  std::size_t iterations = 0;
  std::size_t add_attempts = 0;
  std::size_t add_accepts = 0;
  std::size_t remove_attempts = 0;
  std::size_t remove_accepts = 0;
  std::size_t boundary_noops = 0;
  std::size_t within_attempts = 0;
  std::size_t within_accepts = 0;
  std::size_t cholesky_fallbacks = 0;
  double max_coherence_error = 0.0;
  std::string error;  // set when the chain stopped early

  double between_acceptance() const;
  double within_acceptance() const;
};

struct Chain {
  std::vector<Draw> draws;
  ChainDiagnostics diagnostics;
  ChainState final_state;
};

/// Scaled Cholesky factors of c * Xi_M, cached per model. A chain owns one.
class ProposalCache {
 public:
  ProposalCache(const MatrixXd& xi, double c);
  /// Lower factor for the active coordinates of model; sets fallback when the
  /// diagonal of Xi_M had to be used.
  const MatrixXd& factor(const ModelIndex& model, bool* fallback = nullptr);

 private:
  struct Entry {
    MatrixXd lower;
    bool fallback = false;
  };
  MatrixXd xi_;
  double c_;
  std::unordered_map<ModelIndex, Entry> cache_;
};

/// Metropolis acceptance on log scale. A -inf or NaN proposal is rejected;
/// a finite proposal from a -inf state is accepted.
bool metropolis_accept(double log_post_new, double log_post_old, double log_proposal_ratio, double u);

/// Add/remove move. Boundary moves leave the state unchanged and count as rejected.
ChainState between_model_step(const ChainState& state, const JointDensity& target, const SamplerConfig& config,
                              Rng& rng, ChainDiagnostics* diagnostics = nullptr);

/// Random-walk Metropolis on the active coordinates with proposal N(theta, c Xi_M).
ChainState within_model_step(const ChainState& state, ProposalCache& proposals, const JointDensity& target,
                             Rng& rng, ChainDiagnostics* diagnostics = nullptr);
ChainState within_model_step(const ChainState& state, const MatrixXd& xi, const JointDensity& target,
                             double c_within, Rng& rng, ChainDiagnostics* diagnostics = nullptr);

ChainState initial_state(const SamplerConfig& config, const JointDensity& target);

/// Runs n_iter iterations of (between, within). Iteration i (1-based) is
/// retained when i > burn_in and (i - burn_in) % thin == 0. Errors inside the
/// loop end the chain and are reported in diagnostics.error.
Chain run_chain(const SamplerConfig& config, const PosteriorContext& ctx);

/// Pilot chains (same seed, burn_in 0) for each candidate; returns the one with
/// the highest between-model acceptance rate, ties to the smaller sd.
double pilot_tune_sigma_add(const SamplerConfig& config, const PosteriorContext& ctx,
                            const std::vector<double>& candidates, std::size_t pilot_iterations = 2000);

/// CSV with header iteration,model,log_posterior,values. model is the hex
/// bitmask (bit j = coordinate j); values are the active coordinates in
/// increasing index order, separated by ';', in shortest round-trip form.
void write_chain_csv(std::ostream& out, const Chain& chain);

}  // namespace bgmm
