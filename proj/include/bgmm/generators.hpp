#pragma once

#include <cstddef>
#include <functional>
#include <utility>

#include "bgmm/models.hpp"
#include "bgmm/rng.hpp"

namespace bgmm {

/// P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation r
/// (Drezner-Wesolowsky / Genz, about 1e-15 absolute accuracy).
double bivariate_normal_cdf(double h, double k, double r);

/// Draws one covariate value.
using CovariateSampler = std::function<double(Rng&)>;
/// Uniform on [-1, 1].
CovariateSampler uniform_covariates();

enum class FeasibilityPolicy {
  strict,  // throw FeasibilityError for a target outside the Frechet bounds
  clamp,   // clamp the pairwise target to the nearest bound
};

struct BinaryGenerationStats {
  std::size_t clamped_pairs = 0;
  std::size_t total_pairs = 0;
  std::size_t repaired_subjects = 0;  // latent correlation projected to PD
};

/// Latent normal correlation r with P(Y_j = Y_k = 1) matching binary
/// correlation rho for marginal means mu_j, mu_k, by bisection to 1e-10.
/// Returns NaN when rho lies outside the Frechet bounds.
double latent_correlation(double mu_j, double mu_k, double rho);

/// Frechet bounds on the binary correlation of two Bernoulli variables.
std::pair<double, double> binary_correlation_bounds(double mu_j, double mu_k);

/// Correlated binary responses with logit means and exchangeable binary
/// correlation rho (Emrich-Piedmonte): per subject, solve the latent
/// correlations, draw Z ~ N(0, R_latent) and set Y_ij = 1 iff Z_ij > Phi^{-1}(1 - mu_ij).
/// Random draws per subject: the s x p covariates row by row, then s normals.
Dataset generate_correlated_binary(std::size_t n, std::size_t s, const CovariateSampler& covariates,
                                   const VectorXd& theta0, double rho, Rng& rng,
                                   FeasibilityPolicy policy = FeasibilityPolicy::strict,
                                   BinaryGenerationStats* stats = nullptr);

/// Gaussian responses Y_i = X_i theta0 + e_i, e_i ~ N(0, sigma^2 R) with R exchangeable(rho).
Dataset generate_longitudinal_gaussian(std::size_t n, std::size_t s, const CovariateSampler& covariates,
                                       const VectorXd& theta0, double rho, double sigma, Rng& rng);

struct NoiseSpec {
  enum class Kind { normal, laplace, zero };
  Kind kind = Kind::normal;
  double scale = 1.0;
};

/// Y = X' theta0 + e with X uniform on [-1,1]^p and e shifted so its
/// tau-quantile is 0. Zero noise is rejected with ConfigError.
Dataset generate_quantile_data(std::size_t n, std::size_t p, double tau, const VectorXd& theta0,
                               const NoiseSpec& noise, Rng& rng);

/// i.i.d. N(0, omega0^{-1}) rows, stored in the partial-correlation layout.
Dataset generate_precision_data(std::size_t n, const MatrixXd& omega0, Rng& rng);

}  // namespace bgmm
