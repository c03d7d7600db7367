#include "bgmm/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "bgmm/errors.hpp"
#include "bgmm/numerics.hpp"

namespace bgmm {

namespace {

template <std::size_t N>
double gauss_sum_asin(double asr, double hk, double hs) {
  using Rule = boost::math::quadrature::gauss<double, N>;
  double sum = 0.0;
  for (std::size_t i = 0; i < Rule::abscissa().size(); ++i) {
    for (double sign : {-1.0, 1.0}) {
      const double sn = std::sin(asr * (sign * Rule::abscissa()[i] + 1.0) / 2.0);
      sum += Rule::weights()[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
  }
  return sum;
}

template <std::size_t N>
double gauss_sum_tail(double a, double bs, double hk, double c, double d) {
  using Rule = boost::math::quadrature::gauss<double, N>;
  double sum = 0.0;
  for (std::size_t i = 0; i < Rule::abscissa().size(); ++i) {
    for (double sign : {-1.0, 1.0}) {
      const double xs = std::pow(a * (sign * Rule::abscissa()[i] + 1.0), 2);
      const double rs = std::sqrt(1.0 - xs);
      const double asr = -(bs / xs + hk) / 2.0;
      if (asr > -100.0)
        sum += a * Rule::weights()[i] * std::exp(asr) *
               (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
    }
  }
  return sum;
}

// P(Z1 > h, Z2 > k).
double bivariate_upper(double h, double k, double r) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (r == 0.0) return normal_cdf(-h) * normal_cdf(-k);
  const double ar = std::abs(r);
  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    const double sum = ar < 0.3    ? gauss_sum_asin<6>(asr, hk, hs)
                       : ar < 0.75 ? gauss_sum_asin<12>(asr, hk, hs)
                                   : gauss_sum_asin<20>(asr, hk, hs);
    return sum * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (ar < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    const double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0)
      bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (-hk < 100.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * normal_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    bvn += gauss_sum_tail<20>(a, bs, hk, c, d);
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) return bvn + normal_cdf(-std::max(h, k));
  bvn = -bvn;
  if (k > h) bvn += h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
  return bvn;
}

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Nearest correlation-like matrix by eigenvalue clipping and rescaling to a unit diagonal.
MatrixXd repair_correlation(const MatrixXd& r, double floor) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r);
  const VectorXd ev = eig.eigenvalues().cwiseMax(floor);
  MatrixXd out = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  const VectorXd inv = out.diagonal().array().rsqrt();
  out = inv.asDiagonal() * out * inv.asDiagonal();
  out = 0.5 * (out + out.transpose()).eval();
  out.diagonal().setOnes();
  return out;
}

Dataset empty_design(std::size_t n, std::size_t s, std::size_t p) {
  Dataset d;
  d.n = n;
  d.s = s;
  d.p = p;
  d.X.resize(static_cast<Eigen::Index>(n * s), static_cast<Eigen::Index>(p));
  d.Y.resize(static_cast<Eigen::Index>(n * s));
  return d;
}

void fill_subject_covariates(Dataset& d, std::size_t i, const CovariateSampler& covariates, Rng& rng) {
  for (std::size_t j = 0; j < d.s; ++j)
    for (std::size_t c = 0; c < d.p; ++c)
      d.X(static_cast<Eigen::Index>(i * d.s + j), static_cast<Eigen::Index>(c)) = covariates(rng);
}

}  // namespace

double bivariate_normal_cdf(double h, double k, double r) {
  if (std::isnan(h) || std::isnan(k) || std::isnan(r) || r < -1.0 || r > 1.0)
    throw std::invalid_argument("bivariate_normal_cdf: invalid arguments");
  if (h == -std::numeric_limits<double>::infinity() || k == -std::numeric_limits<double>::infinity()) return 0.0;
  if (h == std::numeric_limits<double>::infinity()) return normal_cdf(k);
  if (k == std::numeric_limits<double>::infinity()) return normal_cdf(h);
  return std::clamp(bivariate_upper(-h, -k, r), 0.0, 1.0);
}

CovariateSampler uniform_covariates() {
  return [](Rng& rng) { return 2.0 * rng.uniform() - 1.0; };
}

std::pair<double, double> binary_correlation_bounds(double mu_j, double mu_k) {
  const double scale = std::sqrt(mu_j * (1.0 - mu_j) * mu_k * (1.0 - mu_k));
  const double lo = (std::max(0.0, mu_j + mu_k - 1.0) - mu_j * mu_k) / scale;
  const double hi = (std::min(mu_j, mu_k) - mu_j * mu_k) / scale;
  return {lo, hi};
}

namespace {

double solve_latent(double mu_j, double mu_k, double p11) {
  const double h = normal_quantile(mu_j);
  const double k = normal_quantile(mu_k);
  double lo = -1.0, hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (bivariate_normal_cdf(h, k, mid) < p11)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double latent_correlation(double mu_j, double mu_k, double rho) {
  if (!(mu_j > 0.0 && mu_j < 1.0 && mu_k > 0.0 && mu_k < 1.0))
    throw std::invalid_argument("binary means must lie in (0,1)");
  const auto [lo, hi] = binary_correlation_bounds(mu_j, mu_k);
  if (rho < lo || rho > hi) return std::numeric_limits<double>::quiet_NaN();
  const double p11 = rho * std::sqrt(mu_j * (1.0 - mu_j) * mu_k * (1.0 - mu_k)) + mu_j * mu_k;
  return solve_latent(mu_j, mu_k, p11);
}

Dataset generate_correlated_binary(std::size_t n, std::size_t s, const CovariateSampler& covariates,
                                   const VectorXd& theta0, double rho, Rng& rng, FeasibilityPolicy policy,
                                   BinaryGenerationStats* stats) {
  if (n == 0 || s == 0) throw ConfigError("n and s must be positive");
  if (s > 1 && !(rho > -1.0 / static_cast<double>(s - 1) && rho < 1.0))
    throw ConfigError("rho outside (-1/(s-1), 1)");
  const std::size_t p = static_cast<std::size_t>(theta0.size());
  Dataset d = empty_design(n, s, p);
  const auto se = static_cast<Eigen::Index>(s);
  VectorXd mu(se);
  MatrixXd latent(se, se);
  VectorXd z(se);
  for (std::size_t i = 0; i < n; ++i) {
    fill_subject_covariates(d, i, covariates, rng);
    const VectorXd eta = d.subject_x(i) * theta0;
    for (Eigen::Index j = 0; j < se; ++j) mu(j) = logistic(eta(j));
    if (!((mu.array() > 0.0).all() && (mu.array() < 1.0).all()))
      throw DomainError("logit mean saturated at 0 or 1 for subject " + std::to_string(i));
    latent.setIdentity();
    for (Eigen::Index a = 0; a < se; ++a) {
      for (Eigen::Index b = a + 1; b < se; ++b) {
        double r = latent_correlation(mu(a), mu(b), rho);
        if (stats) ++stats->total_pairs;
        if (std::isnan(r)) {
          const auto [lo, hi] = binary_correlation_bounds(mu(a), mu(b));
          if (policy == FeasibilityPolicy::strict)
            throw FeasibilityError("binary correlation " + std::to_string(rho) + " infeasible for subject " +
                                       std::to_string(i) + ", positions (" + std::to_string(a) + ", " +
                                       std::to_string(b) + "): Frechet bounds [" + std::to_string(lo) + ", " +
                                       std::to_string(hi) + "]",
                                   i, static_cast<std::size_t>(a), static_cast<std::size_t>(b));
          if (stats) ++stats->clamped_pairs;
          r = latent_correlation(mu(a), mu(b), std::clamp(rho, lo, hi));
        }
        latent(a, b) = latent(b, a) = r;
      }
    }
    Eigen::LLT<MatrixXd> llt(latent);
    if (llt.info() != Eigen::Success) {
      latent = repair_correlation(latent, 1e-6);
      llt.compute(latent);
      if (llt.info() != Eigen::Success) throw SingularMatrixError("latent correlation repair failed");
      if (stats) ++stats->repaired_subjects;
    }
    for (Eigen::Index j = 0; j < se; ++j) z(j) = rng.normal();
    const VectorXd latent_draw = llt.matrixL() * z;
    for (Eigen::Index j = 0; j < se; ++j)
      d.Y(static_cast<Eigen::Index>(i) * se + j) = latent_draw(j) > normal_quantile(1.0 - mu(j)) ? 1.0 : 0.0;
  }
  return d;
}

Dataset generate_longitudinal_gaussian(std::size_t n, std::size_t s, const CovariateSampler& covariates,
                                       const VectorXd& theta0, double rho, double sigma, Rng& rng) {
  if (n == 0 || s == 0) throw ConfigError("n and s must be positive");
  if (!(sigma > 0.0)) throw ConfigError("noise sd must be positive");
  const MatrixXd r = exchangeable_correlation(s, rho);
  Eigen::LLT<MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) throw ConfigError("exchangeable correlation not positive definite");
  const MatrixXd l = llt.matrixL();
  Dataset d = empty_design(n, s, static_cast<std::size_t>(theta0.size()));
  const auto se = static_cast<Eigen::Index>(s);
  VectorXd z(se);
  for (std::size_t i = 0; i < n; ++i) {
    fill_subject_covariates(d, i, covariates, rng);
    for (Eigen::Index j = 0; j < se; ++j) z(j) = rng.normal();
    d.Y.segment(static_cast<Eigen::Index>(i) * se, se) = d.subject_x(i) * theta0 + sigma * (l * z);
  }
  return d;
}

Dataset generate_quantile_data(std::size_t n, std::size_t p, double tau, const VectorXd& theta0,
                               const NoiseSpec& noise, Rng& rng) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0,1)");
  if (theta0.size() != static_cast<Eigen::Index>(p)) throw ConfigError("theta0 length must equal p");
  if (noise.kind == NoiseSpec::Kind::zero || !(noise.scale > 0.0))
    throw ConfigError("quantile data needs non-degenerate noise");
  Dataset d = empty_design(n, 1, p);
  const auto cov = uniform_covariates();
  for (std::size_t i = 0; i < n; ++i) {
    fill_subject_covariates(d, i, cov, rng);
    double e;
    if (noise.kind == NoiseSpec::Kind::normal) {
      e = rng.normal() - normal_quantile(tau);
    } else {
      const double u = rng.uniform() - 0.5;
      e = -(u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
      e -= tau < 0.5 ? std::log(2.0 * tau) : -std::log(2.0 * (1.0 - tau));
    }
    const auto row = static_cast<Eigen::Index>(i);
    d.Y(row) = d.X.row(row).dot(theta0) + noise.scale * e;
  }
  return d;
}

Dataset generate_precision_data(std::size_t n, const MatrixXd& omega0, Rng& rng) {
  if (omega0.rows() != omega0.cols() || omega0.rows() == 0) throw ConfigError("omega0 must be square");
  Eigen::LLT<MatrixXd> llt_omega(omega0);
  if (llt_omega.info() != Eigen::Success) throw SingularMatrixError("omega0 not positive definite");
  const MatrixXd sigma = llt_omega.solve(MatrixXd::Identity(omega0.rows(), omega0.cols()));
  Eigen::LLT<MatrixXd> llt(0.5 * (sigma + sigma.transpose()));
  if (llt.info() != Eigen::Success) throw SingularMatrixError("covariance Cholesky failed");
  const MatrixXd l = llt.matrixL();
  const auto s = static_cast<std::size_t>(omega0.rows());
  Dataset d = empty_design(n, s, 0);
  const auto se = static_cast<Eigen::Index>(s);
  VectorXd z(se);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < se; ++j) z(j) = rng.normal();
    d.Y.segment(static_cast<Eigen::Index>(i) * se, se) = l * z;
  }
  return d;
}

}  // namespace bgmm
