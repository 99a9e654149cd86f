#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "drbm/errors.hpp"
#include "drbm/measures.hpp"
#include "drbm/quadrature.hpp"
#include "drbm/random.hpp"

namespace drbm {

/// (1/pi) ∫_0^R g(r) r^{-beta-1} dr with g(r) = ∫ mu(B(x,r))^2 dx.
inline double gaussian_variance(const BallMassSquareIntegral& g, double beta,
                                double R = std::numeric_limits<double>::infinity()) {
  if (!(beta > 2.0 && beta < 4.0)) throw ConfigError("beta must lie in (2,4)");
  if (!(R > 0.0)) throw ConfigError("truncation radius must be > 0");
  return beta_weighted_g_integral(g, beta, 0.0, R) / kPi;
}

inline double gaussian_variance(const MeasureSpec& mu, double beta,
                                double R = std::numeric_limits<double>::infinity()) {
  return gaussian_variance(BallMassSquareIntegral(mu), beta, R);
}

struct GaussianOracle {
  double variance = 0.0;
  double truncation_R = std::numeric_limits<double>::infinity();
};

inline GaussianOracle make_gaussian_oracle(const MeasureSpec& mu, double beta,
                                           double R = std::numeric_limits<double>::infinity()) {
  return {gaussian_variance(mu, beta, R), R};
}

inline double sample_W(const GaussianOracle& oracle, Rng& rng) {
  if (oracle.variance <= 0.0) return 0.0;
  std::normal_distribution<double> nd(0.0, std::sqrt(oracle.variance));
  return nd(rng);
}

struct PoissonOracleOptions {
  /// 0 selects the cutoff from the atom budget and the certificate.
  double eps = 0.0;
  /// 0 selects the large-radius cutoff from the mean bound; otherwise the
  /// oracle is the R_big-truncated field.
  double R_big = 0.0;
  double max_expected_atoms = 2e4;
  double small_r_variance_fraction = 1e-4;
};

/// Compensated Poisson integral ∫ mu(B(x,r)) (N - EN)(dx,dr) over r in
/// (0, R_big) with intensity (a/pi) r^{-beta-1} dx dr.
///
/// Atoms with r >= eps are simulated exactly on B(0, R_mu + r) x [eps, R_big),
/// which contains every atom that charges mu. The compensated part with r < eps
/// is replaced by an independent centered normal of the same variance.
class PoissonIntegralOracle {
 public:
  PoissonIntegralOracle(const MeasureSpec& mu, double beta, double a, PoissonOracleOptions opt = {})
      : mu_(mu), beta_(beta), a_(a), reach_(mu.support_radius()) {
    if (!(beta > 2.0 && beta < 4.0)) throw ConfigError("beta must lie in (2,4)");
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("a must be > 0");
    if (!(opt.max_expected_atoms > 0.0)) throw ConfigError("max_expected_atoms must be > 0");
    const BallMassSquareIntegral g(mu);
    const double m = mu.total_mass();
    const double full_var = a * gaussian_variance(g, beta);
    if (opt.R_big > 0.0) {
      R_big_ = opt.R_big;
    } else {
      // discarded large-radius mean 2 a m / ((beta-2) R^{beta-2}) <= 1e-3 standard deviations
      R_big_ = std::pow(2.0 * a * m / ((beta - 2.0) * 1e-3 * std::sqrt(full_var)), 1.0 / (beta - 2.0));
      R_big_ = std::max(R_big_, 10.0 * reach_);
    }
    total_variance_ = a * gaussian_variance(g, beta, R_big_);
    const double c_mu = mu.certificate().c_mu;
    const double eps_certificate = std::pow(opt.small_r_variance_fraction * total_variance_ * (4.0 - beta) * kPi /
                                                (a * c_mu), 1.0 / (4.0 - beta));
    if (opt.eps > 0.0) {
      eps_ = opt.eps;
      if (expected_atoms(eps_) > opt.max_expected_atoms)
        throw BudgetError("eps = " + std::to_string(eps_) + " needs ~" + std::to_string(expected_atoms(eps_)) +
                          " atoms per draw (budget " + std::to_string(opt.max_expected_atoms) + "); use a larger eps");
    } else {
      eps_ = std::max(eps_certificate, eps_for_budget(opt.max_expected_atoms));
    }
    if (!(eps_ < R_big_)) throw ConfigError("eps must be below R_big");
    small_r_variance_bound_ = a / kPi * c_mu * std::pow(eps_, 4.0 - beta) / (4.0 - beta);
    small_r_variance_ = a * gaussian_variance(g, beta, eps_);
    compensator_ = a * m * (std::pow(R_big_, 2.0 - beta) - std::pow(eps_, 2.0 - beta)) / (2.0 - beta);
    // radius law of simulated atoms: density ∝ (R_mu + r)^2 r^{-beta-1} = sum of three power laws
    const double rm = reach_;
    weights_[0] = rm * rm * power_mass(beta + 1.0);
    weights_[1] = 2.0 * rm * power_mass(beta);
    weights_[2] = power_mass(beta - 1.0);
    atom_rate_ = a * (weights_[0] + weights_[1] + weights_[2]);
  }

  [[nodiscard]] double a() const { return a_; }
  [[nodiscard]] double beta() const { return beta_; }
  [[nodiscard]] double eps() const { return eps_; }
  [[nodiscard]] double R_big() const { return R_big_; }
  [[nodiscard]] double compensator() const { return compensator_; }
  /// Certificate bound on the variance carried by radii below eps.
  [[nodiscard]] double small_r_variance_bound() const { return small_r_variance_bound_; }
  /// Exact variance carried by radii below eps (drawn as a normal).
  [[nodiscard]] double small_r_variance() const { return small_r_variance_; }
  /// Var of the R_big-truncated field.
  [[nodiscard]] double variance() const { return total_variance_; }
  [[nodiscard]] double expected_atom_count() const { return atom_rate_; }
  [[nodiscard]] const MeasureSpec& measure() const { return mu_; }

  /// Bound on |E| of the part with r >= R_big, which the oracle drops.
  [[nodiscard]] double large_r_mean_bound() const {
    return 2.0 * a_ * mu_.total_mass() / ((beta_ - 2.0) * std::pow(R_big_, beta_ - 2.0));
  }

  [[nodiscard]] double sample(Rng& rng) const {
    std::poisson_distribution<long long> pd(atom_rate_);
    const long long n = pd(rng);
    const double wsum = weights_[0] + weights_[1] + weights_[2];
    double s = 0.0;
    for (long long i = 0; i < n; ++i) {
      const double u = uniform01(rng) * wsum;
      const double p = u < weights_[0] ? beta_ + 1.0 : (u < weights_[0] + weights_[1] ? beta_ : beta_ - 1.0);
      const double r = sample_power(p, rng);
      const double big = reach_ + r;
      const double rad = big * std::sqrt(uniform01(rng));
      const double th = 2.0 * kPi * uniform01(rng);
      s += mu_.ball_mass({rad * std::cos(th), rad * std::sin(th)}, r);
    }
    s -= compensator_;
    if (small_r_variance_ > 0.0) {
      std::normal_distribution<double> nd(0.0, std::sqrt(small_r_variance_));
      s += nd(rng);
    }
    return s;
  }

 private:
  // ∫_eps^{R_big} r^{-p} dr for p > 1
  [[nodiscard]] double power_mass(double p) const {
    return (std::pow(eps_, 1.0 - p) - std::pow(R_big_, 1.0 - p)) / (p - 1.0);
  }

  [[nodiscard]] double sample_power(double p, Rng& rng) const {
    const double lo = std::pow(eps_, 1.0 - p), hi = std::pow(R_big_, 1.0 - p);
    return std::pow(lo + uniform01(rng) * (hi - lo), 1.0 / (1.0 - p));
  }

  [[nodiscard]] double expected_atoms(double eps) const {
    const double b = beta_, rm = reach_;
    auto pm = [&](double p) { return (std::pow(eps, 1.0 - p) - std::pow(R_big_, 1.0 - p)) / (p - 1.0); };
    return a_ * (rm * rm * pm(b + 1.0) + 2.0 * rm * pm(b) + pm(b - 1.0));
  }

  [[nodiscard]] double eps_for_budget(double budget) const {
    double lo = 1e-12 * R_big_, hi = R_big_;
    if (expected_atoms(lo) <= budget) return lo;
    for (int i = 0; i < 200; ++i) {
      const double mid = std::sqrt(lo * hi);
      (expected_atoms(mid) > budget ? lo : hi) = mid;
    }
    return hi;
  }

  MeasureSpec mu_;
  double beta_, a_, reach_;
  double eps_ = 0.0, R_big_ = 0.0;
  double compensator_ = 0.0, small_r_variance_ = 0.0, small_r_variance_bound_ = 0.0, total_variance_ = 0.0;
  double weights_[3] = {0.0, 0.0, 0.0};
  double atom_rate_ = 0.0;
};

inline double sample_P(const PoissonIntegralOracle& oracle, Rng& rng) { return oracle.sample(rng); }

/// ∫_0^∞ (1 - cos r) r^{-1-gamma} dr by quadrature.
///
/// [0,1]: the r^2/2 - r^4/24 part is integrated exactly and the smooth
/// remainder by Gauss-Legendre. [1,∞): ∫ r^{-1-gamma} = 1/gamma exactly, the
/// cosine part over whole periods up to T = 2 pi K and an integration-by-parts
/// series beyond T.
inline double stable_cosine_integral(double gamma, int nodes = 16, int periods = 400) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw ConfigError("gamma must lie in (0,2)");
  const double s = 1.0 + gamma;
  double head = 1.0 / (2.0 * (2.0 - gamma)) - 1.0 / (24.0 * (4.0 - gamma));
  auto rem = [gamma](double r) {
    const double r2 = r * r;
    // 1 - cos r - r^2/2 + r^4/24, series below 0.1 to avoid cancellation
    const double d = r < 0.1 ? -r2 * r2 * r2 / 720.0 + r2 * r2 * r2 * r2 / 40320.0 - std::pow(r2, 5) / 3628800.0
                             : 1.0 - std::cos(r) - r2 / 2.0 + r2 * r2 / 24.0;
    return d * std::pow(r, -1.0 - gamma);
  };
  const std::vector<double> none;
  head += quad::integrate(quad::composite_gauss_legendre(0.0, 1.0, none, nodes, 4), rem);
  const double first_period_end = 2.0 * kPi;
  auto cosine = [s](double r) { return std::cos(r) * std::pow(r, -s); };
  double cos_part = quad::integrate(quad::composite_gauss_legendre(1.0, first_period_end, none, nodes, 2), cosine);
  for (int k = 1; k < periods; ++k)
    cos_part += quad::integrate(quad::gauss_legendre(nodes, 2.0 * kPi * k, 2.0 * kPi * (k + 1)), cosine);
  // J(s) = ∫_T^∞ cos r r^{-s} dr = s T^{-s-1} - s(s+1) J(s+2) at T = 2 pi K
  const double T = 2.0 * kPi * periods;
  double tail = 0.0, coef = 1.0, p = s;
  for (int i = 0; i < 6; ++i) {
    tail += coef * p * std::pow(T, -p - 1.0);
    coef *= -p * (p + 1.0);
    p += 2.0;
  }
  return head + 1.0 / gamma - cos_part - tail;
}

/// Closed form of the same integral: -cos(pi gamma/2) Gamma(2-gamma) / (gamma (gamma-1)).
inline double stable_cosine_integral_closed_form(double gamma) {
  if (!(gamma > 1.0 && gamma < 2.0)) throw ConfigError("closed form used for gamma in (1,2)");
  return -std::cos(kPi * gamma / 2.0) * boost::math::tgamma(2.0 - gamma) / (gamma * (gamma - 1.0));
}

/// sigma_gamma = (pi^{gamma-1} / 2) ∫_0^∞ (1 - cos r) r^{-1-gamma} dr.
inline double sigma_gamma(double gamma) {
  if (!(gamma > 1.0 && gamma < 2.0)) throw ConfigError("gamma must lie in (1,2)");
  return std::pow(kPi, gamma - 1.0) / 2.0 * stable_cosine_integral(gamma);
}

struct StableOracle {
  double gamma = 1.5;
  double sigma_gamma = 0.0;
  double scale = 0.0;
  /// Always +1.
  double skewness = 1.0;
};

inline StableOracle make_stable_oracle(const MeasureSpec& mu, double beta) {
  const double gamma = beta / 2.0;
  if (!(gamma > 1.0 && gamma < 2.0)) throw ConfigError("beta must lie in (2,4)");
  StableOracle o;
  o.gamma = gamma;
  o.sigma_gamma = sigma_gamma(gamma);
  o.scale = std::pow(o.sigma_gamma * mu.density_power_integral(gamma), 1.0 / gamma);
  if (!(o.scale > 0.0)) throw ConfigError("stable scale must be > 0; mu needs a density");
  return o;
}

/// Totally skewed gamma-stable draw with
/// log E e^{i theta Z} = -scale^gamma |theta|^gamma (1 - i tan(pi gamma/2) sign theta),
/// by the Chambers-Mallows-Stuck transformation.
inline double sample_Z(const StableOracle& oracle, Rng& rng) {
  const double al = oracle.gamma, sk = oracle.skewness;
  const double t = sk * std::tan(kPi * al / 2.0);
  const double b = std::atan(t) / al;
  const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * al));
  const double v = kPi * (uniform01(rng) - 0.5);
  double w = 0.0;
  do {
    w = -std::log(uniform01(rng));
  } while (!(w > 0.0));
  const double x = s * std::sin(al * (v + b)) / std::pow(std::cos(v), 1.0 / al) *
                   std::pow(std::cos(v - al * (v + b)) / w, (1.0 - al) / al);
  return oracle.scale * x;
}

}  // namespace drbm
