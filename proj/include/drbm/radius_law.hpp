#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "drbm/geometry.hpp"
#include "drbm/random.hpp"

namespace drbm {

/// Radius density with a flat plateau and an exact power tail:
///   f(r) = c0            on [0, r0)
///   f(r) = r^{-beta-1}   on [r0, inf)
/// with c0 = (1 - r0^{-beta}/beta) / r0, so f integrates to one and
/// f(r) r^{beta+1} = 1 on the tail.
class RadiusLaw {
 public:
  explicit RadiusLaw(double beta = 3.0, double r0 = 1.0) : beta_(beta), r0_(r0) {
    if (!(beta > 2.0 && beta < 4.0))
      throw std::invalid_argument("beta must lie in the admissible range (2,4), got " + std::to_string(beta));
    if (!(r0 > 0.0) || !std::isfinite(r0)) throw std::invalid_argument("r0 must be > 0");
    c0_ = (1.0 - std::pow(r0, -beta) / beta) / r0;
    if (c0_ < 0.0) throw std::invalid_argument("r0 too small: the tail alone carries more than unit mass");
    c_f_ = std::max(1.0, c0_ * std::pow(r0, beta + 1.0));
  }

  [[nodiscard]] double beta() const { return beta_; }
  [[nodiscard]] double r0() const { return r0_; }
  [[nodiscard]] double c0() const { return c0_; }
  /// Global constant with f(r) <= C_f r^{-beta-1}.
  [[nodiscard]] double tail_constant() const { return c_f_; }
  /// Mean ball area pi * E[r^2].
  [[nodiscard]] double mean_volume() const { return kPi * moment(2.0); }

  [[nodiscard]] double density(double r) const {
    if (r < 0.0) return 0.0;
    return r < r0_ ? c0_ : std::pow(r, -beta_ - 1.0);
  }

  [[nodiscard]] double cdf(double r) const {
    if (r <= 0.0) return 0.0;
    return r < r0_ ? c0_ * r : 1.0 - std::pow(r, -beta_) / beta_;
  }

  [[nodiscard]] double survival(double r) const {
    if (r <= 0.0) return 1.0;
    return r < r0_ ? 1.0 - c0_ * r : std::pow(r, -beta_) / beta_;
  }

  [[nodiscard]] double quantile(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return std::numeric_limits<double>::infinity();
    const double plateau = c0_ * r0_;
    if (u < plateau) return u / c0_;
    return std::pow(beta_ * (1.0 - u), -1.0 / beta_);
  }

  [[nodiscard]] double sample(Rng& rng) const { return quantile(uniform01(rng)); }

  /// ∫_0^x r^k f(r) dr in closed form (k > -1; x may be +inf when k < beta).
  [[nodiscard]] double partial_moment(double k, double x) const {
    if (x <= 0.0) return 0.0;
    const double lo = std::min(x, r0_);
    double s = c0_ * std::pow(lo, k + 1.0) / (k + 1.0);
    if (x > r0_) {
      if (std::isinf(x)) {
        if (k >= beta_) return std::numeric_limits<double>::infinity();
        s += std::pow(r0_, k - beta_) / (beta_ - k);
      } else if (std::abs(k - beta_) < 1e-14) {
        s += std::log(x / r0_);
      } else {
        s += (std::pow(x, k - beta_) - std::pow(r0_, k - beta_)) / (k - beta_);
      }
    }
    return s;
  }

  [[nodiscard]] double moment(double k) const { return partial_moment(k, std::numeric_limits<double>::infinity()); }

  /// Density of rho * r: f(r/rho)/rho.
  [[nodiscard]] double scaled_density(double r, double rho) const { return density(r / rho) / rho; }

 private:
  double beta_;
  double r0_;
  double c0_ = 0.0;
  double c_f_ = 1.0;
};

}  // namespace drbm
