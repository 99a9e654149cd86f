#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "drbm/errors.hpp"
#include "drbm/marks.hpp"
#include "drbm/measures.hpp"
#include "drbm/radius_law.hpp"

namespace drbm {

inline constexpr double kNoTruncation = std::numeric_limits<double>::infinity();

struct FieldSample {
  double value = 0.0;
  double rho = 1.0;
  double c = 1.0;
  std::string mu_id;
  double truncation_R = kNoTruncation;
  std::uint64_t seed = 0;
};

struct FluctuationSample {
  double value = 0.0;
  double n_rho = 1.0;
};

/// E[M_rho(mu)] = V mu(C) c rho^2 / pi.
inline double expected_mass(const MeasureSpec& mu, const RadiusLaw& law, double c, double rho) {
  return law.mean_volume() * mu.total_mass() * c * rho * rho / kPi;
}

/// E[M_rho^R(mu)] = (c/pi) ∫ mu(C) pi r^2 1{r < R} f(r/rho)/rho dr, closed form.
inline double truncated_expected_mass(const MeasureSpec& mu, const RadiusLaw& law, double c, double rho, double R) {
  if (std::isinf(R)) return expected_mass(mu, law, c, rho);
  return c * mu.total_mass() * rho * rho * law.partial_moment(2.0, R / rho);
}

/// Upper bound on E[M_rho(mu) - M_rho^R(mu)]: c rho^beta C_f mu(C) / ((beta-2) R^{beta-2}).
inline double truncation_bias_bound(const MeasureSpec& mu, const RadiusLaw& law, double c, double rho, double R) {
  if (!(R > rho * law.r0())) throw ConfigError("truncation_bias_bound needs R > rho * r0");
  const double b = law.beta();
  return c * std::pow(rho, b) * law.tail_constant() * mu.total_mass() / ((b - 2.0) * std::pow(R, b - 2.0));
}

/// Radius of the disk about the origin that must be observed to evaluate
/// M_rho^R(mu) without edge loss.
inline double required_window_radius(const MeasureSpec& mu, double R) { return mu.support_radius() + R; }

/// Sum over items with radius < R of mu(B(center, radius)).
///
/// Every contributing center lies in B(0, R_mu + R); the pattern's window must
/// contain that disk, so the value is exact for the truncated field.
inline double field_value(const MarkedPattern& marked, const MeasureSpec& mu, double R) {
  if (!(R > 0.0)) throw ConfigError("truncation radius must be > 0");
  if (std::isinf(R) || !marked.source.window.contains_disk({0.0, 0.0}, required_window_radius(mu, R)))
    throw ConfigError("window " + marked.source.window.describe() + " does not contain B(0, R_mu + R) = B(0, " +
                      std::to_string(required_window_radius(mu, R)) + "); the truncated field would lose edge mass");
  const double reach = mu.support_radius();
  double s = 0.0;
  for (const auto& it : marked.items) {
    if (it.radius >= R) continue;
    if (it.center.abs() >= reach + it.radius) continue;
    s += mu.ball_mass(it.center, it.radius);
  }
  return s;
}

inline FieldSample field_sample(const MarkedPattern& marked, const MeasureSpec& mu, double R, std::uint64_t seed) {
  return {field_value(marked, mu, R), marked.rho, marked.source.c, mu.describe(), R, seed};
}

/// Truncated field for a rotation-invariant mu from center moduli and radii.
/// Callers provide every center in B(0, R_mu + R).
inline double radial_field_value(const std::vector<double>& moduli, const std::vector<double>& radii,
                                 const MeasureSpec& mu, double R) {
  if (!mu.is_radial()) throw ConfigError("radial_field_value needs a measure invariant under rotations about 0");
  if (moduli.size() != radii.size()) throw std::invalid_argument("moduli and radii differ in length");
  const double reach = mu.support_radius();
  double s = 0.0;
  for (std::size_t i = 0; i < moduli.size(); ++i) {
    const double r = radii[i];
    if (r >= R || moduli[i] >= reach + r) continue;
    s += mu.radial_ball_mass(moduli[i], r);
  }
  return s;
}

/// (field_value - E[M_rho^R(mu)]) / n_rho; the centering matches the truncation.
inline FluctuationSample fluctuation(const MarkedPattern& marked, const MeasureSpec& mu, const RadiusLaw& law,
                                     double c, double rho, double R, double n_rho) {
  if (!(n_rho > 0.0)) throw ConfigError("n_rho must be > 0");
  const double centered = field_value(marked, mu, R) - truncated_expected_mass(mu, law, c, rho, R);
  return {centered / n_rho, n_rho};
}

}  // namespace drbm
