#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "drbm/ginibre.hpp"
#include "drbm/radius_law.hpp"
#include "drbm/random.hpp"

namespace drbm {

struct MarkedItem {
  PlanePoint center;
  double radius = 0.0;
};

struct MarkedPattern {
  std::vector<MarkedItem> items;
  double rho = 1.0;
  PointPattern source;
};

/// Attaches radius rho * r, r ~ law, to each point independently.
inline MarkedPattern mark_pattern(const PointPattern& pattern, const RadiusLaw& law, double rho, Rng& rng) {
  if (!(rho > 0.0)) throw ConfigError("rho must be > 0");
  MarkedPattern out;
  out.rho = rho;
  out.source = pattern;
  out.items.reserve(pattern.size());
  for (const auto& p : pattern.points) {
    double r = 0.0;
    // r = 0 has probability 2^-53; redraw so radii stay strictly positive
    while (r <= 0.0) r = law.sample(rng);
    out.items.push_back({p, rho * r});
  }
  return out;
}

inline MarkedPattern mark_pattern(const PointPattern& pattern, const RadiusLaw& law, double rho, std::uint64_t seed) {
  Rng rng(seed);
  return mark_pattern(pattern, law, rho, rng);
}

/// First-order intensity of the marked process at (x, r): (c/pi) f(r/rho)/rho.
inline double marked_kernel_diag(const RadiusLaw& law, double rho, double c, PlanePoint /*x*/, double r) {
  return c / kPi * law.scaled_density(r, rho);
}

}  // namespace drbm
