#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <vector>

#include "drbm/ginibre.hpp"
#include "drbm/mass_field.hpp"
#include "drbm/quadrature.hpp"

using namespace drbm;

namespace {

const MeasureSpec kUnitDisk = MeasureSpec::uniform_disk({0.0, 0.0}, 1.0, kPi);

MarkedPattern marked_ginibre(double c, double window_radius, double rho, const RadiusLaw& law, std::uint64_t seed) {
  GinibreConfig cfg;
  cfg.c = c;
  const auto pat = sample_ginibre(cfg, Window::disk(window_radius), seed);
  return mark_pattern(pat, law, rho, splitmix64(seed + 17));
}

// Lebesgue measure of B(d, r) ∩ B(0, 1).
double unit_lens(double d, double r) { return disk_disk_intersection(d, r, 1.0); }

// Moments of M^R for the unit-density unit disk under a determinantal
// process with |K(x,y)|^2 = (c/pi)^2 exp(-c|x-y|^2):
//   mean = (c/pi) ∫ H,  H(d) = E_r[|B(d,r) ∩ D| 1{r<R}]
//   var  = (c/pi) ∫ E_r[h^2] - ∫∫ |K|^2 H(x) H(y)
struct ExactMoments {
  double mean = 0.0;
  double poisson_var = 0.0;
  double dpp_var = 0.0;
};

ExactMoments exact_moments(double c, double rho, double R, const RadiusLaw& law) {
  auto f = [&](double r) { return law.scaled_density(r, rho); };
  auto H = [&](double d) {
    auto g = [&](double r) { return unit_lens(d, r) * f(r); };
    return quad::adaptive_piecewise(g, 0.0, R, {rho * law.r0(), std::abs(1.0 - d), 1.0 + d}, 1e-12);
  };
  auto H2 = [&](double d) {
    auto g = [&](double r) { return std::pow(unit_lens(d, r), 2) * f(r); };
    return quad::adaptive_piecewise(g, 0.0, R, {rho * law.r0(), std::abs(1.0 - d), 1.0 + d}, 1e-12);
  };
  const double reach = 1.0 + R;
  const std::vector<double> breaks{1.0};
  const auto rule = quad::composite_gauss_legendre(0.0, reach, breaks, 16, 40);
  std::vector<double> h(rule.size());
  ExactMoments out;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double s = rule.nodes[i];
    h[i] = H(s);
    out.mean += rule.weights[i] * 2.0 * kPi * s * h[i];
    out.poisson_var += rule.weights[i] * 2.0 * kPi * s * H2(s);
  }
  out.mean *= c / kPi;
  out.poisson_var *= c / kPi;
  double cross = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i)
    for (std::size_t j = 0; j < rule.size(); ++j) {
      const double s = rule.nodes[i];
      const double t = rule.nodes[j];
      const double z = 2.0 * c * s * t;
      const double ker = std::exp(-c * (s - t) * (s - t) - z) * boost::math::cyl_bessel_i(0, z);
      cross += rule.weights[i] * rule.weights[j] * s * t * h[i] * h[j] * ker;
    }
  out.dpp_var = out.poisson_var - c * c * 4.0 * cross;
  return out;
}

struct MomentEstimate {
  double mean = 0.0, var = 0.0, n = 0.0;
  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    var += d * (x - mean);
  }
  [[nodiscard]] double variance() const { return var / (n - 1.0); }
};

}  // namespace

TEST(MassField, ExpectedMassValues) {
  const RadiusLaw law(3.0, 1.0);
  const auto mu = MeasureSpec::uniform_disk({0.0, 0.0}, 1.0, 1.0);
  EXPECT_NEAR(expected_mass(mu, law, kPi, 1.0), kPi * 11.0 / 9.0, 1e-13);
  // E / (c rho^2) does not depend on rho
  for (double rho : {0.01, 0.3, 2.0})
    EXPECT_NEAR(expected_mass(mu, law, kPi, rho) / (kPi * rho * rho), 11.0 / 9.0, 1e-13);
  EXPECT_NEAR(expected_mass(kUnitDisk, law, 2.0, 0.5), 2.0 * 0.25 * 11.0 / 9.0 * kPi, 1e-13);
}

TEST(MassField, TruncatedMeanMatchesQuadrature) {
  const RadiusLaw law(3.0, 1.0);
  for (double rho : {0.1, 1.0})
    for (double R : {0.05, 0.5, 3.0, 40.0}) {
      auto g = [&](double r) { return kPi * r * r * law.scaled_density(r, rho); };
      const double mass = 2.0, c = 5.0;
      const auto mu = MeasureSpec::uniform_disk({1.0, 2.0}, 0.5, mass);
      const double num = c / kPi * mass * quad::adaptive_piecewise(g, 0.0, R, {rho}, 1e-13);
      EXPECT_NEAR(truncated_expected_mass(mu, law, c, rho, R), num, 1e-10 * std::max(1.0, num)) << rho << " " << R;
    }
  EXPECT_DOUBLE_EQ(truncated_expected_mass(kUnitDisk, law, 3.0, 0.2, kNoTruncation),
                   expected_mass(kUnitDisk, law, 3.0, 0.2));
}

TEST(MassField, TruncationBiasBound) {
  const RadiusLaw law(3.0, 1.0);
  const auto mu = MeasureSpec::uniform_disk({0.0, 0.0}, 1.0, 1.0);
  // c rho^3 = 1, C_f = 1, mass 1
  EXPECT_NEAR(truncation_bias_bound(mu, law, 1.0, 1.0, 10.0), 0.1, 1e-15);
  EXPECT_NEAR(truncation_bias_bound(mu, law, 1.0, 1.0, 20.0), 0.05, 1e-15);
  EXPECT_THROW(truncation_bias_bound(mu, law, 1.0, 1.0, 0.5), ConfigError);
  for (double beta : {2.5, 3.0, 3.7})
    for (double rho : {0.05, 0.5})
      for (double R : {0.1, 1.0, 10.0}) {
        const RadiusLaw lb(beta, 1.0);
        if (R <= rho) continue;
        const double gap = expected_mass(mu, lb, 7.0, rho) - truncated_expected_mass(mu, lb, 7.0, rho, R);
        const double bound = truncation_bias_bound(mu, lb, 7.0, rho, R);
        EXPECT_GE(gap, 0.0);
        EXPECT_LE(gap, bound * (1.0 + 1e-12));
        // the bound is the exact pure-tail gap
        EXPECT_NEAR(gap, bound, 1e-10 * bound);
      }
}

TEST(MassField, FieldValueElementaryCases) {
  const RadiusLaw law(3.0, 1.0);
  MarkedPattern empty;
  empty.source.window = Window::disk(5.0);
  EXPECT_EQ(field_value(empty, kUnitDisk, 3.0), 0.0);

  MarkedPattern one = empty;
  one.items.push_back({{0.2, -0.1}, 2.0});
  EXPECT_NEAR(field_value(one, kUnitDisk, 3.0), kPi, 1e-12);
  // the item's radius reaches the cap and is dropped
  EXPECT_EQ(field_value(one, kUnitDisk, 2.0), 0.0);
  one.items.push_back({{3.5, 0.0}, 0.4});
  EXPECT_NEAR(field_value(one, kUnitDisk, 3.0), kPi, 1e-12);
}

TEST(MassField, RefusesWindowsWithEdgeLoss) {
  MarkedPattern p;
  p.source.window = Window::disk(3.0);
  EXPECT_NO_THROW(field_value(p, kUnitDisk, 2.0));
  try {
    (void)field_value(p, kUnitDisk, 2.5);
    FAIL() << "edge loss accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("B(0, R_mu + R)"), std::string::npos);
  }
  EXPECT_THROW(field_value(p, kUnitDisk, kNoTruncation), ConfigError);
  EXPECT_THROW(field_value(p, kUnitDisk, 0.0), ConfigError);
}

TEST(MassField, MonotoneInTruncationAndLinearInMeasure) {
  const RadiusLaw law(3.0, 1.0);
  const auto mu2 = MeasureSpec::gaussian_bump({0.3, -0.2}, 0.2, 1.5);
  const auto mix = MeasureSpec::linear_combination({{2.0, kUnitDisk}, {0.5, mu2}});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = marked_ginibre(10.0, 6.0, 0.4, law, seed);
    double prev = 0.0;
    for (double R : {0.1, 0.5, 1.0, 2.0, 4.0}) {
      const double v = field_value(m, kUnitDisk, R);
      EXPECT_GE(v, prev);
      prev = v;
    }
    const double a = field_value(m, kUnitDisk, 4.0), b = field_value(m, mu2, 4.0);
    EXPECT_NEAR(field_value(m, mix, 4.0), 2.0 * a + 0.5 * b, 1e-12 * (2.0 * a + 0.5 * b));
  }
}

TEST(MassField, RadialRouteMatchesPlanarRoute) {
  const RadiusLaw law(3.0, 1.0);
  const auto mu = MeasureSpec::linear_combination(
      {{1.0, kUnitDisk}, {1.0, MeasureSpec::gaussian_bump({0.0, 0.0}, 0.3, 2.0)}});
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto m = marked_ginibre(8.0, 5.0, 0.5, law, seed);
    std::vector<double> moduli, radii;
    for (const auto& it : m.items) {
      moduli.push_back(it.center.abs());
      radii.push_back(it.radius);
    }
    EXPECT_NEAR(radial_field_value(moduli, radii, mu, 3.0), field_value(m, mu, 3.0), 1e-10);
  }
  EXPECT_THROW(radial_field_value({}, {}, MeasureSpec::uniform_disk({0.1, 0.0}, 1.0, 1.0), 1.0), ConfigError);
}

// Mean and variance of M^R under Ginibre and Poisson centers against exact
// second-order formulas for the unit-density unit disk.
TEST(MassField, MomentsMatchExactSecondOrderFormulas) {
  const RadiusLaw law(3.0, 1.0);
  const double c = 20.0, rho = 0.5, R = 3.0;
  const auto exact = exact_moments(c, rho, R, law);
  ASSERT_NEAR(exact.mean, truncated_expected_mass(kUnitDisk, law, c, rho, R), 1e-8 * exact.mean);
  ASSERT_LT(exact.dpp_var, exact.poisson_var);

  const int reps = 20000;
  const RadialGinibreSampler sampler(c, 1.0 + R);
  MomentEstimate gin, poi;
  for (int i = 0; i < reps; ++i) {
    const auto moduli = sampler.sample(stream_seed(11, 0, i));
    Rng rng(stream_seed(11, 1, i));
    std::vector<double> radii(moduli.size());
    for (auto& r : radii) r = rho * law.sample(rng);
    gin.add(radial_field_value(moduli, radii, kUnitDisk, R));

    const auto pp = sample_poisson(c / kPi, Window::disk(1.0 + R), stream_seed(11, 2, i));
    const auto mp = mark_pattern(pp, law, rho, stream_seed(11, 3, i));
    poi.add(field_value(mp, kUnitDisk, R));
  }
  for (const auto* est : {&gin, &poi}) {
    const double var = est == &gin ? exact.dpp_var : exact.poisson_var;
    EXPECT_NEAR(est->mean, exact.mean, 4.0 * std::sqrt(var / reps));
    // heavy radius tail is cut at R, so the variance estimate is well behaved
    EXPECT_NEAR(est->variance() / var, 1.0, 0.06) << (est == &gin ? "ginibre" : "poisson");
  }
  EXPECT_LT(gin.variance(), poi.variance());
}

TEST(MassField, FluctuationIsCentered) {
  const RadiusLaw law(3.0, 1.0);
  const double c = 12.0, rho = 0.4, R = 2.0;
  MomentEstimate est;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const auto m = marked_ginibre(c, 1.0 + R, rho, law, stream_seed(5, 0, s));
    est.add(fluctuation(m, kUnitDisk, law, c, rho, R, 2.0).value);
  }
  EXPECT_NEAR(est.mean, 0.0, 4.0 * std::sqrt(est.variance() / est.n));
  MarkedPattern p;
  EXPECT_THROW(fluctuation(p, kUnitDisk, law, c, rho, R, 0.0), ConfigError);
}
