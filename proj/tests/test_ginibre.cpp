#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <algorithm>
#include <complex>
#include <vector>

#include "drbm/ginibre.hpp"

using namespace drbm;

namespace {

struct CountStats {
  double mean = 0.0;
  double var = 0.0;
};

template <class F>
CountStats count_stats(int reps, F&& count_of) {
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double n = count_of(i);
    s += n;
    s2 += n * n;
  }
  const double m = s / reps;
  return {m, (s2 - reps * m * m) / (reps - 1)};
}

// Exact count law of the Ginibre process in B(0, L): independent Bernoulli(P(Gamma_k <= c L^2)).
CountStats exact_disk_count(double c, double L) {
  CountStats out;
  for (int k = 1; k < 100000; ++k) {
    const double p = boost::math::gamma_p(static_cast<double>(k), c * L * L);
    out.mean += p;
    out.var += p * (1.0 - p);
    if (k > c * L * L && p < 1e-17) break;
  }
  return out;
}

}  // namespace

TEST(Kernel, DiagonalAndSymmetry) {
  EXPECT_NEAR(kernel_eval(1.0, {0, 0}, {0, 0}).real(), 1.0 / kPi, 1e-15);
  for (double c : {0.5, 3.0, 200.0}) {
    const PlanePoint x{0.3, -1.2};
    const auto k = kernel_eval(c, x, x);
    EXPECT_NEAR(k.real(), c / kPi, 1e-13 * c);
    EXPECT_NEAR(k.imag(), 0.0, 1e-13 * c);
  }
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double c = 0.1 + 10.0 * uniform01(rng);
    const PlanePoint x{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
    const PlanePoint y{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
    const auto kxy = kernel_eval(c, x, y);
    EXPECT_NEAR(std::norm(kxy), std::pow(c / kPi, 2) * std::exp(-c * (x - y).norm()), 1e-12 * std::pow(c / kPi, 2));
    const auto kyx = kernel_eval(c, y, x);
    EXPECT_NEAR(std::abs(kyx - std::conj(kxy)), 0.0, 1e-13 * c);
    // direct form (c/pi) exp(-(c/2)(|x|^2 + |y|^2) + c x conj(y))
    const std::complex<double> zx{x.re, x.im}, zy{y.re, y.im};
    const auto direct = c / kPi * std::exp(-0.5 * c * (x.norm() + y.norm()) + c * zx * std::conj(zy));
    EXPECT_NEAR(std::abs(kxy - direct), 0.0, 1e-12 * c);
  }
  // far points: modulus underflows to zero instead of overflowing
  EXPECT_EQ(kernel_eval(1e4, {100.0, 0.0}, {-100.0, 0.0}), std::complex<double>(0.0, 0.0));
  EXPECT_TRUE(std::isfinite(std::abs(kernel_eval(1e4, {100.0, 0.0}, {100.0, 0.001}))));
}

TEST(Kernel, PairCorrelationClosedForm) {
  EXPECT_DOUBLE_EQ(pair_correlation_theoretical(5.0, 0.0), 0.0);
  EXPECT_NEAR(pair_correlation_theoretical(1.0, 1.0), 0.6321205588285577, 1e-15);
  EXPECT_NEAR(pair_correlation_theoretical(1e8, 0.01), 1.0, 1e-15);
  // 1 - |K(x,y)|^2 / (K(x,x) K(y,y))
  const PlanePoint x{0.2, 0.1}, y{0.5, -0.3};
  const double c = 2.5;
  const double g = 1.0 - std::norm(kernel_eval(c, x, y)) / std::pow(c / kPi, 2);
  EXPECT_NEAR(g, pair_correlation_theoretical(c, distance(x, y)), 1e-14);
}

TEST(MatrixOrder, RequiredOrderControlsMissingMass) {
  for (auto [c, L] : std::vector<std::pair<double, double>>{{kPi, 1.0}, {100.0, 2.0}, {50.0, 1.8}, {10.0, 3.0}}) {
    const int n = required_matrix_order(c, L);
    EXPECT_GE(n, static_cast<int>(std::ceil(c * L * L)));
    EXPECT_LT(missing_point_mass(c, L, n), kMissingPointTolerance);
    if (n > static_cast<int>(std::ceil(c * L * L))) {
      EXPECT_GE(missing_point_mass(c, L, n - 1), kMissingPointTolerance);
    }
  }
}

TEST(MatrixOrder, RefusesSmallOrBudgetBreakingOrders) {
  GinibreConfig cfg;
  cfg.c = 100.0;
  cfg.matrix_order = 50;
  EXPECT_THROW(sample_ginibre(cfg, Window::disk(2.0), 1), ConfigError);
  cfg.matrix_order = 0;
  cfg.c = 2000.0;
  EXPECT_THROW(sample_ginibre(cfg, Window::disk(2.0), 1), BudgetError);
  cfg.c = -1.0;
  EXPECT_THROW(sample_ginibre(cfg, Window::disk(2.0), 1), ConfigError);
  cfg.c = 1.0;
  cfg.alpha = 0.0;
  EXPECT_THROW(sample_ginibre(cfg, Window::disk(2.0), 1), ConfigError);
  cfg.alpha = 1.5;
  EXPECT_THROW(sample_ginibre(cfg, Window::disk(2.0), 1), ConfigError);
}

TEST(GinibreSampler, DeterministicForSeed) {
  GinibreConfig cfg;
  cfg.c = 20.0;
  const auto w = Window::rectangle(-1.0, 1.0, -0.5, 1.5);
  const auto a = sample_ginibre(cfg, w, 99), b = sample_ginibre(cfg, w, 99), d = sample_ginibre(cfg, w, 100);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
  EXPECT_NE(a.size() == d.size() && a.points == d.points, true);
  for (const auto& p : a.points) EXPECT_TRUE(w.contains(p));
}

TEST(GinibreSampler, MeanCountUnitDisk) {
  GinibreConfig cfg;
  cfg.c = kPi;
  const auto w = Window::disk(1.0);
  const int reps = 10000;
  const auto st = count_stats(reps, [&](int i) { return static_cast<double>(sample_ginibre(cfg, w, stream_seed(1, 0, i)).size()); });
  EXPECT_NEAR(st.mean, kPi, 4.0 * std::sqrt(st.var / reps));
}

TEST(GinibreSampler, MeanCountAndVarianceMatchExactLaw) {
  GinibreConfig cfg;
  cfg.c = 100.0;
  const auto w = Window::disk(2.0);
  const int reps = 200;
  const auto st = count_stats(reps, [&](int i) { return static_cast<double>(sample_ginibre(cfg, w, stream_seed(2, 0, i)).size()); });
  const auto exact = exact_disk_count(100.0, 2.0);
  EXPECT_NEAR(exact.mean, 400.0, 1e-9);
  EXPECT_NEAR(st.mean, 400.0, 4.0 * std::sqrt(exact.var / reps));
  // under-dispersion: Poisson would have variance 400
  EXPECT_LT(st.var, st.mean);
  // sample variance of a near-normal count: sd of s^2 is about var sqrt(2/(n-1))
  EXPECT_NEAR(st.var, exact.var, 4.0 * exact.var * std::sqrt(2.0 / (reps - 1)));
}

TEST(GinibreSampler, BackendsAgreeInLaw) {
  const auto w = Window::disk(1.0);
  const auto exact = exact_disk_count(20.0, 1.0);
  const int reps = 2000;
  for (auto backend : {GinibreBackend::hessenberg, GinibreBackend::dense}) {
    GinibreConfig cfg;
    cfg.c = 20.0;
    cfg.backend = backend;
    const auto st = count_stats(reps, [&](int i) { return static_cast<double>(sample_ginibre(cfg, w, stream_seed(3, 0, i)).size()); });
    EXPECT_NEAR(st.mean, exact.mean, 4.0 * std::sqrt(exact.var / reps));
    EXPECT_NEAR(st.var, exact.var, 4.0 * exact.var * std::sqrt(2.0 / (reps - 1)));
  }
}

TEST(GinibreSampler, RadialBackendMatchesExactLaw) {
  const double c = 30.0, L = 1.5;
  const auto exact = exact_disk_count(c, L);
  const int reps = 4000;
  const auto st = count_stats(reps, [&](int i) { return static_cast<double>(sample_ginibre_moduli(c, L, stream_seed(4, 0, i)).size()); });
  EXPECT_NEAR(st.mean, exact.mean, 4.0 * std::sqrt(exact.var / reps));
  EXPECT_NEAR(st.var, exact.var, 4.0 * exact.var * std::sqrt(2.0 / (reps - 1)));
  // count inside a smaller disk from the same moduli
  const auto inner = exact_disk_count(c, 0.7);
  const auto st_in = count_stats(reps, [&](int i) {
    const auto m = sample_ginibre_moduli(c, L, stream_seed(4, 0, i));
    return static_cast<double>(std::count_if(m.begin(), m.end(), [](double r) { return r <= 0.7; }));
  });
  EXPECT_NEAR(st_in.mean, inner.mean, 4.0 * std::sqrt(inner.var / reps));
}

TEST(GinibreSampler, AlphaThinningPreservesDensity) {
  const auto w = Window::disk(1.0);
  const int reps = 3000;
  for (double alpha : {0.25, 0.5, 1.0}) {
    GinibreConfig cfg;
    cfg.c = 10.0;
    cfg.alpha = alpha;
    const auto st = count_stats(reps, [&](int i) { return static_cast<double>(sample_ginibre(cfg, w, stream_seed(5, 0, i)).size()); });
    EXPECT_NEAR(st.mean, 10.0, 4.0 * std::sqrt(st.var / reps)) << alpha;
    const auto rad = count_stats(reps, [&](int i) {
      return static_cast<double>(sample_ginibre_moduli(10.0, 1.0, stream_seed(6, 0, i), alpha).size());
    });
    EXPECT_NEAR(rad.mean, 10.0, 4.0 * std::sqrt(rad.var / reps)) << alpha;
  }
}

TEST(PoissonSampler, CountMoments) {
  const int reps = 20000;
  const auto disk = Window::disk(1.0);
  auto st = count_stats(reps, [&](int i) { return static_cast<double>(sample_poisson(1.0 / kPi, disk, stream_seed(7, 0, i)).size()); });
  EXPECT_NEAR(st.mean, 1.0, 4.0 / std::sqrt(reps));
  const auto rect = Window::rectangle(0.0, 2.0, 0.0, 1.0);
  st = count_stats(reps, [&](int i) { return static_cast<double>(sample_poisson(10.0, rect, stream_seed(8, 0, i)).size()); });
  EXPECT_NEAR(st.mean, 20.0, 4.0 * std::sqrt(20.0 / reps));
  EXPECT_NEAR(st.var, 20.0, 4.0 * 20.0 * std::sqrt(2.0 / reps));
  const auto pat = sample_poisson(10.0, rect, 3);
  for (const auto& p : pat.points) EXPECT_TRUE(rect.contains(p));
  EXPECT_THROW(sample_poisson(0.0, rect, 1), ConfigError);
}

TEST(PoissonSampler, OverDispersedRelativeToGinibre) {
  const double c = 40.0;
  const auto w = Window::disk(1.0);
  const int reps = 1000;
  GinibreConfig cfg;
  cfg.c = c;
  const auto gin = count_stats(reps, [&](int i) { return static_cast<double>(sample_ginibre(cfg, w, stream_seed(9, 0, i)).size()); });
  const auto poi = count_stats(reps, [&](int i) { return static_cast<double>(sample_poisson(c / kPi, w, stream_seed(9, 1, i)).size()); });
  EXPECT_NEAR(gin.mean, poi.mean, 4.0 * std::sqrt(poi.var / reps));
  EXPECT_GT(poi.var, 2.0 * gin.var);
}

TEST(PairCorrelation, PoissonIsFlat) {
  const auto w = Window::rectangle(0.0, 4.0, 0.0, 4.0);
  std::vector<PointPattern> reps;
  for (int i = 0; i < 300; ++i) reps.push_back(sample_poisson(5.0, w, stream_seed(10, 0, i)));
  const std::vector<double> grid{0.05, 0.2, 0.4, 0.6, 0.8};
  const auto g = pcf_estimate(reps, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(g[k], 1.0, 0.1) << grid[k];
}

TEST(PairCorrelation, GinibreRepulsionAndUnitScale) {
  GinibreConfig cfg;
  cfg.c = 50.0;
  std::vector<PointPattern> reps;
  for (int i = 0; i < 500; ++i) reps.push_back(sample_ginibre(cfg, Window::disk(1.8), stream_seed(11, 0, i)));
  const std::vector<double> small{0.02, 0.035, 0.05};
  const auto g = pcf_estimate(reps, small);
  for (double v : g) EXPECT_LT(v, 0.2);

  GinibreConfig unit;
  unit.c = 1.0;
  std::vector<PointPattern> wide;
  for (int i = 0; i < 500; ++i) wide.push_back(sample_ginibre(unit, Window::disk(4.0), stream_seed(11, 1, i)));
  const auto g1 = pcf_estimate(wide, {1.0});
  EXPECT_NEAR(g1[0], pair_correlation_theoretical(1.0, 1.0), 0.05);
}
