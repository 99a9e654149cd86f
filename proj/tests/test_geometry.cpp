#include <gtest/gtest.h>

#include <cmath>

#include "drbm/geometry.hpp"
#include "drbm/quadrature.hpp"
#include "drbm/random.hpp"

using namespace drbm;

namespace {

// Dart-throwing area of {p in box : pred(p)}.
template <class Pred>
double dart_area(const RectShape& box, Pred pred, int n, std::uint64_t seed) {
  Rng rng(seed);
  long hits = 0;
  for (int i = 0; i < n; ++i) {
    const PlanePoint p{box.xmin + box.width() * uniform01(rng), box.ymin + box.height() * uniform01(rng)};
    hits += pred(p) ? 1 : 0;
  }
  return box.width() * box.height() * static_cast<double>(hits) / n;
}

}  // namespace

TEST(Window, AreaAndContainment) {
  const auto d = Window::disk({1.0, -1.0}, 2.0);
  EXPECT_NEAR(d.area(), 4.0 * kPi, 1e-12);
  EXPECT_TRUE(d.contains({2.0, -1.0}));
  EXPECT_FALSE(d.contains({3.5, -1.0}));
  EXPECT_NEAR(d.circumradius(), std::sqrt(2.0) + 2.0, 1e-12);
  EXPECT_TRUE(d.contains_disk({1.0, -1.0}, 2.0));
  EXPECT_FALSE(d.contains_disk({1.5, -1.0}, 2.0));

  const auto r = Window::rectangle(-1.0, 3.0, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(r.area(), 8.0);
  EXPECT_NEAR(r.circumradius(), std::hypot(3.0, 2.0), 1e-12);
  EXPECT_TRUE(r.contains_disk({1.0, 1.0}, 1.0));
  EXPECT_FALSE(r.contains_disk({1.0, 1.0}, 1.01));
}

TEST(Window, RejectsDegenerateShapes) {
  EXPECT_THROW(Window::disk(0.0), std::invalid_argument);
  EXPECT_THROW(Window::disk(-1.0), std::invalid_argument);
  EXPECT_THROW(Window::rectangle(1.0, 1.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Window::disk({NAN, 0.0}, 1.0), std::invalid_argument);
}

TEST(Geometry, DiskDiskIntersectionLimits) {
  EXPECT_DOUBLE_EQ(disk_disk_intersection(2.0, 1.0, 1.0), 0.0);
  EXPECT_NEAR(disk_disk_intersection(0.0, 1.0, 3.0), kPi, 1e-12);
  EXPECT_NEAR(disk_disk_intersection(0.5, 0.5, 3.0), kPi * 0.25, 1e-12);
  // two unit disks at unit distance: 2pi/3 - sqrt(3)/2
  EXPECT_NEAR(disk_disk_intersection(1.0, 1.0, 1.0), 2.0 * kPi / 3.0 - std::sqrt(3.0) / 2.0, 1e-12);
}

TEST(Geometry, DiskDiskIntersectionMatchesDarts) {
  const struct { double d, r1, r2; } cases[] = {{0.7, 1.0, 0.6}, {1.3, 1.0, 0.5}, {0.2, 0.4, 1.0}, {1.9, 1.2, 1.1}};
  std::uint64_t seed = 11;
  for (const auto& cs : cases) {
    const RectShape box{-cs.r1, cs.r1, -cs.r1, cs.r1};
    const double mc = dart_area(
        box, [&](PlanePoint p) { return p.norm() <= cs.r1 * cs.r1 && distance(p, {cs.d, 0.0}) <= cs.r2; }, 10'000'000,
        seed++);
    EXPECT_NEAR(disk_disk_intersection(cs.d, cs.r1, cs.r2), mc, 1e-3 * kPi * cs.r1 * cs.r1)
        << cs.d << " " << cs.r1 << " " << cs.r2;
  }
}

TEST(Geometry, DiskRectContainmentAndDisjoint) {
  const RectShape big{-10.0, 10.0, -10.0, 10.0};
  EXPECT_NEAR(disk_rect_intersection({1.0, 2.0}, 1.5, big), kPi * 2.25, 1e-12);
  EXPECT_NEAR(disk_rect_intersection({0.0, 0.0}, 1.0, {0.0, 5.0, 0.0, 5.0}), kPi / 4.0, 1e-12);
  EXPECT_NEAR(disk_rect_intersection({0.0, 0.0}, 1.0, {0.0, 5.0, -5.0, 5.0}), kPi / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(disk_rect_intersection({0.0, 0.0}, 1.0, {1.0, 2.0, -1.0, 1.0}), 0.0);
  // rectangle inside the disk
  EXPECT_NEAR(disk_rect_intersection({0.0, 0.0}, 5.0, {-1.0, 2.0, -0.5, 1.0}), 4.5, 1e-12);
}

TEST(Geometry, DiskRectIntersectionMatchesDarts) {
  const RectShape rect{-0.3, 1.1, -0.8, 0.4};
  const struct { PlanePoint c; double r; } cases[] = {
      {{0.0, 0.0}, 0.5}, {{1.0, 0.3}, 0.7}, {{-0.5, -1.0}, 0.6}, {{0.4, -0.2}, 1.2}, {{2.0, 0.0}, 1.0}};
  std::uint64_t seed = 101;
  for (const auto& cs : cases) {
    const RectShape box{cs.c.re - cs.r, cs.c.re + cs.r, cs.c.im - cs.r, cs.c.im + cs.r};
    const double mc = dart_area(
        box,
        [&](PlanePoint p) {
          return distance(p, cs.c) <= cs.r && p.re >= rect.xmin && p.re <= rect.xmax && p.im >= rect.ymin &&
                 p.im <= rect.ymax;
        },
        10'000'000, seed++);
    EXPECT_NEAR(disk_rect_intersection(cs.c, cs.r, rect), mc, 1e-3 * kPi * cs.r * cs.r);
  }
}

TEST(Geometry, TranslatedOverlap) {
  const auto r = Window::rectangle(0.0, 2.0, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(r.translated_overlap({0.5, 0.25}), 1.5 * 0.75);
  EXPECT_DOUBLE_EQ(r.translated_overlap({-0.5, -0.25}), 1.5 * 0.75);
  EXPECT_DOUBLE_EQ(r.translated_overlap({3.0, 0.0}), 0.0);
  const auto d = Window::disk(1.0);
  EXPECT_NEAR(d.translated_overlap({0.0, 0.0}), kPi, 1e-12);
  EXPECT_NEAR(d.translated_overlap({0.6, 0.8}), disk_disk_intersection(1.0, 1.0, 1.0), 1e-12);
}

TEST(Quadrature, GaussLegendreExactForPolynomials) {
  for (int n : {1, 2, 5, 12, 40}) {
    const auto rule = quad::gauss_legendre(n, -1.0, 2.0);
    for (int k = 0; k < 2 * n; ++k) {
      const double exact = (std::pow(2.0, k + 1) - std::pow(-1.0, k + 1)) / (k + 1);
      EXPECT_NEAR(quad::integrate(rule, [k](double x) { return std::pow(x, k); }), exact, 1e-11 * std::max(1.0, exact))
          << n << " " << k;
    }
  }
}

TEST(Quadrature, CompositeAndAdaptiveAgree) {
  auto f = [](double x) { return std::abs(x - 0.3) * std::exp(-x); };
  const double breaks[] = {0.3};
  const double composite = quad::integrate(quad::composite_gauss_legendre(0.0, 2.0, breaks, 10, 4), f);
  const double adaptive = quad::adaptive_piecewise(f, 0.0, 2.0, {0.3});
  // closed form of ∫_0^2 |x - 0.3| e^{-x} dx
  const double exact = (0.3 - 1.0 + std::exp(-0.3)) + (std::exp(-0.3) - 2.7 * std::exp(-2.0));
  EXPECT_NEAR(composite, exact, 1e-12);
  EXPECT_NEAR(adaptive, exact, 1e-12);
}

TEST(Random, StreamsAreReproducibleAndDistinct) {
  EXPECT_EQ(stream_seed(1, 2, 3), stream_seed(1, 2, 3));
  EXPECT_NE(stream_seed(1, 2, 3), stream_seed(1, 2, 4));
  EXPECT_NE(stream_seed(1, 2, 3), stream_seed(1, 3, 3));
  EXPECT_NE(stream_seed(1, 2, 3), stream_seed(2, 2, 3));
  auto a = make_rng(7, 1, 2), b = make_rng(7, 1, 2);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  auto u = make_rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = uniform01(u);
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
}
