#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "drbm/errors.hpp"
#include "drbm/geometry.hpp"
#include "drbm/lapack.hpp"
#include "drbm/random.hpp"

namespace drbm {

enum class GinibreBackend {
  /// Eigenvalues of a random upper Hessenberg matrix with the Ginibre spectrum law.
  hessenberg,
  /// Eigenvalues of a dense N x N complex Gaussian matrix.
  dense,
};

inline constexpr int kMaxMatrixOrder = 4000;
inline constexpr double kMissingPointTolerance = 1e-3;

struct GinibreConfig {
  double c = 1.0;
  /// Retention probability of the alpha-thinned variant; 1 is plain Ginibre.
  double alpha = 1.0;
  /// 0 selects the smallest admissible order.
  int matrix_order = 0;
  double buffer = 0.0;
  GinibreBackend backend = GinibreBackend::hessenberg;

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("c must be > 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0,1]");
    if (matrix_order < 0) throw ConfigError("matrix_order must be >= 0");
    if (!(buffer >= 0.0)) throw ConfigError("buffer must be >= 0");
  }
};

struct PointPattern {
  std::vector<PlanePoint> points;
  Window window = Window::disk(1.0);
  /// Intensity parameter: the mean density is c/pi.
  double c = 1.0;
  double alpha = 1.0;

  [[nodiscard]] double intensity() const { return c / kPi; }
  [[nodiscard]] std::size_t size() const { return points.size(); }
};

/// Expected number of points of the infinite process in B(0, radius) that a
/// matrix of order n misses: sum_{k > n} P(Gamma(k) <= c radius^2).
inline double missing_point_mass(double c, double radius, int n) {
  const double x = c * radius * radius;
  double s = 0.0;
  for (int k = n + 1;; ++k) {
    const double p = boost::math::gamma_p(static_cast<double>(k), x);
    s += p;
    if (p < 1e-16 * std::max(s, 1e-300) || (k > x && p < 1e-18)) break;
  }
  return s;
}

/// Smallest matrix order N >= c (radius + buffer)^2 with fewer than
/// `tolerance` expected missing points in B(0, radius + buffer).
inline int required_matrix_order(double c, double radius, double buffer = 0.0,
                                 double tolerance = kMissingPointTolerance) {
  const double big = radius + buffer;
  const double x = c * big * big;
  int n = std::max(1, static_cast<int>(std::ceil(x)));
  // missing mass is decreasing in n; bracket then bisect
  int hi = n;
  while (missing_point_mass(c, big, hi) >= tolerance) hi = std::max(hi + 1, static_cast<int>(hi * 1.25));
  int lo = n;
  if (missing_point_mass(c, big, lo) < tolerance) return lo;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (missing_point_mass(c, big, mid) < tolerance ? hi : lo) = mid;
  }
  return hi;
}

namespace detail {

inline std::complex<double> complex_normal(Rng& rng, std::normal_distribution<double>& nd) {
  const double re = nd(rng), im = nd(rng);
  return {re, im};
}

// Spectrum of an order-n Ginibre matrix with E|entry|^2 = 1.
inline std::vector<std::complex<double>> ginibre_spectrum(int n, GinibreBackend backend, Rng& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  if (backend == GinibreBackend::dense) {
    Eigen::MatrixXcd a(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) a(i, j) = complex_normal(rng, nd);
    return lapack::general_eigenvalues(std::move(a));
  }
  // Householder reduction of a Ginibre matrix keeps the entries on and above
  // the diagonal iid and leaves subdiagonal moduli sqrt(Gamma(n-1-j, 1)).
  std::vector<std::complex<double>> h(static_cast<std::size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) h[static_cast<std::size_t>(j) * n + i] = complex_normal(rng, nd);
    if (j + 1 < n) {
      std::gamma_distribution<double> gd(static_cast<double>(n - 1 - j), 1.0);
      h[static_cast<std::size_t>(j) * n + j + 1] = std::sqrt(gd(rng));
    }
  }
  return lapack::hessenberg_eigenvalues(h, n);
}

}  // namespace detail

/// Order the sampler will use for `config` on `window`; throws when the
/// requested order is too small or over budget.
inline int resolve_matrix_order(const GinibreConfig& config, const Window& window) {
  config.validate();
  const double c_eff = config.c / config.alpha;
  const int needed = required_matrix_order(c_eff, window.circumradius(), config.buffer);
  const int n = config.matrix_order == 0 ? needed : config.matrix_order;
  if (n < needed)
    throw ConfigError("matrix_order " + std::to_string(n) + " is below the required " + std::to_string(needed) +
                      " for this window (truncation would bias the pattern near the boundary)");
  if (n > kMaxMatrixOrder)
    throw BudgetError("matrix order " + std::to_string(n) + " exceeds the budget " +
                      std::to_string(kMaxMatrixOrder) + " (N ~ c/alpha * (circumradius + buffer)^2)");
  return n;
}

/// One realization of the Ginibre process with density c/pi restricted to `window`.
///
/// For alpha < 1 the pattern is the alpha-thinned process: a Ginibre pattern
/// with parameter c/alpha, each point kept independently with probability
/// alpha. This equals thinning at c followed by scaling by sqrt(alpha).
inline PointPattern sample_ginibre(const GinibreConfig& config, const Window& window, std::uint64_t seed) {
  const int n = resolve_matrix_order(config, window);
  const double c_eff = config.c / config.alpha;
  Rng rng(seed);
  const auto eig = detail::ginibre_spectrum(n, config.backend, rng);
  Rng thin_rng(splitmix64(seed ^ 0xA5A5A5A5DEADBEEFULL));
  PointPattern out{{}, window, config.c, config.alpha};
  const double scale = 1.0 / std::sqrt(c_eff);
  for (const auto& z : eig) {
    const PlanePoint p{z.real() * scale, z.imag() * scale};
    if (config.alpha < 1.0 && uniform01(thin_rng) >= config.alpha) continue;
    if (window.contains(p)) out.points.push_back(p);
  }
  return out;
}

inline constexpr double kMaxRadialExpectedPoints = 5e6;

/// Index range needed so that the moduli of a Ginibre pattern inside
/// B(0, radius) are all captured (same tolerance as the matrix sampler).
inline int radial_index_count(double c, double radius) {
  const double expected = c * radius * radius;
  if (expected > kMaxRadialExpectedPoints)
    throw BudgetError("radial sampler would need ~" + std::to_string(expected) + " points per replicate");
  return required_matrix_order(c, radius, 0.0, 1e-6);
}

/// Moduli of the points of a Ginibre pattern (density c/pi) inside B(0, radius).
///
/// The set of squared moduli of the infinite process has the law of
/// {Gamma_k / c : k >= 1} with independent Gamma(k, 1) variables, so any
/// rotation-invariant functional can be sampled at O(c radius^2) cost.
/// Thinning with probability alpha is applied on top of parameter c/alpha.
class RadialGinibreSampler {
 public:
  RadialGinibreSampler(double c, double radius, double alpha = 1.0) : c_(c), radius_(radius), alpha_(alpha) {
    if (!(c > 0.0)) throw ConfigError("c must be > 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0,1]");
    if (!(radius > 0.0)) throw ConfigError("radius must be > 0");
    kmax_ = radial_index_count(c / alpha, radius);
  }

  [[nodiscard]] double c() const { return c_; }
  [[nodiscard]] double radius() const { return radius_; }
  [[nodiscard]] int index_count() const { return kmax_; }

  [[nodiscard]] std::vector<double> sample(std::uint64_t seed) const {
    const double c_eff = c_ / alpha_;
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(c_ * radius_ * radius_ * 1.1) + 16);
    const double r2 = radius_ * radius_;
    for (int k = 1; k <= kmax_; ++k) {
      std::gamma_distribution<double> gd(static_cast<double>(k), 1.0);
      const double s = gd(rng) / c_eff;
      const bool keep = alpha_ >= 1.0 || uniform01(rng) < alpha_;
      if (keep && s <= r2) out.push_back(std::sqrt(s));
    }
    return out;
  }

 private:
  double c_, radius_, alpha_;
  int kmax_ = 0;
};

inline std::vector<double> sample_ginibre_moduli(double c, double radius, std::uint64_t seed, double alpha = 1.0) {
  return RadialGinibreSampler(c, radius, alpha).sample(seed);
}

/// Homogeneous Poisson pattern with the given intensity (points per unit area).
inline PointPattern sample_poisson(double intensity, const Window& window, std::uint64_t seed) {
  if (!(intensity > 0.0) || !std::isfinite(intensity)) throw ConfigError("intensity must be > 0");
  Rng rng(seed);
  std::poisson_distribution<long long> pd(intensity * window.area());
  const long long n = pd(rng);
  PointPattern out{{}, window, intensity * kPi, 1.0};
  out.points.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    if (window.is_disk()) {
      const auto& d = window.as_disk();
      const double rad = d.radius * std::sqrt(uniform01(rng));
      const double ang = 2.0 * kPi * uniform01(rng);
      out.points.push_back({d.center.re + rad * std::cos(ang), d.center.im + rad * std::sin(ang)});
    } else {
      const auto& r = window.as_rect();
      const double x = r.xmin + r.width() * uniform01(rng);
      out.points.push_back({x, r.ymin + r.height() * uniform01(rng)});
    }
  }
  return out;
}

/// K_c(x, y) = (c/pi) exp(-(c/2)(|x|^2 + |y|^2) + c x conj(y)), evaluated as
/// (c/pi) exp(-(c/2)|x - y|^2) exp(i c Im(x conj(y))) so it never overflows.
/// Returns 0 once the modulus underflows.
inline std::complex<double> kernel_eval(double c, PlanePoint x, PlanePoint y) {
  const double mod = c / kPi * std::exp(-0.5 * c * (x - y).norm());
  if (mod == 0.0) return {0.0, 0.0};
  const double phase = c * (x.im * y.re - x.re * y.im);
  return std::polar(mod, phase);
}

inline double pair_correlation_theoretical(double c, double r) { return 1.0 - std::exp(-c * r * r); }

/// Kernel-smoothed pair correlation with translation edge correction, pooled
/// over replicates and normalized by the known intensity c/pi.
///
/// Epanechnikov kernel of half-width `bandwidth` (default 0.15/sqrt(intensity)),
/// renormalized by its mass on [0, inf) near r = 0. Empty patterns contribute
/// no pairs.
inline std::vector<double> pcf_estimate(const std::vector<PointPattern>& replicates, const std::vector<double>& r_grid,
                                        double bandwidth = 0.0) {
  if (replicates.empty()) throw std::invalid_argument("pcf_estimate needs at least one replicate");
  const double lambda = replicates.front().intensity();
  const double h = bandwidth > 0.0 ? bandwidth : 0.15 / std::sqrt(lambda);
  const double rmax = *std::max_element(r_grid.begin(), r_grid.end()) + h;
  std::vector<double> acc(r_grid.size(), 0.0);
  for (const auto& pat : replicates) {
    const auto& pts = pat.points;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const PlanePoint z = pts[j] - pts[i];
        const double d = z.abs();
        if (d >= rmax || d == 0.0) continue;
        const double gamma = pat.window.translated_overlap(z);
        if (gamma <= 0.0) continue;
        for (std::size_t k = 0; k < r_grid.size(); ++k) {
          const double u = (r_grid[k] - d) / h;
          if (std::abs(u) >= 1.0) continue;
          // ordered pairs (i, j) and (j, i)
          acc[k] += 2.0 * 0.75 * (1.0 - u * u) / h / (2.0 * kPi * d * gamma);
        }
      }
  }
  std::vector<double> out(r_grid.size());
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    // kernel mass on d >= 0: 1 when r >= h
    const double t = std::min(r_grid[k] / h, 1.0);
    const double mass = 0.5 + 0.75 * (t - t * t * t / 3.0);
    out[k] = acc[k] / (static_cast<double>(replicates.size()) * lambda * lambda * mass);
  }
  return out;
}

}  // namespace drbm
