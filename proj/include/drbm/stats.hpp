#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "drbm/errors.hpp"
#include "drbm/geometry.hpp"
#include "drbm/ginibre.hpp"

namespace drbm {

struct KSReport {
  double statistic = 0.0;
  std::size_t n1 = 0, n2 = 0;
  double p_value = 1.0;
  double level = 0.01;
  bool pass = true;
};

/// Asymptotic Kolmogorov survival function Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2).
inline double kolmogorov_survival(double t) {
  if (t <= 0.0) return 1.0;
  if (t < 0.2) return 1.0;  // Q(0.2) = 1 - 1e-11
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

namespace detail {

inline double ks_p_value(double d, double n_eff) {
  const double sq = std::sqrt(n_eff);
  return kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
}

inline void require_nondegenerate(const std::vector<double>& a, const char* name) {
  if (a.empty()) throw ConfigError(std::string(name) + " is empty");
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  if (*lo == *hi) throw ConfigError(std::string(name) + " is constant; KS is undefined");
  for (double x : a)
    if (!std::isfinite(x)) throw ConfigError(std::string(name) + " contains non-finite values");
}

}  // namespace detail

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
inline KSReport ks_two_sample(std::vector<double> a, std::vector<double> b, double level = 0.01) {
  if (a.size() < 50 || b.size() < 50) throw ConfigError("ks_two_sample needs at least 50 samples per side");
  detail::require_nondegenerate(a, "first sample");
  detail::require_nondegenerate(b, "second sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  KSReport r;
  r.statistic = d;
  r.n1 = a.size();
  r.n2 = b.size();
  r.level = level;
  r.p_value = d == 0.0 ? 1.0 : detail::ks_p_value(d, na * nb / (na + nb));
  r.pass = r.p_value >= level;
  return r;
}

/// One-sample KS test against a continuous CDF.
inline KSReport ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf, double level = 0.01) {
  if (a.size() < 50) throw ConfigError("ks_one_sample needs at least 50 samples");
  detail::require_nondegenerate(a, "sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  KSReport r;
  r.statistic = d;
  r.n1 = a.size();
  r.level = level;
  r.p_value = detail::ks_p_value(d, n);
  r.pass = r.p_value >= level;
  return r;
}

inline double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// Holm step-down: entry i is true when hypothesis i is rejected at family-wise level `level`.
inline std::vector<bool> holm_reject(const std::vector<double>& p_values, double level = 0.01) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return p_values[x] < p_values[y]; });
  std::vector<bool> reject(m, false);
  for (std::size_t k = 0; k < m; ++k) {
    if (p_values[order[k]] > level / static_cast<double>(m - k)) break;
    reject[order[k]] = true;
  }
  return reject;
}

struct SampleMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  [[nodiscard]] double standard_error() const { return std::sqrt(variance / static_cast<double>(n)); }
};

/// Mean, unbiased variance and the moment skewness m3 / m2^{3/2}.
inline SampleMoments sample_moments(const std::vector<double>& x) {
  if (x.size() < 2) throw ConfigError("sample_moments needs at least two samples");
  SampleMoments s;
  s.n = x.size();
  const double n = static_cast<double>(x.size());
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  s.variance = m2 / (n - 1.0);
  m2 /= n;
  m3 /= n;
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return s;
}

/// K_c(r) = pi r^2 - (pi/c)(1 - e^{-c r^2}).
inline double k_theoretical(double c, double r) {
  if (!(c > 0.0)) throw ConfigError("c must be > 0");
  if (!(r >= 0.0)) throw ConfigError("r must be >= 0");
  return kPi * r * r - kPi / c * -std::expm1(-c * r * r);
}

struct KFunctionEstimate {
  std::vector<double> r_grid;
  std::vector<double> k_hat;
  /// Standard error of k_hat across replicates; NaN where too few pairs contribute.
  std::vector<double> band;
  std::size_t replicates = 0;
};

inline constexpr std::size_t kMinKReplicates = 200;

/// Translation-corrected K-function per replicate, with the known density
/// c/pi, averaged over replicates.
inline KFunctionEstimate ripley_k_estimate(const std::vector<PointPattern>& patterns, const std::vector<double>& r_grid) {
  if (patterns.size() < kMinKReplicates)
    throw ConfigError("ripley_k_estimate needs at least " + std::to_string(kMinKReplicates) + " replicates");
  if (r_grid.empty() || !std::is_sorted(r_grid.begin(), r_grid.end()) || r_grid.front() < 0.0)
    throw ConfigError("r_grid must be nonempty, nonnegative and sorted");
  const std::size_t nr = r_grid.size();
  const double rmax = r_grid.back();
  std::vector<double> sum(nr, 0.0), sum2(nr, 0.0);
  std::vector<std::size_t> pair_count(nr, 0);
  std::vector<double> acc(nr);
  for (const auto& pat : patterns) {
    if (rmax > 0.5 * pat.window.circumradius())
      throw ConfigError("max r exceeds a quarter of the window diameter");
    const double lambda = pat.intensity();
    std::fill(acc.begin(), acc.end(), 0.0);
    auto pts = pat.points;
    std::sort(pts.begin(), pts.end(), [](const PlanePoint& p, const PlanePoint& q) { return p.re < q.re; });
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size() && pts[j].re - pts[i].re <= rmax; ++j) {
        const PlanePoint v{pts[j].re - pts[i].re, pts[j].im - pts[i].im};
        const double d = v.abs();
        if (d > rmax) continue;
        const double w = 2.0 / pat.window.translated_overlap(v);
        const auto k = static_cast<std::size_t>(std::lower_bound(r_grid.begin(), r_grid.end(), d) - r_grid.begin());
        acc[k] += w;
        ++pair_count[k];
      }
    double run = 0.0;
    for (std::size_t k = 0; k < nr; ++k) {
      run += acc[k];
      const double kr = run / (lambda * lambda);
      sum[k] += kr;
      sum2[k] += kr * kr;
    }
  }
  const double n = static_cast<double>(patterns.size());
  KFunctionEstimate out;
  out.r_grid = r_grid;
  out.replicates = patterns.size();
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < nr; ++k) {
    pairs += pair_count[k];
    const double m = sum[k] / n;
    out.k_hat.push_back(m);
    const double var = std::max(0.0, (sum2[k] / n - m * m) * n / (n - 1.0));
    out.band.push_back(pairs < 10 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(var / n));
  }
  return out;
}

/// Tail index from the log-survival regression over the empirical upper
/// quantile window [q_lo, q_hi]: minus the least-squares slope of
/// log(i/n) against log x_(i) for the i-th largest samples in the window.
inline double tail_index_estimate(std::vector<double> samples, double q_lo = 0.99, double q_hi = 0.9999) {
  if (!(q_lo < q_hi && q_lo > 0.0 && q_hi < 1.0)) throw ConfigError("quantile window must satisfy 0 < q_lo < q_hi < 1");
  std::sort(samples.begin(), samples.end(), std::greater<>());
  const double n = static_cast<double>(samples.size());
  const auto i_lo = static_cast<std::size_t>(std::ceil((1.0 - q_hi) * n));
  const auto i_hi = static_cast<std::size_t>(std::floor((1.0 - q_lo) * n));
  if (i_hi < i_lo + 20) throw ConfigError("too few tail points in the quantile window; need more samples");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, m = 0.0;
  for (std::size_t i = std::max<std::size_t>(i_lo, 1); i <= i_hi; ++i) {
    const double x = samples[i - 1];
    if (!(x > 0.0)) throw ConfigError("quantile window reaches nonpositive samples");
    const double lx = std::log(x), ly = std::log(static_cast<double>(i) / n);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    m += 1.0;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return -slope;
}

/// Estimates above this are reported as "no heavy tail"; admissible indices lie below 4.
inline constexpr double kHeavyTailCeiling = 4.0;

}  // namespace drbm
