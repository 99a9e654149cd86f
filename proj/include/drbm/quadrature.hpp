#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace drbm::quad {

/// Nodes and weights of a 1-D rule.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
  [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

namespace detail {
// Returns (P_n(x), P_{n-1}(x)).
inline std::pair<double, double> legendre_pair(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}
}  // namespace detail

/// n-point Gauss–Legendre rule on [-1, 1] (Newton iteration on P_n).
inline Rule gauss_legendre_unit(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre needs n >= 1");
  Rule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  if (n == 1) {
    rule.weights[0] = 2.0;
    return rule;
  }
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [pn, pm] = detail::legendre_pair(n, x);
      const double dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = detail::legendre_pair(n, x);
    const double dp = n * (x * pn - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Cached unit rule; safe to call from several threads.
inline const Rule& cached_gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, Rule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre_unit(n)).first;
  return it->second;
}

/// Gauss–Legendre rule mapped to [a, b].
inline Rule gauss_legendre(int n, double a, double b) {
  Rule rule = cached_gauss_legendre(n);
  const double h = 0.5 * (b - a), m = 0.5 * (a + b);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    rule.nodes[i] = m + h * rule.nodes[i];
    rule.weights[i] *= h;
  }
  return rule;
}

/// Composite Gauss–Legendre over [a, b], split at the given interior breakpoints
/// and each resulting piece cut into `panels` equal panels.
inline Rule composite_gauss_legendre(double a, double b, std::span<const double> breaks, int n_per_panel,
                                     int panels = 1) {
  std::vector<double> edges{a};
  for (double x : breaks)
    if (x > a && x < b) edges.push_back(x);
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  const Rule& unit = cached_gauss_legendre(n_per_panel);
  Rule out;
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    const double lo = edges[e], hi = edges[e + 1];
    if (hi <= lo) continue;
    const double step = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double pa = lo + p * step;
      const double h = 0.5 * step, m = pa + h;
      for (std::size_t i = 0; i < unit.size(); ++i) {
        out.nodes.push_back(m + h * unit.nodes[i]);
        out.weights.push_back(h * unit.weights[i]);
      }
    }
  }
  return out;
}

template <class F>
double integrate(const Rule& rule, F&& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weights[i] * f(rule.nodes[i]);
  return s;
}

/// Adaptive Gauss–Kronrod (15-point) on [a, b] with relative tolerance `tol`.
template <class F>
double adaptive(F&& f, double a, double b, double tol = 1e-10, unsigned max_depth = 15) {
  if (b <= a) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, tol);
}

/// Adaptive integral over [a, b] split at breakpoints (kinks of the integrand).
/// `max_depth` caps bisection on pieces whose error estimate is roundoff-limited.
template <class F>
double adaptive_piecewise(F&& f, double a, double b, std::vector<double> breaks, double tol = 1e-10,
                          unsigned max_depth = 10) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]), hi = std::min(b, breaks[i + 1]);
    if (hi > lo) s += adaptive(f, lo, hi, tol, max_depth);
  }
  return s;
}

}  // namespace drbm::quad
