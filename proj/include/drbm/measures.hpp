#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/distributions/non_central_chi_squared.hpp>

#include "drbm/geometry.hpp"
#include "drbm/quadrature.hpp"

namespace drbm {

struct UniformDisk {
  PlanePoint center;
  double radius = 1.0;
  double mass = 1.0;
};

struct UniformRect {
  RectShape bounds;
  double mass = 1.0;
};

/// Gaussian bump truncated at kGaussianCutoff bandwidths and renormalized to `mass`.
struct GaussianBump {
  PlanePoint center;
  double bandwidth = 1.0;
  double mass = 1.0;
};

inline constexpr double kGaussianCutoff = 6.0;

using MeasurePart = std::variant<UniformDisk, UniformRect, GaussianBump>;

/// Constants (C_mu, p, q) with ∫ mu(B(x,r))^2 dx <= C_mu min(r^p, r^q).
struct Certificate {
  double c_mu = 0.0;
  double p = 2.0;
  double q = 4.0;
  [[nodiscard]] double bound(double r) const { return c_mu * std::min(std::pow(r, p), std::pow(r, q)); }
};

namespace detail {

inline double part_mass(const MeasurePart& m) {
  return std::visit([](const auto& p) { return p.mass; }, m);
}

inline double gaussian_normalizer(double h) {
  return 2.0 * kPi * h * h * (1.0 - std::exp(-0.5 * kGaussianCutoff * kGaussianCutoff));
}

// P(|Y| <= r) for Y ~ N((d, 0), h^2 I), integrating the tangential coordinate
// t = r sin(theta) against the normal mass of the chord.
inline double gaussian_disk_probability_far(double d, double r, double h) {
  const double theta_max = std::asin(std::min(1.0, 10.0 * h / r));
  const auto rule = quad::gauss_legendre(96, -theta_max, theta_max);
  const double inv = 1.0 / (h * std::sqrt(2.0));
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double t = r * std::sin(rule.nodes[i]), chord = r * std::cos(rule.nodes[i]);
    const double inside = 0.5 * (std::erfc((d - chord) * inv) - std::erfc((d + chord) * inv));
    s += rule.weights[i] * std::exp(-0.5 * t * t / (h * h)) / (h * std::sqrt(2.0 * kPi)) * inside * chord;
  }
  return s;
}

// Gaussian mass of B(x, r): the noncentral chi-squared law of |Y - x|^2 / h^2
// for moderate d/h, a tangential integral when d/h is large.
// Mass beyond the cutoff is at most e^{-18} of the total and is not removed.
inline double gaussian_ball_mass(const GaussianBump& g, double d, double r) {
  if (r <= 0.0) return 0.0;
  const double h = g.bandwidth, cut = kGaussianCutoff * h;
  if (d + cut <= r) return g.mass;
  if (d >= cut + r) return 0.0;
  double p = 0.0;
  if (d < 100.0 * h) {
    const boost::math::non_central_chi_squared_distribution<double> law(2.0, d * d / (h * h));
    p = boost::math::cdf(law, r * r / (h * h));
  } else {
    p = gaussian_disk_probability_far(d, r, h);
  }
  const double norm = 1.0 - std::exp(-0.5 * kGaussianCutoff * kGaussianCutoff);
  return std::clamp(g.mass * p / norm, 0.0, g.mass);
}

inline double part_ball_mass(const MeasurePart& m, PlanePoint x, double r) {
  if (r <= 0.0) return 0.0;
  if (const auto* u = std::get_if<UniformDisk>(&m)) {
    return u->mass / (kPi * u->radius * u->radius) * disk_disk_intersection(distance(x, u->center), r, u->radius);
  }
  if (const auto* u = std::get_if<UniformRect>(&m)) {
    return u->mass / (u->bounds.width() * u->bounds.height()) * disk_rect_intersection(x, r, u->bounds);
  }
  const auto& g = std::get<GaussianBump>(m);
  return gaussian_ball_mass(g, distance(x, g.center), r);
}

inline double part_density(const MeasurePart& m, PlanePoint y) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) {
    return distance(y, u->center) <= u->radius ? u->mass / (kPi * u->radius * u->radius) : 0.0;
  }
  if (const auto* u = std::get_if<UniformRect>(&m)) {
    const auto& b = u->bounds;
    const bool in = y.re >= b.xmin && y.re <= b.xmax && y.im >= b.ymin && y.im <= b.ymax;
    return in ? u->mass / (b.width() * b.height()) : 0.0;
  }
  const auto& g = std::get<GaussianBump>(m);
  const double s = distance(y, g.center);
  if (s > kGaussianCutoff * g.bandwidth) return 0.0;
  return g.mass / gaussian_normalizer(g.bandwidth) * std::exp(-0.5 * s * s / (g.bandwidth * g.bandwidth));
}

// ||phi||_2 of a single part.
inline double part_l2_norm(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) return u->mass / std::sqrt(kPi * u->radius * u->radius);
  if (const auto* u = std::get_if<UniformRect>(&m)) return u->mass / std::sqrt(u->bounds.width() * u->bounds.height());
  const auto& g = std::get<GaussianBump>(m);
  const double amp = g.mass / gaussian_normalizer(g.bandwidth);
  const double cut2 = kGaussianCutoff * kGaussianCutoff;
  return amp * std::sqrt(kPi * g.bandwidth * g.bandwidth * (1.0 - std::exp(-cut2)));
}

// ∫ phi^gamma of a single part.
inline double part_power_integral(const MeasurePart& m, double gamma) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) {
    const double area = kPi * u->radius * u->radius;
    return std::pow(u->mass / area, gamma) * area;
  }
  if (const auto* u = std::get_if<UniformRect>(&m)) {
    const double area = u->bounds.width() * u->bounds.height();
    return std::pow(u->mass / area, gamma) * area;
  }
  const auto& g = std::get<GaussianBump>(m);
  const double amp = g.mass / gaussian_normalizer(g.bandwidth);
  const double h2 = g.bandwidth * g.bandwidth;
  return std::pow(amp, gamma) * 2.0 * kPi * h2 / gamma *
         (1.0 - std::exp(-0.5 * gamma * kGaussianCutoff * kGaussianCutoff));
}

inline double part_support_radius(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) return u->center.abs() + u->radius;
  if (const auto* u = std::get_if<UniformRect>(&m)) {
    const auto& b = u->bounds;
    return std::hypot(std::max(std::abs(b.xmin), std::abs(b.xmax)), std::max(std::abs(b.ymin), std::abs(b.ymax)));
  }
  const auto& g = std::get<GaussianBump>(m);
  return g.center.abs() + kGaussianCutoff * g.bandwidth;
}

inline RectShape part_bounding_box(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformRect>(&m)) return u->bounds;
  PlanePoint c;
  double ext = 0.0;
  if (const auto* u = std::get_if<UniformDisk>(&m)) {
    c = u->center;
    ext = u->radius;
  } else {
    const auto& g = std::get<GaussianBump>(m);
    c = g.center;
    ext = kGaussianCutoff * g.bandwidth;
  }
  return {c.re - ext, c.re + ext, c.im - ext, c.im + ext};
}

// Length scales at which g(r) changes regime.
inline std::vector<double> part_scales(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) return {u->radius, 2.0 * u->radius};
  if (const auto* u = std::get_if<UniformRect>(&m)) {
    const double w = u->bounds.width(), h = u->bounds.height();
    return {w, h, std::hypot(w, h)};
  }
  const auto& g = std::get<GaussianBump>(m);
  return {g.bandwidth, kGaussianCutoff * g.bandwidth, 2.0 * kGaussianCutoff * g.bandwidth};
}

inline bool part_is_radial(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) return u->center.norm() == 0.0;
  if (const auto* g = std::get_if<GaussianBump>(&m)) return g->center.norm() == 0.0;
  return false;
}

inline std::string part_describe(const MeasurePart& m) {
  std::ostringstream os;
  if (const auto* u = std::get_if<UniformDisk>(&m)) {
    os << "uniform_disk(" << u->center.re << "," << u->center.im << ";" << u->radius << ";" << u->mass << ")";
  } else if (const auto* u = std::get_if<UniformRect>(&m)) {
    os << "uniform_rect(" << u->bounds.xmin << "," << u->bounds.xmax << "," << u->bounds.ymin << ","
       << u->bounds.ymax << ";" << u->mass << ")";
  } else {
    const auto& g = std::get<GaussianBump>(m);
    os << "gaussian_bump(" << g.center.re << "," << g.center.im << ";" << g.bandwidth << ";" << g.mass << ")";
  }
  return os.str();
}

}  // namespace detail

/// Finite positive compactly supported measure with a density, built from
/// uniform disks, uniform rectangles and truncated Gaussian bumps combined
/// with nonnegative coefficients. Immutable; evaluators are pure.
class MeasureSpec {
 public:
  static MeasureSpec uniform_disk(PlanePoint center, double radius, double mass) {
    if (!(radius > 0.0) || !(mass > 0.0) || !center.finite())
      throw std::invalid_argument("uniform_disk needs radius > 0 and mass > 0");
    return MeasureSpec({{1.0, UniformDisk{center, radius, mass}}});
  }
  static MeasureSpec uniform_rect(RectShape bounds, double mass) {
    if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0) || !(mass > 0.0))
      throw std::invalid_argument("uniform_rect needs positive extent and mass > 0");
    return MeasureSpec({{1.0, UniformRect{bounds, mass}}});
  }
  static MeasureSpec gaussian_bump(PlanePoint center, double bandwidth, double mass) {
    if (!(bandwidth > 0.0) || !(mass > 0.0) || !center.finite())
      throw std::invalid_argument("gaussian_bump needs bandwidth > 0 and mass > 0");
    return MeasureSpec({{1.0, GaussianBump{center, bandwidth, mass}}});
  }

  /// Nonnegative combination sum_i coef_i * mu_i.
  static MeasureSpec linear_combination(const std::vector<std::pair<double, MeasureSpec>>& terms) {
    std::vector<std::pair<double, MeasurePart>> parts;
    bool any_positive = false;
    for (const auto& [coef, mu] : terms) {
      if (!(coef >= 0.0) || !std::isfinite(coef))
        throw std::invalid_argument("linear_combination coefficients must be finite and >= 0");
      if (coef == 0.0) continue;
      any_positive = true;
      for (const auto& [a, part] : mu.parts_) parts.emplace_back(coef * a, part);
    }
    if (!any_positive) throw std::invalid_argument("linear_combination needs at least one positive coefficient");
    return MeasureSpec(std::move(parts));
  }

  [[nodiscard]] const std::vector<std::pair<double, MeasurePart>>& parts() const { return parts_; }

  [[nodiscard]] double total_mass() const {
    double m = 0.0;
    for (const auto& [a, p] : parts_) m += a * detail::part_mass(p);
    return m;
  }

  /// R_mu = sup over the support of |x|.
  [[nodiscard]] double support_radius() const {
    double r = 0.0;
    for (const auto& [a, p] : parts_) r = std::max(r, detail::part_support_radius(p));
    return r;
  }

  [[nodiscard]] RectShape bounding_box() const {
    RectShape box = detail::part_bounding_box(parts_.front().second);
    for (const auto& [a, p] : parts_) {
      const auto b = detail::part_bounding_box(p);
      box.xmin = std::min(box.xmin, b.xmin);
      box.xmax = std::max(box.xmax, b.xmax);
      box.ymin = std::min(box.ymin, b.ymin);
      box.ymax = std::max(box.ymax, b.ymax);
    }
    return box;
  }

  /// Rotation invariant about the origin (every part is a centered disk or bump).
  [[nodiscard]] bool is_radial() const {
    return std::all_of(parts_.begin(), parts_.end(), [](const auto& t) { return detail::part_is_radial(t.second); });
  }

  /// mu(B(x, r)).
  [[nodiscard]] double ball_mass(PlanePoint x, double r) const {
    double s = 0.0;
    for (const auto& [a, p] : parts_) s += a * detail::part_ball_mass(p, x, r);
    return std::min(s, total_mass());
  }

  /// mu(B(x, r)) with |x| = d; requires is_radial().
  [[nodiscard]] double radial_ball_mass(double d, double r) const { return ball_mass({d, 0.0}, r); }

  /// Density phi(y).
  [[nodiscard]] double density(PlanePoint y) const {
    double s = 0.0;
    for (const auto& [a, p] : parts_) s += a * detail::part_density(p, y);
    return s;
  }

  /// Upper bound on ||phi||_2 (exact for a single part).
  [[nodiscard]] double l2_norm_bound() const {
    double s = 0.0;
    for (const auto& [a, p] : parts_) s += a * detail::part_l2_norm(p);
    return s;
  }

  /// ∫ phi(x)^gamma dx.
  [[nodiscard]] double density_power_integral(double gamma) const {
    if (parts_.size() == 1) return std::pow(parts_[0].first, gamma) * detail::part_power_integral(parts_[0].second, gamma);
    const auto box = bounding_box();
    const int panels = 48;
    const auto rx = quad::composite_gauss_legendre(box.xmin, box.xmax, {}, 8, panels);
    const auto ry = quad::composite_gauss_legendre(box.ymin, box.ymax, {}, 8, panels);
    double s = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i)
      for (std::size_t j = 0; j < ry.size(); ++j)
        s += rx.weights[i] * ry.weights[j] * std::pow(density({rx.nodes[i], ry.nodes[j]}), gamma);
    return s;
  }

  /// Certificate with (p, q) = (2, 4): g(r) <= pi^2 ||phi||_2^2 r^4 and g(r) <= pi mu(C)^2 r^2.
  [[nodiscard]] Certificate certificate() const {
    const double l2 = l2_norm_bound();
    const double m = total_mass();
    return {std::max(kPi * kPi * l2 * l2, kPi * m * m), 2.0, 4.0};
  }

  /// Length scales where g(r) may change regime (used to place quadrature breaks).
  [[nodiscard]] std::vector<double> characteristic_scales() const {
    std::vector<double> s;
    for (const auto& [a, p] : parts_) {
      auto ps = detail::part_scales(p);
      s.insert(s.end(), ps.begin(), ps.end());
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  [[nodiscard]] std::string describe() const {
    std::string out;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      if (i) out += " + ";
      std::ostringstream os;
      os << parts_[i].first;
      out += (parts_[i].first == 1.0 ? std::string() : os.str() + "*") + detail::part_describe(parts_[i].second);
    }
    return out;
  }

 private:
  explicit MeasureSpec(std::vector<std::pair<double, MeasurePart>> parts) : parts_(std::move(parts)) {}
  std::vector<std::pair<double, MeasurePart>> parts_;
};

namespace detail {

// Gaussian mass of the axis-aligned rectangle for a bump (cutoff ignored).
inline double gaussian_rect_mass(const GaussianBump& g, const RectShape& r) {
  const double s = g.bandwidth * std::sqrt(2.0);
  const double px = 0.5 * (std::erf((r.xmax - g.center.re) / s) - std::erf((r.xmin - g.center.re) / s));
  const double py = 0.5 * (std::erf((r.ymax - g.center.im) / s) - std::erf((r.ymin - g.center.im) / s));
  const double norm = 1.0 - std::exp(-0.5 * kGaussianCutoff * kGaussianCutoff);
  return g.mass * std::max(px * py, 0.0) / norm;
}

inline RectShape shifted(const RectShape& r, PlanePoint v) {
  return {r.xmin + v.re, r.xmax + v.re, r.ymin + v.im, r.ymax + v.im};
}

inline double part_area(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) return kPi * u->radius * u->radius;
  const auto& r = std::get<UniformRect>(m).bounds;
  return r.width() * r.height();
}

// ∫ phi_a(y) phi_b(y + u) dy for single parts; Gaussian factors ignore the cutoff.
inline double cross_correlation(const MeasurePart& a, const MeasurePart& b, PlanePoint u) {
  const auto* ga = std::get_if<GaussianBump>(&a);
  const auto* gb = std::get_if<GaussianBump>(&b);
  const double norm = 1.0 - std::exp(-0.5 * kGaussianCutoff * kGaussianCutoff);
  if (ga && gb) {
    const double v = ga->bandwidth * ga->bandwidth + gb->bandwidth * gb->bandwidth;
    const PlanePoint z = u - (gb->center - ga->center);
    return ga->mass * gb->mass / (norm * norm) * std::exp(-0.5 * z.norm() / v) / (2.0 * kPi * v);
  }
  if (ga || gb) {
    // Gaussian G against the uniform part X: rho_X times the G-mass of X shifted by -u (G first) or +u.
    const GaussianBump& g = ga ? *ga : *gb;
    const MeasurePart& x = ga ? b : a;
    const PlanePoint shift = ga ? PlanePoint{-u.re, -u.im} : u;
    const double rho = part_mass(x) / part_area(x);
    if (const auto* d = std::get_if<UniformDisk>(&x)) {
      return rho * gaussian_ball_mass(g, distance(d->center + shift, g.center), d->radius);
    }
    return rho * gaussian_rect_mass(g, shifted(std::get<UniformRect>(x).bounds, shift));
  }
  const double rho = part_mass(a) / part_area(a) * part_mass(b) / part_area(b);
  const PlanePoint minus_u{-u.re, -u.im};
  const auto* da = std::get_if<UniformDisk>(&a);
  const auto* db = std::get_if<UniformDisk>(&b);
  if (da && db) return rho * disk_disk_intersection(distance(da->center, db->center + minus_u), da->radius, db->radius);
  if (da) return rho * disk_rect_intersection(da->center, da->radius, shifted(std::get<UniformRect>(b).bounds, minus_u));
  if (db) return rho * disk_rect_intersection(db->center + minus_u, db->radius, std::get<UniformRect>(a).bounds);
  const auto& ra = std::get<UniformRect>(a).bounds;
  const auto rb = shifted(std::get<UniformRect>(b).bounds, minus_u);
  const double wx = std::min(ra.xmax, rb.xmax) - std::max(ra.xmin, rb.xmin);
  const double wy = std::min(ra.ymax, rb.ymax) - std::max(ra.ymin, rb.ymin);
  return rho * std::max(wx, 0.0) * std::max(wy, 0.0);
}

// Extents whose sums and differences with center distances locate kinks of the
// angular autocorrelation profile.
inline std::vector<double> part_extents(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) return {u->radius};
  if (const auto* u = std::get_if<UniformRect>(&m)) {
    const double w = u->bounds.width(), h = u->bounds.height();
    return {0.5 * w, 0.5 * h, 0.5 * std::hypot(w, h), w, h, std::hypot(w, h)};
  }
  return {0.0};
}

inline PlanePoint part_center(const MeasurePart& m) {
  if (const auto* u = std::get_if<UniformDisk>(&m)) return u->center;
  if (const auto* u = std::get_if<UniformRect>(&m))
    return {0.5 * (u->bounds.xmin + u->bounds.xmax), 0.5 * (u->bounds.ymin + u->bounds.ymax)};
  return std::get<GaussianBump>(m).center;
}

// Lagrange interpolation through the nodes of one Gauss–Legendre panel.
inline double panel_interpolate(const double* nodes, const double* values, int n, double s) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double li = 1.0;
    for (int j = 0; j < n; ++j)
      if (j != i) li *= (s - nodes[j]) / (nodes[i] - nodes[j]);
    acc += li * values[i];
  }
  return acc;
}

}  // namespace detail

/// Area of B(x, r) ∩ B(x + u, r) as a function of s = |u|.
inline double ball_overlap_area(double s, double r) { return disk_disk_intersection(s, r, r); }

/// Evaluator of g(r) = ∫ mu(B(x, r))^2 dx for one measure.
///
/// Rotation-invariant measures use a 1-D polar integral of mu(B(x, r))^2
/// split at the geometric kinks. Other measures use the identity
///   g(r) = ∫_0^∞ A_r(s) C(s) ds,
/// with A_r(s) the overlap area of two radius-r disks at distance s and C(s)
/// the density autocorrelation integrated over the circle of radius s. C is
/// tabulated once on a composite Gauss–Legendre grid and interpolated per panel.
class BallMassSquareIntegral {
 public:
  static constexpr int kPanelNodes = 8;
  static constexpr int kBasePanels = 256;
  static constexpr int kAngularPanels = 32;

  explicit BallMassSquareIntegral(const MeasureSpec& mu) : mu_(mu) {
    if (!mu_.is_radial()) tabulate();
  }

  [[nodiscard]] const MeasureSpec& measure() const { return mu_; }

  [[nodiscard]] double operator()(double r) const {
    if (r <= 0.0) return 0.0;
    return mu_.is_radial() ? radial(r) : from_profile(r);
  }

  /// s ∫_0^{2pi} C(s e^{i t}) dt for the density autocorrelation C.
  [[nodiscard]] double angular_autocorrelation(double s) const {
    const auto& unit = quad::cached_gauss_legendre(kPanelNodes);
    const double step = 2.0 * kPi / kAngularPanels;
    double acc = 0.0;
    for (int p = 0; p < kAngularPanels; ++p) {
      const double mid = (p + 0.5) * step;
      for (std::size_t k = 0; k < unit.size(); ++k) {
        const double t = mid + 0.5 * step * unit.nodes[k];
        const PlanePoint u{s * std::cos(t), s * std::sin(t)};
        double c = 0.0;
        for (const auto& [ai, pi] : mu_.parts())
          for (const auto& [aj, pj] : mu_.parts()) c += ai * aj * detail::cross_correlation(pi, pj, u);
        acc += 0.5 * step * unit.weights[k] * c;
      }
    }
    return s * acc;
  }

 private:
  double radial(double r) const {
    std::vector<double> breaks;
    for (double s : mu_.characteristic_scales()) {
      breaks.push_back(std::abs(s - r));
      breaks.push_back(s + r);
    }
    auto integrand = [&](double d) {
      const double b = mu_.radial_ball_mass(d, r);
      return 2.0 * kPi * d * b * b;
    };
    return quad::adaptive_piecewise(integrand, 0.0, mu_.support_radius() + r, breaks, 1e-9);
  }

  void tabulate() {
    const auto box = mu_.bounding_box();
    smax_ = std::hypot(box.width(), box.height());
    std::vector<double> edges;
    for (int p = 0; p <= kBasePanels; ++p) edges.push_back(smax_ * p / kBasePanels);
    for (const auto& [ai, pi] : mu_.parts())
      for (const auto& [aj, pj] : mu_.parts()) {
        const double dc = distance(detail::part_center(pi), detail::part_center(pj));
        for (double ei : detail::part_extents(pi))
          for (double ej : detail::part_extents(pj))
            for (double v : {dc + ei + ej, dc + ei - ej, dc - ei + ej, dc - ei - ej, ei + ej - dc, std::abs(ei - ej)})
              if (v > 0.0 && v < smax_) edges.push_back(v);
      }
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (edges_.empty() || edges[i] - edges_.back() > 1e-12 * smax_) edges_.push_back(edges[i]);
    const auto& unit = quad::cached_gauss_legendre(kPanelNodes);
    for (std::size_t e = 0; e + 1 < edges_.size(); ++e) {
      const double lo = edges_[e], hi = edges_[e + 1];
      for (std::size_t k = 0; k < unit.size(); ++k) {
        const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * unit.nodes[k];
        nodes_.push_back(s);
        values_.push_back(angular_autocorrelation(s));
      }
    }
  }

  double profile(double s) const {
    if (s <= 0.0 || s >= smax_) return 0.0;
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), s);
    const std::size_t panel = std::min<std::size_t>(static_cast<std::size_t>(it - edges_.begin()) - 1, edges_.size() - 2);
    const std::size_t off = panel * kPanelNodes;
    return detail::panel_interpolate(&nodes_[off], &values_[off], kPanelNodes, s);
  }

  double from_profile(double r) const {
    const double top = std::min(2.0 * r, smax_);
    std::vector<double> breaks;
    for (double e : edges_)
      if (e < top) breaks.push_back(e);
    // A_r(s) ~ (2r - s)^{3/2} near s = 2r
    for (int k = 1; k <= 6; ++k) breaks.push_back(2.0 * r * (1.0 - std::ldexp(1.0, -k)));
    const auto rule = quad::composite_gauss_legendre(0.0, top, breaks, kPanelNodes, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
      s += rule.weights[i] * ball_overlap_area(rule.nodes[i], r) * profile(rule.nodes[i]);
    return s;
  }

  MeasureSpec mu_;
  double smax_ = 0.0;
  std::vector<double> edges_;
  std::vector<double> nodes_;
  std::vector<double> values_;
};

/// g(r) = ∫ mu(B(x, r))^2 dx. Builds a fresh evaluator; reuse
/// BallMassSquareIntegral when evaluating many radii.
inline double ball_mass_square_integral(const MeasureSpec& mu, double r) { return BallMassSquareIntegral(mu)(r); }

/// ∫_{lo}^{hi} g(r) w(r) dr on a log-spaced composite rule (0 < lo < hi < inf).
inline double weighted_g_integral(const BallMassSquareIntegral& g, const std::function<double(double)>& w, double lo,
                                  double hi) {
  if (!(hi > lo) || !(lo > 0.0)) return 0.0;
  const double a = std::log(lo), b = std::log(hi);
  std::vector<double> breaks;
  for (double s : g.measure().characteristic_scales())
    if (s > lo && s < hi) breaks.push_back(std::log(s));
  // three panels per decade on top of the scale breaks
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / std::log(10.0) * 3.0)));
  for (int i = 1; i < panels; ++i) breaks.push_back(a + (b - a) * i / panels);
  const auto rule = quad::composite_gauss_legendre(a, b, breaks, 12, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double r = std::exp(rule.nodes[i]);
    s += rule.weights[i] * r * g(r) * w(r);
  }
  return s;
}

/// ∫_{lo}^{hi} g(r) r^{-beta-1} dr for 0 <= lo < hi <= inf. Near 0 the
/// integrand follows g ~ r^4 and near infinity g ~ r^2; the unresolved ends
/// are closed with those power laws.
inline double beta_weighted_g_integral(const BallMassSquareIntegral& g, double beta, double lo = 0.0,
                                       double hi = std::numeric_limits<double>::infinity()) {
  const auto scales = g.measure().characteristic_scales();
  const double small = scales.front() * 1e-5;
  const double large = scales.back() * 1e5;
  const double a = std::max(lo, small), b = std::min(hi, large);
  auto w = [beta](double r) { return std::pow(r, -beta - 1.0); };
  double s = b > a ? weighted_g_integral(g, w, a, b) : 0.0;
  if (lo < small) {
    const double g0 = g(small);
    const double lo_eff = std::max(lo, 0.0);
    const double top = std::min(hi, small);
    s += g0 * std::pow(small, -4.0) * (std::pow(top, 4.0 - beta) - std::pow(lo_eff, 4.0 - beta)) / (4.0 - beta);
  }
  if (hi > large) {
    const double g1 = g(large);
    const double bottom = std::max(lo, large);
    const double hi_term = std::isinf(hi) ? 0.0 : std::pow(hi, 2.0 - beta);
    s += g1 * std::pow(large, -2.0) * (std::pow(bottom, 2.0 - beta) - hi_term) / (beta - 2.0);
  }
  return s;
}

inline double beta_weighted_g_integral(const MeasureSpec& mu, double beta, double lo = 0.0,
                                       double hi = std::numeric_limits<double>::infinity()) {
  return beta_weighted_g_integral(BallMassSquareIntegral(mu), beta, lo, hi);
}

struct CertificateReport {
  bool ok = true;
  double violating_r = std::numeric_limits<double>::quiet_NaN();
  Certificate certificate;
  std::vector<double> r_grid;
  std::vector<double> g_values;
  /// I(mu) = ∫ g(r) r^{-beta-1} dr.
  double beta_integral = 0.0;
};

/// Checks the M_beta certificate of `mu` on `r_grid` and evaluates I(mu).
inline CertificateReport mbeta_certificate_check(const MeasureSpec& mu, double beta, const std::vector<double>& r_grid) {
  if (r_grid.size() < 2) throw std::invalid_argument("r_grid needs at least two points");
  const auto [mn, mx] = std::minmax_element(r_grid.begin(), r_grid.end());
  if (*mn <= 0.0 || std::log10(*mx / *mn) < 4.0 - 1e-9)
    throw std::invalid_argument("r_grid must be positive and span at least 4 decades");
  CertificateReport rep;
  rep.certificate = mu.certificate();
  if (!(rep.certificate.p < beta && beta < rep.certificate.q))
    throw std::invalid_argument("beta must lie strictly between the certificate exponents p and q");
  rep.r_grid = r_grid;
  const BallMassSquareIntegral g_of(mu);
  for (double r : r_grid) {
    const double g = g_of(r);
    rep.g_values.push_back(g);
    if (rep.ok && g > rep.certificate.bound(r) * (1.0 + 1e-9)) {
      rep.ok = false;
      rep.violating_r = r;
    }
  }
  rep.beta_integral = beta_weighted_g_integral(g_of, beta);
  return rep;
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
  return g;
}

}  // namespace drbm
