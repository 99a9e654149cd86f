#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace drbm {

inline constexpr double kPi = std::numbers::pi;

struct PlanePoint {
  double re = 0.0;
  double im = 0.0;

  [[nodiscard]] double norm() const { return re * re + im * im; }
  [[nodiscard]] double abs() const { return std::hypot(re, im); }
  [[nodiscard]] bool finite() const { return std::isfinite(re) && std::isfinite(im); }

  friend PlanePoint operator-(PlanePoint a, PlanePoint b) { return {a.re - b.re, a.im - b.im}; }
  friend PlanePoint operator+(PlanePoint a, PlanePoint b) { return {a.re + b.re, a.im + b.im}; }
  friend PlanePoint operator*(double s, PlanePoint a) { return {s * a.re, s * a.im}; }
  friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
};

inline double distance(PlanePoint a, PlanePoint b) { return (a - b).abs(); }

struct DiskShape {
  PlanePoint center;
  double radius = 1.0;
};

struct RectShape {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  [[nodiscard]] double width() const { return xmax - xmin; }
  [[nodiscard]] double height() const { return ymax - ymin; }
};

/// Bounded observation region.
class Window {
 public:
  static Window disk(PlanePoint center, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius) || !center.finite())
      throw std::invalid_argument("disk window needs a finite radius > 0");
    return Window(DiskShape{center, radius});
  }
  static Window disk(double radius) { return disk({0.0, 0.0}, radius); }

  static Window rectangle(double xmin, double xmax, double ymin, double ymax) {
    if (!(xmax > xmin) || !(ymax > ymin) || !std::isfinite(xmax - xmin) || !std::isfinite(ymax - ymin))
      throw std::invalid_argument("rectangle window needs xmax > xmin and ymax > ymin");
    return Window(RectShape{xmin, xmax, ymin, ymax});
  }

  [[nodiscard]] bool is_disk() const { return std::holds_alternative<DiskShape>(shape_); }
  [[nodiscard]] const DiskShape& as_disk() const { return std::get<DiskShape>(shape_); }
  [[nodiscard]] const RectShape& as_rect() const { return std::get<RectShape>(shape_); }

  [[nodiscard]] double area() const {
    if (is_disk()) return kPi * as_disk().radius * as_disk().radius;
    return as_rect().width() * as_rect().height();
  }

  [[nodiscard]] bool contains(PlanePoint p) const {
    if (is_disk()) return (p - as_disk().center).norm() <= as_disk().radius * as_disk().radius;
    const auto& r = as_rect();
    return p.re >= r.xmin && p.re <= r.xmax && p.im >= r.ymin && p.im <= r.ymax;
  }

  /// Largest distance from the origin to a point of the window.
  [[nodiscard]] double circumradius() const {
    if (is_disk()) return as_disk().center.abs() + as_disk().radius;
    const auto& r = as_rect();
    const double dx = std::max(std::abs(r.xmin), std::abs(r.xmax));
    const double dy = std::max(std::abs(r.ymin), std::abs(r.ymax));
    return std::hypot(dx, dy);
  }

  /// True when the closed disk B(center, radius) lies inside the window.
  [[nodiscard]] bool contains_disk(PlanePoint center, double radius) const {
    if (is_disk()) {
      return distance(center, as_disk().center) + radius <= as_disk().radius * (1.0 + 1e-12);
    }
    const auto& r = as_rect();
    return center.re - radius >= r.xmin && center.re + radius <= r.xmax &&
           center.im - radius >= r.ymin && center.im + radius <= r.ymax;
  }

  /// Area of W ∩ (W + shift), used for translation edge correction.
  [[nodiscard]] double translated_overlap(PlanePoint shift) const;

  [[nodiscard]] std::string describe() const;

 private:
  explicit Window(std::variant<DiskShape, RectShape> s) : shape_(s) {}
  std::variant<DiskShape, RectShape> shape_;
};

/// Area of the intersection of two disks with radii r1, r2 whose centers are d apart.
inline double disk_disk_intersection(double d, double r1, double r2) {
  if (r1 <= 0.0 || r2 <= 0.0) return 0.0;
  // the lens formula loses accuracy at tangency; snap within a relative 1e-12
  const double slack = 1e-12 * (r1 + r2);
  if (d >= r1 + r2 - slack) return 0.0;
  const double rmin = std::min(r1, r2);
  if (d <= std::abs(r1 - r2) + slack) return kPi * rmin * rmin;
  const double c1 = std::clamp((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1), -1.0, 1.0);
  const double c2 = std::clamp((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2), -1.0, 1.0);
  const double k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
  return r1 * r1 * std::acos(c1) + r2 * r2 * std::acos(c2) - 0.5 * std::sqrt(std::max(k, 0.0));
}

namespace detail {

// ∫ sqrt(r² - t²) dt
inline double half_chord_primitive(double t, double r) {
  const double u = std::clamp(t / r, -1.0, 1.0);
  return 0.5 * (t * std::sqrt(std::max(r * r - t * t, 0.0)) + r * r * std::asin(u));
}

// Area of B(0, r) ∩ {X <= x, Y <= y}.
inline double disk_quadrant_area(double x, double y, double r) {
  const double xe = std::clamp(x, -r, r);
  if (xe <= -r || y <= -r) return 0.0;
  auto H = [r](double t) { return half_chord_primitive(t, r); };
  if (y >= r) return 2.0 * (H(xe) - H(-r));
  const double s = std::sqrt(std::max(r * r - y * y, 0.0));
  if (y >= 0.0) {
    double area = 2.0 * (H(std::min(xe, -s)) - H(-r));
    if (xe > -s) {
      const double hi = std::min(xe, s);
      area += y * (hi + s) + H(hi) - H(-s);
    }
    if (xe > s) area += 2.0 * (H(xe) - H(s));
    return area;
  }
  if (xe <= -s) return 0.0;
  const double hi = std::min(xe, s);
  return y * (hi + s) + H(hi) - H(-s);
}

}  // namespace detail

/// Exact area of B(center, r) ∩ rect.
inline double disk_rect_intersection(PlanePoint center, double r, const RectShape& rect) {
  if (r <= 0.0) return 0.0;
  const double x0 = rect.xmin - center.re, x1 = rect.xmax - center.re;
  const double y0 = rect.ymin - center.im, y1 = rect.ymax - center.im;
  using detail::disk_quadrant_area;
  const double a = disk_quadrant_area(x1, y1, r) - disk_quadrant_area(x0, y1, r) -
                   disk_quadrant_area(x1, y0, r) + disk_quadrant_area(x0, y0, r);
  return std::max(a, 0.0);
}

inline double Window::translated_overlap(PlanePoint shift) const {
  if (is_disk()) return disk_disk_intersection(shift.abs(), as_disk().radius, as_disk().radius);
  const auto& r = as_rect();
  return std::max(r.width() - std::abs(shift.re), 0.0) * std::max(r.height() - std::abs(shift.im), 0.0);
}

inline std::string Window::describe() const {
  if (is_disk()) {
    const auto& d = as_disk();
    return "disk(" + std::to_string(d.center.re) + "," + std::to_string(d.center.im) + ";" +
           std::to_string(d.radius) + ")";
  }
  const auto& r = as_rect();
  return "rect(" + std::to_string(r.xmin) + "," + std::to_string(r.xmax) + "," + std::to_string(r.ymin) +
         "," + std::to_string(r.ymax) + ")";
}

}  // namespace drbm
