#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drbm/errors.hpp"
#include "drbm/ginibre.hpp"
#include "drbm/lapack.hpp"
#include "drbm/mass_field.hpp"
#include "drbm/measures.hpp"
#include "drbm/quadrature.hpp"
#include "drbm/radius_law.hpp"

namespace drbm {

/// Truncated marked model: centers with kernel K_c, radii rho * f, radii >= R dropped.
struct FredholmModel {
  MeasureSpec mu = MeasureSpec::uniform_disk({0.0, 0.0}, 1.0, kPi);
  RadiusLaw law{};
  double c = 1.0;
  double rho = 1.0;
  double R = 1.0;

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("c must be > 0");
    if (!(rho > 0.0)) throw ConfigError("rho must be > 0");
    if (!(R > 0.0) || !std::isfinite(R)) throw ConfigError("the Fredholm route needs a finite truncation R > 0");
  }
  /// Every center that can charge mu lies in B(0, outer_radius()).
  [[nodiscard]] double outer_radius() const { return mu.support_radius() + R; }
  /// ∫_0^R f(r/rho)/rho dr.
  [[nodiscard]] double mark_mass() const { return law.cdf(R / rho); }
};

namespace detail {

// radii where r -> mu(B(x, r)) has a kink, for the disk parts of mu
inline std::vector<double> ball_mass_kinks(const MeasureSpec& mu, PlanePoint x, double R) {
  std::vector<double> k;
  for (const auto& [coef, part] : mu.parts()) {
    (void)coef;
    if (const auto* d = std::get_if<UniformDisk>(&part)) {
      const double dist = distance(x, d->center);
      k.push_back(std::abs(dist - d->radius));
      k.push_back(dist + d->radius);
    }
  }
  std::erase_if(k, [R](double v) { return !(v > 0.0 && v < R); });
  return k;
}

inline double psi(double u) { return u < 1e-4 ? u * u / 2.0 - u * u * u / 6.0 + u * u * u * u / 24.0 : std::expm1(-u) + u; }

}  // namespace detail

/// D(x) = ∫_0^R f_rho(r) (1 - exp(-theta mu(B(x, r)))) dr: the multiplier that
/// remains after the radius coordinate of the Laplace kernel is integrated out.
/// theta = +inf gives the mark mass ∫_0^R f_rho, used for the kernel itself.
inline double laplace_weight(const FredholmModel& m, double theta, PlanePoint x) {
  if (std::isinf(theta)) return m.mark_mass();
  if (theta == 0.0) return 0.0;
  const double reach = m.mu.support_radius();
  if (x.abs() >= reach + m.R) return 0.0;
  auto breaks = detail::ball_mass_kinks(m.mu, x, m.R);
  breaks.push_back(m.rho * m.law.r0());
  breaks.push_back(std::max(0.0, x.abs() - reach));
  auto f = [&](double r) { return m.law.scaled_density(r, m.rho) * -std::expm1(-theta * m.mu.ball_mass(x, r)); };
  return quad::adaptive_piecewise(f, 0.0, m.R, breaks, 1e-11);
}

/// ∫_0^R f_rho(r) psi(theta mu(B(x, r))) dr with psi(u) = e^{-u} - 1 + u.
inline double poisson_psi_weight(const FredholmModel& m, double theta, PlanePoint x) {
  const double reach = m.mu.support_radius();
  if (theta == 0.0 || x.abs() >= reach + m.R) return 0.0;
  auto breaks = detail::ball_mass_kinks(m.mu, x, m.R);
  breaks.push_back(m.rho * m.law.r0());
  breaks.push_back(std::max(0.0, x.abs() - reach));
  auto f = [&](double r) { return m.law.scaled_density(r, m.rho) * detail::psi(theta * m.mu.ball_mass(x, r)); };
  return quad::adaptive_piecewise(f, 0.0, m.R, breaks, 1e-11);
}

/// ∫_0^R f_rho(r) mu(B(x, r)) dr; (c/pi) times its integral over x is E[M_rho^R(mu)].
inline double mean_mass_weight(const FredholmModel& m, PlanePoint x) {
  const double reach = m.mu.support_radius();
  if (x.abs() >= reach + m.R) return 0.0;
  auto breaks = detail::ball_mass_kinks(m.mu, x, m.R);
  breaks.push_back(m.rho * m.law.r0());
  breaks.push_back(std::max(0.0, x.abs() - reach));
  auto f = [&](double r) { return m.law.scaled_density(r, m.rho) * m.mu.ball_mass(x, r); };
  return quad::adaptive_piecewise(f, 0.0, m.R, breaks, 1e-11);
}

/// Radial quadrature on [0, outer] resolving the kernel width 1/sqrt(c).
/// `refine` = 2 doubles the panel count (grid-doubling gate).
inline quad::Rule radial_rule(double c, double outer, const std::vector<double>& breaks, int refine = 1) {
  const double width = std::min(0.25 / std::sqrt(c), outer / 8.0);
  const int panels = std::max(1, static_cast<int>(std::ceil(outer / width))) * refine;
  // composite rule cuts each piece between breaks into `per_piece` panels
  const int pieces = static_cast<int>(breaks.size()) + 1;
  const int per_piece = std::max(1, panels / pieces);
  return quad::composite_gauss_legendre(0.0, outer, breaks, 8, per_piece);
}

/// Eigenvalues of sqrt(D) K_c sqrt(D) for a rotation-invariant multiplier D:
/// the operator splits over angular modes into rank-one pieces with
///   lambda_k = ∫_0^∞ D(s) (c^{k+1}/k!) s^{2k} e^{-c s^2} 2 s ds.
inline std::vector<double> angular_mode_eigenvalues(const quad::Rule& rule, const std::vector<double>& d_values,
                                                    double c) {
  if (rule.size() != d_values.size()) throw std::invalid_argument("rule and multiplier sizes differ");
  double outer = 0.0;
  for (double s : rule.nodes) outer = std::max(outer, s);
  const double x_max = c * outer * outer;
  const auto kmax = static_cast<std::size_t>(std::ceil(x_max + 40.0 * std::sqrt(x_max) + 60.0));
  std::vector<double> lambda(kmax + 1, 0.0);
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double s = rule.nodes[j];
    const double wd = rule.weights[j] * d_values[j];
    if (wd == 0.0 || s <= 0.0) continue;
    const double x = c * s * s;
    // p_k(s) = 2 c s * Poisson(k; x); walk outward from the mode
    const auto k0 = std::min(static_cast<std::size_t>(std::floor(x)), kmax);
    const double base = 2.0 * c * s;
    const double log_p0 = static_cast<double>(k0) * std::log(x) - x - std::lgamma(static_cast<double>(k0) + 1.0);
    const double p0 = std::exp(log_p0);
    lambda[k0] += wd * base * p0;
    double p = p0;
    for (std::size_t k = k0 + 1; k <= kmax; ++k) {
      p *= x / static_cast<double>(k);
      lambda[k] += wd * base * p;
      if (p < 1e-18 * p0 && static_cast<double>(k) > x) break;
    }
    p = p0;
    for (std::size_t k = k0; k-- > 0;) {
      p *= static_cast<double>(k + 1) / x;
      lambda[k] += wd * base * p;
      if (p < 1e-18 * p0) break;
    }
  }
  while (!lambda.empty() && lambda.back() == 0.0) lambda.pop_back();
  return lambda;
}

/// Polar Nystrom rule on B(0, outer): Gauss-Legendre in the radius, equispaced angles.
struct NystromGrid {
  std::vector<PlanePoint> nodes;
  std::vector<double> weights;
  double outer_radius = 0.0;
  int radial_nodes = 0;
  int angular_nodes = 0;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }

  static NystromGrid polar(double outer, int radial_panels, int angular_nodes) {
    if (!(outer > 0.0) || radial_panels < 1 || angular_nodes < 1) throw ConfigError("invalid polar grid");
    NystromGrid g;
    g.outer_radius = outer;
    g.angular_nodes = angular_nodes;
    const std::vector<double> none;
    const auto rad = quad::composite_gauss_legendre(0.0, outer, none, 8, radial_panels);
    g.radial_nodes = static_cast<int>(rad.size());
    for (std::size_t i = 0; i < rad.size(); ++i) {
      // rotate alternate rings by half a step
      const double shift = (i % 2 == 0 ? 0.0 : 0.5);
      for (int a = 0; a < angular_nodes; ++a) {
        const double t = 2.0 * kPi * (a + shift) / angular_nodes;
        g.nodes.push_back({rad.nodes[i] * std::cos(t), rad.nodes[i] * std::sin(t)});
        g.weights.push_back(rad.weights[i] * rad.nodes[i] * 2.0 * kPi / angular_nodes);
      }
    }
    return g;
  }

  /// Smallest polar grid that resolves K_c on B(0, outer): radial spacing
  /// below 1/(2 sqrt c) and enough angles for every mode with mass in the disk.
  static NystromGrid for_kernel(double c, double outer, std::size_t max_nodes = 3000, int refine = 1) {
    const int radial_panels = std::max(2, static_cast<int>(std::ceil(outer * std::sqrt(c) / 2.0))) * refine;
    const double x = c * outer * outer;
    const int angular = (2 * static_cast<int>(std::ceil(x + 6.0 * std::sqrt(x) + 4.0)) + 8) * refine;
    const auto m = static_cast<std::size_t>(radial_panels) * 8 * angular;
    if (m > max_nodes)
      throw BudgetError("Nystrom grid for c = " + std::to_string(c) + " on a disk of radius " + std::to_string(outer) +
                        " needs " + std::to_string(m) + " nodes (budget " + std::to_string(max_nodes) +
                        "); kernel width 1/sqrt(c) cannot be resolved");
    return polar(outer, radial_panels, angular);
  }
};

/// A_ij = sqrt(w_i D_i) K_c(x_i, x_j) sqrt(w_j D_j); Hermitian.
struct DiscretizedKernel {
  Eigen::MatrixXcd matrix;
  /// sum_i w_i D_i c/pi: the quadrature of the trace.
  double diagonal_trace = 0.0;
};

inline DiscretizedKernel discretize(const NystromGrid& grid, double c, const std::vector<double>& multiplier) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (multiplier.size() != grid.size()) throw std::invalid_argument("multiplier size differs from grid size");
  std::vector<double> sw(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) sw[i] = std::sqrt(grid.weights[i] * std::max(multiplier[i], 0.0));
  DiscretizedKernel k;
  k.matrix.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      const auto v = sw[i] * sw[j] == 0.0 ? std::complex<double>{}
                                          : sw[i] * kernel_eval(c, grid.nodes[i], grid.nodes[j]) * sw[j];
      k.matrix(i, j) = v;
      k.matrix(j, i) = std::conj(v);
    }
  for (Eigen::Index i = 0; i < n; ++i) k.diagonal_trace += k.matrix(i, i).real();
  return k;
}

/// Discretized K-hat of the model on B(0, R_mu + R) (radius coordinate integrated out).
inline DiscretizedKernel discretize_marked_kernel(const NystromGrid& grid, const FredholmModel& m) {
  return discretize(grid, m.c, std::vector<double>(grid.size(), m.mark_mass()));
}

inline DiscretizedKernel discretize_laplace_kernel(const NystromGrid& grid, const FredholmModel& m, double theta) {
  std::vector<double> d(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) d[i] = laplace_weight(m, theta, grid.nodes[i]);
  return discretize(grid, m.c, d);
}

struct SpectrumReport {
  std::vector<double> eigenvalues;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double eigen_sum = 0.0;
  double diagonal_trace = 0.0;
  double tolerance = 1e-6;
  /// -tol <= lambda_min and lambda_max < 1.
  bool ok = true;

  [[nodiscard]] double trace_relative_error() const {
    return diagonal_trace == 0.0 ? std::abs(eigen_sum) : std::abs(eigen_sum - diagonal_trace) / diagonal_trace;
  }
};

inline SpectrumReport spectrum_from_eigenvalues(std::vector<double> ev, double diagonal_trace, double tol = 1e-6) {
  SpectrumReport r;
  std::sort(ev.begin(), ev.end());
  r.eigenvalues = std::move(ev);
  r.tolerance = tol;
  r.diagonal_trace = diagonal_trace;
  if (!r.eigenvalues.empty()) {
    r.lambda_min = r.eigenvalues.front();
    r.lambda_max = r.eigenvalues.back();
  }
  for (double v : r.eigenvalues) r.eigen_sum += v;
  r.ok = r.lambda_min >= -tol && r.lambda_max < 1.0;
  return r;
}

inline SpectrumReport spectrum_check(const DiscretizedKernel& k, double tol = 1e-6) {
  const auto w = lapack::hermitian_eigenvalues(k.matrix);
  return spectrum_from_eigenvalues(std::vector<double>(w.data(), w.data() + w.size()), k.diagonal_trace, tol);
}

/// Spectrum of the model's K-hat for rotation-invariant multipliers, by angular modes.
inline SpectrumReport radial_spectrum_check(const FredholmModel& m, int refine = 1, double tol = 1e-6) {
  m.validate();
  const double outer = m.outer_radius();
  const auto rule = radial_rule(m.c, outer, {}, refine);
  std::vector<double> d(rule.size(), m.mark_mass());
  double trace = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) trace += rule.weights[j] * d[j] * 2.0 * m.c * rule.nodes[j];
  return spectrum_from_eigenvalues(angular_mode_eigenvalues(rule, d, m.c), trace, tol);
}

enum class FredholmRoute { angular_modes, nystrom };

struct FredholmOptions {
  /// Default picks angular modes for rotation-invariant mu, Nystrom otherwise.
  bool force_nystrom = false;
  int refine = 1;
  std::size_t max_nodes = 3000;
};

struct LaplaceResult {
  double value = 1.0;
  double log_value = 0.0;
  double theta = 0.0;
  /// Eigenvalues of B = sqrt(D) K sqrt(D), descending.
  std::vector<double> eigenvalues;
  double lambda_max = 0.0;
  /// Quadrature of Tr B = (c/pi) ∫ D.
  double diagonal_trace = 0.0;
  FredholmRoute route = FredholmRoute::angular_modes;
  std::size_t nodes = 0;
  /// ∫ (c/pi) psi-integrand on the same spatial rule.
  double poisson_psi = 0.0;
  /// E[M_rho^R(mu)] on the same spatial rule.
  double mean_on_rule = 0.0;
};

namespace detail {

inline LaplaceResult finish_laplace(std::vector<double> ev, double theta) {
  LaplaceResult r;
  r.theta = theta;
  std::sort(ev.begin(), ev.end(), std::greater<>());
  double logdet = 0.0;
  for (double l : ev) {
    if (l >= 1.0) throw NumericalError("eigenvalue " + std::to_string(l) + " of the Laplace kernel is >= 1");
    logdet += std::log1p(-l);
  }
  r.lambda_max = ev.empty() ? 0.0 : ev.front();
  r.eigenvalues = std::move(ev);
  r.log_value = logdet;
  r.value = std::exp(logdet);
  return r;
}

}  // namespace detail

/// E[exp(-theta M_rho^R(mu))] = Det(I - B) with B = sqrt(D_theta) K_c sqrt(D_theta).
inline LaplaceResult laplace_fredholm(double theta, const FredholmModel& m, const FredholmOptions& opt = {}) {
  m.validate();
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw ConfigError("theta must be finite and >= 0");
  const double outer = m.outer_radius();
  if (theta == 0.0) return detail::finish_laplace({}, 0.0);
  if (m.mu.is_radial() && !opt.force_nystrom) {
    std::vector<double> breaks;
    for (double s : m.mu.characteristic_scales())
      if (s < outer) breaks.push_back(s);
    const auto rule = radial_rule(m.c, outer, breaks, opt.refine);
    std::vector<double> d(rule.size());
    double trace = 0.0, psi = 0.0, mean = 0.0;
    for (std::size_t j = 0; j < rule.size(); ++j) {
      const PlanePoint x{rule.nodes[j], 0.0};
      d[j] = laplace_weight(m, theta, x);
      const double w = rule.weights[j] * 2.0 * m.c * rule.nodes[j];
      trace += w * d[j];
      psi += w * poisson_psi_weight(m, theta, x);
      mean += w * mean_mass_weight(m, x);
    }
    auto r = detail::finish_laplace(angular_mode_eigenvalues(rule, d, m.c), theta);
    r.diagonal_trace = trace;
    r.poisson_psi = psi;
    r.mean_on_rule = mean;
    r.route = FredholmRoute::angular_modes;
    r.nodes = rule.size();
    return r;
  }
  const auto grid = NystromGrid::for_kernel(m.c, outer, opt.max_nodes, opt.refine);
  const auto k = discretize_laplace_kernel(grid, m, theta);
  const auto w = lapack::hermitian_eigenvalues(k.matrix);
  auto r = detail::finish_laplace(std::vector<double>(w.data(), w.data() + w.size()), theta);
  r.diagonal_trace = k.diagonal_trace;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid.weights[i] * m.c / kPi;
    r.poisson_psi += w * poisson_psi_weight(m, theta, grid.nodes[i]);
    r.mean_on_rule += w * mean_mass_weight(m, grid.nodes[i]);
  }
  r.route = FredholmRoute::nystrom;
  r.nodes = grid.size();
  return r;
}

/// log det(I - B) via a partial-pivot LU of the discretized I - B.
inline double lu_log_determinant(const DiscretizedKernel& b) {
  const auto n = b.matrix.rows();
  const Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(n, n) - b.matrix;
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const Eigen::MatrixXcd& f = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += std::log(std::abs(f(i, i)));
  return s;
}

struct LogLaplaceDecomposition {
  double theta = 0.0;
  /// theta E[M_rho^R(mu)] on the spatial rule of the determinant.
  double centering = 0.0;
  /// theta E[M_rho^R(mu)] in closed form; the gap to `centering` is spatial quadrature error.
  double centering_closed_form = 0.0;
  /// (c/pi) ∫∫ psi(theta mu(B(x,r))) f_rho(r) dr dx, with psi(u) = e^{-u} - 1 + u.
  double poisson_part = 0.0;
  /// Entry n-2 is -Tr(B^n)/n for n = 2..N.
  std::vector<double> corrections;
  std::vector<double> traces;
  double log_laplace = 0.0;
  /// |poisson_part + sum corrections - (log_laplace + centering)|.
  double residual = 0.0;

  /// log E_Poisson[e^{-theta M}] for Poisson centers of the same intensity.
  [[nodiscard]] double poisson_log_laplace() const { return poisson_part - centering; }
  [[nodiscard]] double correction_sum() const {
    double s = 0.0;
    for (double v : corrections) s += v;
    return s;
  }
};

/// log Det(I - B) = -Tr B - sum_{n>=2} Tr(B^n)/n and Tr B = theta E[M] - poisson_part.
inline LogLaplaceDecomposition log_laplace_decomposition(double theta, const FredholmModel& m,
                                                         const FredholmOptions& opt = {}, int max_terms = 400) {
  const auto lr = laplace_fredholm(theta, m, opt);
  LogLaplaceDecomposition d;
  d.theta = theta;
  d.log_laplace = lr.log_value;
  d.centering = theta * lr.mean_on_rule;
  d.centering_closed_form = theta * truncated_expected_mass(m.mu, m.law, m.c, m.rho, m.R);
  d.poisson_part = lr.poisson_psi;
  if (lr.lambda_max >= 1.0) throw NumericalError("correction series diverges: lambda_max >= 1");
  for (int n = 2; n <= max_terms; ++n) {
    double t = 0.0;
    for (double l : lr.eigenvalues) t += std::pow(l, n);
    d.traces.push_back(t);
    d.corrections.push_back(-t / n);
    if (t / n < 1e-16 * std::max(1.0, std::abs(d.log_laplace))) break;
  }
  d.residual = std::abs(d.poisson_part + d.correction_sum() - (d.log_laplace + d.centering));
  return d;
}

/// Tr(B^2) <= (c rho^4 / pi) theta^2 C_mu (∫_0^{R/rho} r^2 f(r) dr)^2.
inline double trace_square_bound(const FredholmModel& m, double theta) {
  const double mom = m.law.partial_moment(2.0, m.R / m.rho);
  return m.c * std::pow(m.rho, 4.0) / kPi * theta * theta * m.mu.certificate().c_mu * mom * mom;
}

inline double trace_power(const std::vector<double>& eigenvalues, int n) {
  double t = 0.0;
  for (double l : eigenvalues) t += std::pow(l, n);
  return t;
}

}  // namespace drbm
