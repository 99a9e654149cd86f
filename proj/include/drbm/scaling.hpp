#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "drbm/errors.hpp"
#include "drbm/ginibre.hpp"
#include "drbm/marks.hpp"
#include "drbm/mass_field.hpp"
#include "drbm/measures.hpp"
#include "drbm/radius_law.hpp"
#include "drbm/random.hpp"

namespace drbm {

enum class RegimeKind { large_ball, intermediate, small_ball };

inline std::string to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::large_ball: return "large_ball";
    case RegimeKind::intermediate: return "intermediate";
    case RegimeKind::small_ball: return "small_ball";
  }
  return "unknown";
}

inline RegimeKind regime_kind_from_string(const std::string& s) {
  if (s == "large_ball") return RegimeKind::large_ball;
  if (s == "intermediate") return RegimeKind::intermediate;
  if (s == "small_ball") return RegimeKind::small_ball;
  throw ConfigError("unknown regime '" + s + "'; expected large_ball, intermediate or small_ball");
}

struct Regime {
  RegimeKind kind = RegimeKind::intermediate;
  /// delta for the two non-critical regimes, a for the intermediate one.
  double parameter = 1.0;
  double beta = 3.0;

  static Regime large_ball(double delta, double beta = 3.0) { return {RegimeKind::large_ball, delta, beta}; }
  static Regime intermediate(double a, double beta = 3.0) { return {RegimeKind::intermediate, a, beta}; }
  static Regime small_ball(double delta, double beta = 3.0) { return {RegimeKind::small_ball, delta, beta}; }

  void validate() const {
    if (!(beta > 2.0 && beta < 4.0)) throw ConfigError("beta must lie in (2,4), got " + std::to_string(beta));
    if (!(parameter > 0.0) || !std::isfinite(parameter))
      throw ConfigError(std::string(kind == RegimeKind::intermediate ? "a" : "delta") + " must be > 0");
  }

  /// Target value of c rho^beta at scale rho.
  [[nodiscard]] double critical_product(double rho) const {
    switch (kind) {
      case RegimeKind::large_ball: return std::pow(rho, -parameter);
      case RegimeKind::intermediate: return parameter;
      case RegimeKind::small_ball: return std::pow(rho, parameter);
    }
    return 0.0;
  }
};

struct SchedulePoint {
  double rho = 0.0;
  double c = 0.0;
  double n_rho = 1.0;
  /// beta/2 in the small-ball regime, NaN otherwise.
  double gamma = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr double kScheduleRelativeTolerance = 1e-12;

/// (rho, c(rho), n(rho)) for each rho; rho_list must be positive and strictly decreasing.
inline std::vector<SchedulePoint> schedule(const Regime& regime, const std::vector<double>& rho_list) {
  regime.validate();
  if (rho_list.empty()) throw ConfigError("rho list is empty");
  for (std::size_t i = 0; i < rho_list.size(); ++i) {
    if (!(rho_list[i] > 0.0)) throw ConfigError("rho values must be > 0");
    if (i > 0 && !(rho_list[i] < rho_list[i - 1])) throw ConfigError("rho values must be strictly decreasing");
  }
  const double b = regime.beta;
  std::vector<SchedulePoint> out;
  for (double rho : rho_list) {
    SchedulePoint p;
    p.rho = rho;
    switch (regime.kind) {
      case RegimeKind::large_ball:
        p.c = std::pow(rho, -b - regime.parameter);
        p.n_rho = std::sqrt(p.c * std::pow(rho, b));
        break;
      case RegimeKind::intermediate:
        p.c = regime.parameter * std::pow(rho, -b);
        break;
      case RegimeKind::small_ball:
        p.c = std::pow(rho, -b + regime.parameter);
        p.n_rho = std::pow(p.c * std::pow(rho, b), 2.0 / b);
        p.gamma = b / 2.0;
        break;
    }
    const double target = regime.critical_product(rho);
    if (std::abs(p.c * std::pow(rho, b) / target - 1.0) > kScheduleRelativeTolerance)
      throw NumericalError("schedule point at rho=" + std::to_string(rho) + " misses c rho^beta = " +
                           std::to_string(target));
    out.push_back(p);
  }
  return out;
}

enum class CenterSampler {
  /// Kostlan moduli; needs a measure invariant under rotations about 0.
  radial,
  /// Matrix eigenvalues; any measure, order bounded by kMaxMatrixOrder.
  matrix,
  /// radial when the measure allows it, matrix otherwise.
  automatic,
};

struct RunOptions {
  double truncation_R = 1.0;
  double alpha = 1.0;
  unsigned workers = 1;
  CenterSampler sampler = CenterSampler::automatic;
};

inline CenterSampler resolve_sampler(CenterSampler s, const std::vector<MeasureSpec>& mus) {
  const bool radial = std::all_of(mus.begin(), mus.end(), [](const MeasureSpec& m) { return m.is_radial(); });
  if (s == CenterSampler::automatic) return radial ? CenterSampler::radial : CenterSampler::matrix;
  if (s == CenterSampler::radial && !radial)
    throw ConfigError("the radial sampler needs every measure invariant under rotations about 0");
  return s;
}

/// Cost of one replicate: expected point count (radial) or matrix order (matrix).
/// Throws BudgetError when either exceeds its cap.
inline double replicate_cost(const SchedulePoint& p, double window_radius, const RunOptions& opt, CenterSampler s) {
  if (s == CenterSampler::radial) {
    const RadialGinibreSampler probe(p.c, window_radius, opt.alpha);
    return p.c * window_radius * window_radius;
  }
  GinibreConfig cfg;
  cfg.c = p.c;
  cfg.alpha = opt.alpha;
  return resolve_matrix_order(cfg, Window::disk(window_radius));
}

struct RegimeRun {
  Regime regime;
  std::vector<SchedulePoint> points;
  std::string mu_id;
  std::uint64_t root_seed = 0;
  RunOptions options;
  CenterSampler sampler = CenterSampler::radial;
  std::size_t replicates = 0;
  double window_radius = 0.0;
  /// samples[point][replicate], normalized fluctuations.
  std::vector<std::vector<double>> samples;
};

inline constexpr std::size_t kMinRegimeReplicates = 100;

/// Lane layout: point p uses lane 2p for centers and 2p+1 for marks.
inline std::uint64_t center_seed(std::uint64_t root, std::size_t point, std::size_t rep) {
  return stream_seed(root, 2 * point, rep);
}
inline std::uint64_t mark_seed(std::uint64_t root, std::size_t point, std::size_t rep) {
  return stream_seed(root, 2 * point + 1, rep);
}

namespace detail {

/// Calls body(i) for i in [0, n) on `workers` threads; each index runs once.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Field values of every measure on one marked realization, uncentered.
inline std::vector<double> realization_fields(const SchedulePoint& p, const std::vector<MeasureSpec>& mus,
                                              const RadiusLaw& law, const RunOptions& opt, CenterSampler s,
                                              double window_radius, const RadialGinibreSampler* radial,
                                              std::uint64_t centers, std::uint64_t marks) {
  std::vector<double> out;
  out.reserve(mus.size());
  Rng rng(marks);
  if (s == CenterSampler::radial) {
    const auto moduli = radial->sample(centers);
    std::vector<double> radii(moduli.size());
    for (auto& r : radii) {
      double u = 0.0;
      while (u <= 0.0) u = law.sample(rng);
      r = p.rho * u;
    }
    for (const auto& mu : mus) out.push_back(radial_field_value(moduli, radii, mu, opt.truncation_R));
    return out;
  }
  GinibreConfig cfg;
  cfg.c = p.c;
  cfg.alpha = opt.alpha;
  const auto pattern = sample_ginibre(cfg, Window::disk(window_radius), centers);
  const auto marked = mark_pattern(pattern, law, p.rho, rng);
  for (const auto& mu : mus) out.push_back(field_value(marked, mu, opt.truncation_R));
  return out;
}

inline double common_window_radius(const std::vector<MeasureSpec>& mus, double R) {
  double w = 0.0;
  for (const auto& mu : mus) w = std::max(w, required_window_radius(mu, R));
  return w;
}

}  // namespace detail

/// Uncentered truncated fields M_rho^R of every measure in `mus` on a shared
/// realization per replicate: out[rep][k] for measure k at parameters (p.c, p.rho).
/// Centers are observed on B(0, window_radius); 0 selects the smallest disk
/// that covers every measure. Realizations depend on the window.
inline std::vector<std::vector<double>> joint_fields(const SchedulePoint& p, std::size_t point_index,
                                                     const std::vector<MeasureSpec>& mus, const RadiusLaw& law,
                                                     std::size_t replicates, std::uint64_t root_seed,
                                                     const RunOptions& opt, double window_radius = 0.0) {
  if (mus.empty()) throw ConfigError("measure list is empty");
  if (!(opt.truncation_R > 0.0) || !std::isfinite(opt.truncation_R))
    throw ConfigError("truncation_R must be finite and > 0");
  const auto s = resolve_sampler(opt.sampler, mus);
  const double needed = detail::common_window_radius(mus, opt.truncation_R);
  if (window_radius != 0.0 && window_radius < needed)
    throw ConfigError("window radius " + std::to_string(window_radius) + " does not cover B(0, R_mu + R) = B(0, " +
                      std::to_string(needed) + ")");
  const double window = window_radius == 0.0 ? needed : window_radius;
  replicate_cost(p, window, opt, s);
  std::optional<RadialGinibreSampler> radial;
  if (s == CenterSampler::radial) radial.emplace(p.c, window, opt.alpha);
  std::vector<std::vector<double>> out(replicates);
  detail::parallel_for(replicates, opt.workers, [&](std::size_t i) {
    out[i] = detail::realization_fields(p, mus, law, opt, s, window, radial ? &*radial : nullptr,
                                        center_seed(root_seed, point_index, i), mark_seed(root_seed, point_index, i));
  });
  return out;
}

/// (M_rho^R - E M_rho^R) / n_rho for every measure, on the realizations of joint_fields.
inline std::vector<std::vector<double>> joint_fluctuations(const SchedulePoint& p, std::size_t point_index,
                                                           const std::vector<MeasureSpec>& mus, const RadiusLaw& law,
                                                           std::size_t replicates, std::uint64_t root_seed,
                                                           const RunOptions& opt, double window_radius = 0.0) {
  auto out = joint_fields(p, point_index, mus, law, replicates, root_seed, opt, window_radius);
  std::vector<double> centering;
  for (const auto& mu : mus) centering.push_back(truncated_expected_mass(mu, law, p.c, p.rho, opt.truncation_R));
  for (auto& v : out)
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (v[k] - centering[k]) / p.n_rho;
  return out;
}

/// Normalized fluctuation samples at one schedule point.
inline std::vector<double> run_point(const SchedulePoint& p, std::size_t point_index, const MeasureSpec& mu,
                                     const RadiusLaw& law, std::size_t replicates, std::uint64_t root_seed,
                                     const RunOptions& opt) {
  const auto joint = joint_fluctuations(p, point_index, {mu}, law, replicates, root_seed, opt);
  std::vector<double> out(joint.size());
  for (std::size_t i = 0; i < joint.size(); ++i) out[i] = joint[i][0];
  return out;
}

inline void check_regime_inputs(const Regime& regime, const RadiusLaw& law, std::size_t replicates) {
  regime.validate();
  if (law.beta() != regime.beta)
    throw ConfigError("radius law beta " + std::to_string(law.beta()) + " differs from regime beta " +
                      std::to_string(regime.beta));
  if (replicates < kMinRegimeReplicates)
    throw ConfigError("replicates must be >= " + std::to_string(kMinRegimeReplicates));
}

/// Runs every schedule point. Points are processed in order; replicates in parallel.
inline RegimeRun run_regime(const Regime& regime, const MeasureSpec& mu, const RadiusLaw& law,
                            const std::vector<double>& rho_list, std::size_t replicates, std::uint64_t root_seed,
                            const RunOptions& opt = {}) {
  check_regime_inputs(regime, law, replicates);
  RegimeRun run;
  run.regime = regime;
  run.points = schedule(regime, rho_list);
  run.mu_id = mu.describe();
  run.root_seed = root_seed;
  run.options = opt;
  run.sampler = resolve_sampler(opt.sampler, {mu});
  run.replicates = replicates;
  run.window_radius = required_window_radius(mu, opt.truncation_R);
  for (const auto& p : run.points) replicate_cost(p, run.window_radius, opt, run.sampler);
  for (std::size_t k = 0; k < run.points.size(); ++k)
    run.samples.push_back(run_point(run.points[k], k, mu, law, replicates, root_seed, opt));
  return run;
}

/// Joint fluctuation vectors for `mus` at schedule point `point_index` of `run`,
/// drawn from the same realizations as the run's own samples. Every measure
/// must fit the run's observation window.
inline std::vector<std::vector<double>> finite_dim_vector(const RegimeRun& run, std::size_t point_index,
                                                          const std::vector<MeasureSpec>& mus, const RadiusLaw& law) {
  if (point_index >= run.points.size()) throw ConfigError("schedule point index out of range");
  auto opt = run.options;
  opt.sampler = run.sampler;
  return joint_fluctuations(run.points[point_index], point_index, mus, law, run.replicates, run.root_seed, opt,
                            run.window_radius);
}

}  // namespace drbm
