#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drbm/errors.hpp"
#include "drbm/fredholm.hpp"
#include "drbm/ginibre.hpp"
#include "drbm/io.hpp"
#include "drbm/marks.hpp"
#include "drbm/mass_field.hpp"
#include "drbm/oracles.hpp"
#include "drbm/scaling.hpp"
#include "drbm/stats.hpp"

namespace drbm::cli {

using io::json;

enum ExitCode : int { kExitPass = 0, kExitStatisticalFailure = 1, kExitConfigError = 2 };

struct RunContext {
  std::filesystem::path out = "out";
  bool dry_run = false;
  std::ostream* log = &std::cout;
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"sample", "regime", "laplace", "kfunction", "spectrum", "oracle"};
  return names;
}

inline json unit_disk_json() {
  return io::measure_to_json(MeasureSpec::uniform_disk({0.0, 0.0}, 1.0, kPi));
}

inline json small_model_json() {
  FredholmModel m;
  m.c = 20.0;
  m.rho = 0.3;
  m.R = 2.0;
  return io::model_to_json(m);
}

/// Every key a command reads, with its default value.
inline json default_config(const std::string& command) {
  json j{{"schema_version", io::kSchemaVersion}, {"command", command}, {"seed", 1}};
  if (command == "sample") {
    j["process"] = "ginibre";
    j["c"] = 20.0;
    j["alpha"] = 1.0;
    j["backend"] = "hessenberg";
    j["window"] = io::window_to_json(Window::disk(2.0));
    j["replicates"] = 4;
    j["marks"] = nullptr;
  } else if (command == "regime") {
    j["regime"] = io::regime_to_json(Regime::intermediate(1.0));
    j["r0"] = 1.0;
    j["measure"] = unit_disk_json();
    j["rho"] = {0.2, 0.1, 0.05};
    j["replicates"] = 1000;
    j["truncation_R"] = 1.0;
    j["alpha"] = 1.0;
    j["sampler"] = "automatic";
    j["workers"] = 1;
    j["level"] = 0.01;
    j["oracle"] = {{"draws", 20000}, {"max_expected_atoms", 2e4}};
    j["tail_window"] = {0.99, 0.9999};
  } else if (command == "laplace") {
    j["model"] = small_model_json();
    j["theta"] = {0.1, 0.5, 1.0};
    j["mc_replicates"] = 20000;
    j["relative_tolerance"] = 0.02;
    j["refine_tolerance"] = 1e-3;
    j["sampler"] = "automatic";
    j["workers"] = 1;
  } else if (command == "kfunction") {
    j["c"] = 50.0;
    j["window"] = io::window_to_json(Window::disk(1.5));
    j["replicates"] = 300;
    json grid = json::array();
    for (int k = 1; k <= 28; ++k) grid.push_back(0.025 * k);
    j["r_grid"] = grid;
    j["band_multiplier"] = 3.0;
    j["workers"] = 1;
  } else if (command == "spectrum") {
    j["model"] = small_model_json();
    j["route"] = "automatic";
    j["refine"] = 1;
    j["trace_tolerance"] = 1e-4;
  } else if (command == "oracle") {
    j["kind"] = "gaussian";
    j["measure"] = unit_disk_json();
    j["beta"] = 3.0;
    j["a"] = 1.0;
    j["truncation_R"] = 1.0;
    j["draws"] = 10000;
    j["max_expected_atoms"] = 2e4;
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return j;
}

/// Overlays `user` on the defaults. Top-level keys replace wholesale except
/// the "oracle" block, which is merged key by key; unknown keys are rejected.
/// A run.json ({"config": ...}) is accepted in place of a bare config.
inline json resolve_config(const std::string& command, json user) {
  if (user.is_null()) user = json::object();
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  if (user.contains("config") && user["config"].is_object()) user = user["config"];
  auto cfg = default_config(command);
  if (user.contains("schema_version") && user["schema_version"] != io::kSchemaVersion)
    throw ConfigError("unsupported schema_version " + user["schema_version"].dump() + "; this build reads " +
                      std::to_string(io::kSchemaVersion));
  if (user.contains("command") && user["command"] != command)
    throw ConfigError("config is for command " + user["command"].dump() + ", not '" + command + "'");
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!cfg.contains(it.key())) throw ConfigError("unknown key '" + it.key() + "' for command '" + command + "'");
    if (it.key() == "oracle" && it.value().is_object()) {
      for (auto o = it.value().begin(); o != it.value().end(); ++o) {
        if (!cfg["oracle"].contains(o.key())) throw ConfigError("unknown key 'oracle." + o.key() + "'");
        cfg["oracle"][o.key()] = o.value();
      }
    } else {
      cfg[it.key()] = it.value();
    }
  }
  return cfg;
}

namespace detail {

inline std::uint64_t seed_of(const json& cfg) {
  if (!cfg["seed"].is_number_integer() || cfg["seed"].get<long long>() < 0)
    throw ConfigError("'seed' must be a nonnegative integer");
  return cfg["seed"].get<std::uint64_t>();
}

inline std::size_t count_of(const json& cfg, const std::string& key, std::size_t min = 1) {
  if (!cfg[key].is_number_integer() || cfg[key].get<long long>() < static_cast<long long>(min))
    throw ConfigError("'" + key + "' must be an integer >= " + std::to_string(min));
  return cfg[key].get<std::size_t>();
}

inline unsigned workers_of(const json& cfg) { return static_cast<unsigned>(count_of(cfg, "workers", 1)); }

inline double alpha_of(const json& cfg) {
  const double a = io::get_number(cfg, "alpha");
  if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alpha=" + io::format_double(a) + " is outside the admissible range (0,1]");
  return a;
}

inline std::vector<double> numbers_of(const json& cfg, const std::string& key) {
  if (!cfg[key].is_array() || cfg[key].empty()) throw ConfigError("'" + key + "' must be a nonempty array of numbers");
  std::vector<double> v;
  for (const auto& x : cfg[key]) {
    if (!x.is_number()) throw ConfigError("'" + key + "' must hold numbers only");
    v.push_back(x.get<double>());
  }
  return v;
}

inline std::string fixed(double x, int w = 12, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%*.*g", w, prec, x);
  return buf;
}

inline void write_run_json(const RunContext& ctx, const json& cfg, const json& derived = json::object()) {
  io::write_json(ctx.out / "run.json", {{"config", cfg}, {"derived", derived}});
}

/// Configs equal up to the worker count, which never changes results.
inline bool same_run(json a, json b) {
  a.erase("workers");
  b.erase("workers");
  return a == b;
}

}  // namespace detail

// ---- sample ----

inline int cmd_sample(const json& cfg, const RunContext& ctx) {
  const auto process = cfg["process"].get<std::string>();
  if (process != "ginibre" && process != "poisson")
    throw ConfigError("process must be 'ginibre' or 'poisson'");
  const double c = io::get_number(cfg, "c");
  if (!(c > 0.0)) throw ConfigError("c must be > 0");
  const double alpha = detail::alpha_of(cfg);
  if (process == "poisson" && alpha != 1.0) throw ConfigError("alpha applies to the ginibre process only");
  const auto window = io::window_from_json(cfg["window"]);
  const auto reps = detail::count_of(cfg, "replicates");
  const auto seed = detail::seed_of(cfg);
  const auto backend_name = cfg["backend"].get<std::string>();
  if (backend_name != "hessenberg" && backend_name != "dense")
    throw ConfigError("backend must be 'hessenberg' or 'dense'");
  std::optional<RadiusLaw> law;
  double rho = 0.0;
  if (!cfg["marks"].is_null()) {
    const auto& mk = cfg["marks"];
    law = io::law_from_json(mk.at("law"));
    rho = io::get_number(mk, "rho");
    if (!(rho > 0.0)) throw ConfigError("marks.rho must be > 0");
  }
  GinibreConfig g;
  g.c = c;
  g.alpha = alpha;
  g.backend = backend_name == "dense" ? GinibreBackend::dense : GinibreBackend::hessenberg;
  if (process == "ginibre") {
    const int n = resolve_matrix_order(g, window);
    *ctx.log << "matrix order N = " << n << " for c/alpha = " << c / alpha << " on " << window.describe() << "\n";
  } else {
    *ctx.log << "expected count " << c / kPi * window.area() << " on " << window.describe() << "\n";
  }
  if (ctx.dry_run) return kExitPass;

  std::vector<PointPattern> patterns;
  std::vector<MarkedPattern> marked;
  json summaries = json::array();
  for (std::size_t i = 0; i < reps; ++i) {
    const auto s = stream_seed(seed, 0, i);
    patterns.push_back(process == "ginibre" ? sample_ginibre(g, window, s) : sample_poisson(c / kPi, window, s));
    summaries.push_back(io::pattern_summary(patterns.back(), s));
    if (law) marked.push_back(mark_pattern(patterns.back(), *law, rho, stream_seed(seed, 1, i)));
  }
  if (law)
    io::write_file(ctx.out / "marked.csv", io::marked_csv(marked));
  else
    io::write_file(ctx.out / "points.csv", io::patterns_csv(patterns));
  io::write_json(ctx.out / "summary.json", {{"replicates", summaries}});
  detail::write_run_json(ctx, cfg);
  *ctx.log << "wrote " << reps << " pattern(s) to " << ctx.out.string() << "\n";
  return kExitPass;
}

// ---- oracle ----

struct OracleDraws {
  std::vector<double> values;
  json meta;
};

inline constexpr std::uint64_t kOracleLane = std::uint64_t{1} << 40;

/// Limit-law draws for `kind` in {gaussian, poisson, stable}. A null
/// truncation selects the untruncated limit.
inline OracleDraws draw_oracle(const std::string& kind, const MeasureSpec& mu, double beta, double a,
                               std::optional<double> truncation_R, double max_atoms, std::size_t draws,
                               std::uint64_t seed) {
  OracleDraws out;
  out.meta = {{"source", "oracle"}, {"kind", kind}, {"beta", beta}, {"draws", draws}, {"seed", seed}};
  out.values.resize(draws);
  Rng rng(stream_seed(seed, kOracleLane, 0));
  if (kind == "gaussian") {
    const auto o = make_gaussian_oracle(mu, beta, truncation_R.value_or(kNoTruncation));
    out.meta["variance"] = o.variance;
    for (auto& v : out.values) v = sample_W(o, rng);
  } else if (kind == "poisson") {
    PoissonOracleOptions opt;
    opt.R_big = truncation_R.value_or(0.0);
    opt.max_expected_atoms = max_atoms;
    const PoissonIntegralOracle o(mu, beta, a, opt);
    out.meta.update({{"a", a},
                     {"eps", o.eps()},
                     {"R_big", o.R_big()},
                     {"compensator", o.compensator()},
                     {"variance", o.variance()},
                     {"small_r_variance", o.small_r_variance()},
                     {"expected_atom_count", o.expected_atom_count()}});
    for (auto& v : out.values) v = sample_P(o, rng);
  } else if (kind == "stable") {
    const auto o = make_stable_oracle(mu, beta);
    out.meta.update({{"gamma", o.gamma}, {"sigma_gamma", o.sigma_gamma}, {"scale", o.scale}, {"skewness", o.skewness}});
    for (auto& v : out.values) v = sample_Z(o, rng);
  } else {
    throw ConfigError("oracle kind must be gaussian, poisson or stable");
  }
  return out;
}

inline std::optional<double> truncation_of(const json& cfg) {
  if (cfg["truncation_R"].is_null()) return std::nullopt;
  const double R = io::get_number(cfg, "truncation_R");
  if (!(R > 0.0)) throw ConfigError("truncation_R must be > 0 or null");
  return R;
}

inline int cmd_oracle(const json& cfg, const RunContext& ctx) {
  const auto mu = io::measure_from_json(cfg["measure"]);
  const double beta = io::get_number(cfg, "beta");
  if (!(beta > 2.0 && beta < 4.0))
    throw ConfigError("beta=" + io::format_double(beta) + " is outside the admissible range (2,4)");
  const double a = io::get_number(cfg, "a");
  if (!(a > 0.0)) throw ConfigError("a must be > 0");
  const auto draws = detail::count_of(cfg, "draws");
  const auto kind = cfg["kind"].get<std::string>();
  if (ctx.dry_run) {
    *ctx.log << "would draw " << draws << " " << kind << " oracle samples\n";
    return kExitPass;
  }
  const auto d = draw_oracle(kind, mu, beta, a, truncation_of(cfg), io::get_number(cfg, "max_expected_atoms"), draws,
                             detail::seed_of(cfg));
  io::write_file(ctx.out / "oracle.csv", io::samples_csv(d.values));
  io::write_json(ctx.out / "oracle.json", d.meta);
  detail::write_run_json(ctx, cfg);
  const auto m = sample_moments(d.values);
  *ctx.log << kind << " oracle: " << draws << " draws, mean " << m.mean << ", variance " << m.variance << "\n";
  return kExitPass;
}

// ---- regime ----

struct PointVerdict {
  SchedulePoint point;
  SampleMoments moments;
  KSReport ks;
  bool rejected = false;
};

inline int cmd_regime(const json& cfg, const RunContext& ctx) {
  const auto regime = io::regime_from_json(cfg["regime"]);
  const double r0 = io::get_number(cfg, "r0");
  RadiusLaw law;
  try {
    law = RadiusLaw(regime.beta, r0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto mu = io::measure_from_json(cfg["measure"]);
  const auto rhos = detail::numbers_of(cfg, "rho");
  const auto reps = detail::count_of(cfg, "replicates", kMinRegimeReplicates);
  RunOptions opt;
  opt.truncation_R = io::get_number(cfg, "truncation_R");
  opt.alpha = detail::alpha_of(cfg);
  opt.workers = detail::workers_of(cfg);
  opt.sampler = io::sampler_from_string(cfg["sampler"].get<std::string>());
  const double level = io::get_number(cfg, "level");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
  const auto seed = detail::seed_of(cfg);
  const auto tail = detail::numbers_of(cfg, "tail_window");
  if (tail.size() != 2) throw ConfigError("tail_window must be [q_lo, q_hi]");
  check_regime_inputs(regime, law, reps);

  const auto points = schedule(regime, rhos);
  const auto sampler = resolve_sampler(opt.sampler, {mu});
  opt.sampler = sampler;
  const double window = required_window_radius(mu, opt.truncation_R);
  auto& log = *ctx.log;
  log << "regime " << to_string(regime.kind) << ", beta " << regime.beta << ", sampler " << io::to_string(sampler)
      << ", window radius " << window << "\n";
  log << "         rho            c        n_rho         cost\n";
  json sched = json::array();
  for (const auto& p : points) {
    const double cost = replicate_cost(p, window, opt, sampler);
    log << detail::fixed(p.rho) << " " << detail::fixed(p.c) << " " << detail::fixed(p.n_rho) << " "
        << detail::fixed(cost) << "\n";
    sched.push_back({{"rho", p.rho}, {"c", p.c}, {"n_rho", p.n_rho}, {"cost", cost}});
  }
  log << "(cost: expected points per replicate for the radial sampler, matrix order N otherwise)\n";
  if (ctx.dry_run) return kExitPass;

  const auto run_path = ctx.out / "run.json";
  if (std::filesystem::exists(run_path)) {
    const auto prev = io::read_json(run_path);
    if (!prev.contains("config") || !detail::same_run(prev["config"], cfg))
      throw ConfigError(ctx.out.string() + " holds a different run; choose another --out");
  }
  json derived{{"schedule", sched}, {"sampler", io::to_string(sampler)}, {"window_radius", window}, {"mu", mu.describe()}};
  detail::write_run_json(ctx, cfg, derived);

  std::vector<std::vector<double>> samples(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto path = ctx.out / ("point_" + std::to_string(k) + ".csv");
    if (std::filesystem::exists(path)) {
      auto v = io::parse_samples_csv(io::read_file(path));
      if (v.size() == reps) {
        samples[k] = std::move(v);
        log << "point " << k << ": reusing " << path.string() << "\n";
        continue;
      }
    }
    samples[k] = run_point(points[k], k, mu, law, reps, seed, opt);
    io::write_file(path, io::samples_csv(samples[k]));
    log << "point " << k << ": sampled " << reps << " replicates\n";
  }

  // matched truncation for the Gaussian and Poisson limits; the stable limit is truncation-free
  OracleDraws oracle;
  const auto draws = detail::count_of(cfg["oracle"], "draws", 50);
  const double max_atoms = io::get_number(cfg["oracle"], "max_expected_atoms");
  switch (regime.kind) {
    case RegimeKind::large_ball:
      oracle = draw_oracle("gaussian", mu, regime.beta, 1.0, opt.truncation_R, max_atoms, draws, seed);
      break;
    case RegimeKind::intermediate:
      oracle = draw_oracle("poisson", mu, regime.beta, regime.parameter, opt.truncation_R, max_atoms, draws, seed);
      break;
    case RegimeKind::small_ball:
      oracle = draw_oracle("stable", mu, regime.beta, 1.0, std::nullopt, max_atoms, draws, seed);
      break;
  }
  io::write_file(ctx.out / "oracle.csv", io::samples_csv(oracle.values));

  // The stable limit keeps the jumps that truncation removes. Centering by
  // E[M^R] shifts the truncated field by their compensator
  // (E[M] - E[M^R]) / n_rho, which is subtracted before the comparison.
  std::vector<double> compensator(points.size(), 0.0);
  if (regime.kind == RegimeKind::small_ball)
    for (std::size_t k = 0; k < points.size(); ++k)
      compensator[k] = (expected_mass(mu, law, points[k].c, points[k].rho) -
                        truncated_expected_mass(mu, law, points[k].c, points[k].rho, opt.truncation_R)) /
                       points[k].n_rho;

  std::vector<PointVerdict> verdicts;
  std::vector<double> pvals;
  for (std::size_t k = 0; k < points.size(); ++k) {
    PointVerdict v;
    v.point = points[k];
    v.moments = sample_moments(samples[k]);
    auto compared = samples[k];
    for (double& x : compared) x -= compensator[k];
    v.ks = ks_two_sample(compared, oracle.values, level);
    pvals.push_back(v.ks.p_value);
    verdicts.push_back(v);
  }
  const auto reject = holm_reject(pvals, level);
  bool d_trend = true;
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    verdicts[k].rejected = reject[k];
    if (k > 0 && verdicts[k].ks.statistic > verdicts[k - 1].ks.statistic) d_trend = false;
  }
  const auto& last = verdicts.back();
  const bool smallest_ok = !last.rejected;
  bool ok = smallest_ok && d_trend;

  json report{{"oracle", oracle.meta}, {"points", json::array()}};
  log << "         rho            D      p-value  Holm   mean     variance     skewness\n";
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    const auto& v = verdicts[k];
    log << detail::fixed(v.point.rho) << " " << detail::fixed(v.ks.statistic) << " " << detail::fixed(v.ks.p_value)
        << "  " << (v.rejected ? "FAIL" : "pass") << " " << detail::fixed(v.moments.mean, 8) << " "
        << detail::fixed(v.moments.variance) << " " << detail::fixed(v.moments.skewness) << "\n";
    report["points"].push_back({{"rho", v.point.rho},
                                {"c", v.point.c},
                                {"n_rho", v.point.n_rho},
                                {"ks_statistic", v.ks.statistic},
                                {"p_value", v.ks.p_value},
                                {"holm_rejected", v.rejected},
                                {"mean", v.moments.mean},
                                {"variance", v.moments.variance},
                                {"skewness", v.moments.skewness},
                                {"compensator", compensator[k]}});
  }
  const auto om = sample_moments(oracle.values);
  log << "oracle: mean " << om.mean << ", variance " << om.variance << ", skewness " << om.skewness << "\n";
  log << "KS at smallest rho: " << (smallest_ok ? "pass" : "FAIL") << "; D nonincreasing: " << (d_trend ? "yes" : "NO")
      << "\n";
  report["smallest_rho_pass"] = smallest_ok;
  report["d_nonincreasing"] = d_trend;
  if (regime.kind == RegimeKind::large_ball) {
    const double se = std::sqrt(6.0 / static_cast<double>(reps));
    const bool skew_ok = std::abs(last.moments.skewness) <= 3.0 * se &&
                         std::abs(last.moments.skewness) <= std::abs(verdicts.front().moments.skewness) + se;
    log << "skewness at smallest rho within 3 SE of 0 and not above the first point: " << (skew_ok ? "yes" : "NO")
        << "\n";
    report["skewness_trend_ok"] = skew_ok;
    ok = ok && skew_ok;
  }
  if (regime.kind == RegimeKind::small_ball) {
    const double idx = tail_index_estimate(samples.back(), tail[0], tail[1]);
    const bool tail_ok = std::abs(idx - last.point.gamma) <= 0.15;
    log << "tail index at smallest rho: " << idx << " (gamma " << last.point.gamma << "): " << (tail_ok ? "pass" : "FAIL")
        << "\n";
    report["tail_index"] = idx;
    report["tail_index_pass"] = tail_ok;
    ok = ok && tail_ok;
  }
  report["pass"] = ok;
  io::write_json(ctx.out / "verdict.json", report);
  return ok ? kExitPass : kExitStatisticalFailure;
}

// ---- laplace ----

inline int cmd_laplace(const json& cfg, const RunContext& ctx) {
  const auto m = io::model_from_json(cfg["model"]);
  const auto thetas = detail::numbers_of(cfg, "theta");
  for (double t : thetas)
    if (!(t >= 0.0)) throw ConfigError("theta values must be >= 0");
  const auto reps = detail::count_of(cfg, "mc_replicates", 2);
  const double tol = io::get_number(cfg, "relative_tolerance");
  const double refine_tol = io::get_number(cfg, "refine_tolerance");
  RunOptions opt;
  opt.truncation_R = m.R;
  opt.workers = detail::workers_of(cfg);
  opt.sampler = io::sampler_from_string(cfg["sampler"].get<std::string>());
  const auto sampler = resolve_sampler(opt.sampler, {m.mu});
  opt.sampler = sampler;
  SchedulePoint p;
  p.rho = m.rho;
  p.c = m.c;
  const double cost = replicate_cost(p, m.outer_radius(), opt, sampler);
  *ctx.log << "sampler " << io::to_string(sampler) << ", cost per replicate " << cost << "\n";
  if (ctx.dry_run) return kExitPass;

  const auto fields = joint_fields(p, 0, {m.mu}, m.law, reps, detail::seed_of(cfg), opt);
  FredholmOptions fine;
  fine.refine = 2;
  fine.max_nodes = 12000;
  json rows = json::array();
  std::string csv = "theta,fredholm,monte_carlo,mc_se,relative_gap,refined,refine_gap\n";
  bool ok = true;
  *ctx.log << "       theta     fredholm  monte_carlo        mc_se relative_gap   refine_gap\n";
  for (double th : thetas) {
    const auto f = laplace_fredholm(th, m);
    const auto f2 = laplace_fredholm(th, m, fine);
    double s = 0.0, s2 = 0.0;
    for (const auto& v : fields) {
      const double e = std::exp(-th * v[0]);
      s += e;
      s2 += e * e;
    }
    const double n = static_cast<double>(reps);
    const double mc = s / n, se = std::sqrt(std::max(0.0, s2 / n - mc * mc) / n);
    const double gap = std::abs(f.value - mc) / mc;
    const double rgap = std::abs(f2.value / f.value - 1.0);
    const bool row_ok = gap <= tol && rgap <= refine_tol;
    ok = ok && row_ok;
    const auto d = log_laplace_decomposition(th, m);
    *ctx.log << detail::fixed(th) << " " << detail::fixed(f.value) << " " << detail::fixed(mc) << " "
             << detail::fixed(se) << " " << detail::fixed(gap) << " " << detail::fixed(rgap) << (row_ok ? "" : "  FAIL")
             << "\n";
    csv += io::format_double(th) + "," + io::format_double(f.value) + "," + io::format_double(mc) + "," +
           io::format_double(se) + "," + io::format_double(gap) + "," + io::format_double(f2.value) + "," +
           io::format_double(rgap) + "\n";
    json corr = json::array();
    for (std::size_t k = 0; k < std::min<std::size_t>(d.corrections.size(), 6); ++k) corr.push_back(d.corrections[k]);
    rows.push_back({{"theta", th},
                    {"fredholm", f.value},
                    {"log_fredholm", f.log_value},
                    {"monte_carlo", mc},
                    {"mc_se", se},
                    {"relative_gap", gap},
                    {"refined", f2.value},
                    {"refine_gap", rgap},
                    {"route", f.route == FredholmRoute::angular_modes ? "angular_modes" : "nystrom"},
                    {"nodes", f.nodes},
                    {"lambda_max", f.lambda_max},
                    {"poisson_part", d.poisson_part},
                    {"corrections", corr},
                    {"trace_square", d.traces.empty() ? 0.0 : d.traces[0]},
                    {"trace_square_bound", trace_square_bound(m, th)},
                    {"pass", row_ok}});
  }
  io::write_file(ctx.out / "laplace.csv", csv);
  io::write_json(ctx.out / "laplace.json", {{"rows", rows}, {"pass", ok}});
  detail::write_run_json(ctx, cfg);
  return ok ? kExitPass : kExitStatisticalFailure;
}

// ---- kfunction ----

inline int cmd_kfunction(const json& cfg, const RunContext& ctx) {
  const double c = io::get_number(cfg, "c");
  if (!(c > 0.0)) throw ConfigError("c must be > 0");
  const auto window = io::window_from_json(cfg["window"]);
  const auto reps = detail::count_of(cfg, "replicates", kMinKReplicates);
  const auto grid = detail::numbers_of(cfg, "r_grid");
  const double mult = io::get_number(cfg, "band_multiplier");
  GinibreConfig g;
  g.c = c;
  *ctx.log << "matrix order N = " << resolve_matrix_order(g, window) << "\n";
  if (grid.back() > 0.5 * window.circumradius()) throw ConfigError("r_grid exceeds a quarter of the window diameter");
  if (ctx.dry_run) return kExitPass;
  const auto seed = detail::seed_of(cfg);
  std::vector<PointPattern> pats(reps);
  drbm::detail::parallel_for(reps, detail::workers_of(cfg),
                             [&](std::size_t i) { pats[i] = sample_ginibre(g, window, stream_seed(seed, 0, i)); });
  const auto est = ripley_k_estimate(pats, grid);
  std::string csv = "r,k_hat,k_theoretical,gap,band\n";
  double worst = 0.0;
  *ctx.log << "           r        k_hat k_theoretical          gap         band\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double kt = k_theoretical(c, grid[k]);
    const double gap = est.k_hat[k] - kt;
    if (!std::isnan(est.band[k]) && est.band[k] > 0.0) worst = std::max(worst, std::abs(gap) / est.band[k]);
    *ctx.log << detail::fixed(grid[k]) << " " << detail::fixed(est.k_hat[k]) << " " << detail::fixed(kt, 13) << " "
             << detail::fixed(gap) << " " << detail::fixed(est.band[k]) << "\n";
    csv += io::format_double(grid[k]) + "," + io::format_double(est.k_hat[k]) + "," + io::format_double(kt) + "," +
           io::format_double(gap) + "," + (std::isnan(est.band[k]) ? std::string("nan") : io::format_double(est.band[k])) +
           "\n";
  }
  const bool ok = worst <= mult;
  *ctx.log << "sup |gap| / band = " << worst << " (limit " << mult << "): " << (ok ? "pass" : "FAIL") << "\n";
  io::write_file(ctx.out / "kfunction.csv", csv);
  io::write_json(ctx.out / "kfunction.json", {{"sup_gap_over_band", worst}, {"band_multiplier", mult}, {"pass", ok}});
  detail::write_run_json(ctx, cfg);
  return ok ? kExitPass : kExitStatisticalFailure;
}

// ---- spectrum ----

struct SpectrumSummary {
  SpectrumReport report;
  std::string route;
  double exact_trace = 0.0;
  std::size_t nodes = 0;
  [[nodiscard]] double trace_error() const { return std::abs(report.eigen_sum / exact_trace - 1.0); }
};

/// Spectrum of the mark-integrated kernel on B(0, R_mu + R), with the exact
/// trace (c/pi) |B(0, R_mu + R)| ∫_0^R f_rho.
inline SpectrumSummary model_spectrum(const FredholmModel& m, const std::string& route, int refine) {
  if (route != "automatic" && route != "nystrom" && route != "angular_modes")
    throw ConfigError("route must be automatic, nystrom or angular_modes");
  SpectrumSummary s;
  s.exact_trace = m.c * std::pow(m.outer_radius(), 2) * m.mark_mass();
  const bool modes = route == "angular_modes" || (route == "automatic" && m.mu.is_radial());
  if (modes) {
    if (!m.mu.is_radial()) throw ConfigError("the angular_modes route needs a measure invariant under rotations about 0");
    s.report = radial_spectrum_check(m, refine);
    s.route = "angular_modes";
    s.nodes = s.report.eigenvalues.size();
  } else {
    const auto grid = NystromGrid::for_kernel(m.c, m.outer_radius(), 3000 * refine * refine, refine);
    s.report = spectrum_check(discretize_marked_kernel(grid, m));
    s.route = "nystrom";
    s.nodes = grid.size();
  }
  return s;
}

inline int cmd_spectrum(const json& cfg, const RunContext& ctx) {
  const auto m = io::model_from_json(cfg["model"]);
  const auto route = cfg["route"].get<std::string>();
  const auto refine = static_cast<int>(detail::count_of(cfg, "refine"));
  const double tol = io::get_number(cfg, "trace_tolerance");
  if (ctx.dry_run) {
    *ctx.log << "outer radius " << m.outer_radius() << ", c " << m.c << "\n";
    return kExitPass;
  }
  const auto s = model_spectrum(m, route, refine);
  const bool ok = s.report.lambda_max < 1.0 && s.report.ok && s.trace_error() <= tol;
  *ctx.log << "route " << s.route << ", " << s.nodes << " nodes\n"
           << "lambda_max " << s.report.lambda_max << ", lambda_min " << s.report.lambda_min << "\n"
           << "trace " << s.report.eigen_sum << " vs exact " << s.exact_trace << " (relative error " << s.trace_error()
           << ", limit " << tol << ")\n"
           << (ok ? "pass" : "FAIL") << "\n";
  io::write_json(ctx.out / "spectrum.json", {{"route", s.route},
                                             {"nodes", s.nodes},
                                             {"lambda_max", s.report.lambda_max},
                                             {"lambda_min", s.report.lambda_min},
                                             {"eigen_sum", s.report.eigen_sum},
                                             {"diagonal_trace", s.report.diagonal_trace},
                                             {"exact_trace", s.exact_trace},
                                             {"trace_relative_error", s.trace_error()},
                                             {"pass", ok}});
  detail::write_run_json(ctx, cfg);
  return ok ? kExitPass : kExitStatisticalFailure;
}

inline int run_command(const std::string& command, const json& cfg, const RunContext& ctx) {
  if (command == "sample") return cmd_sample(cfg, ctx);
  if (command == "regime") return cmd_regime(cfg, ctx);
  if (command == "laplace") return cmd_laplace(cfg, ctx);
  if (command == "kfunction") return cmd_kfunction(cfg, ctx);
  if (command == "spectrum") return cmd_spectrum(cfg, ctx);
  if (command == "oracle") return cmd_oracle(cfg, ctx);
  throw ConfigError("unknown command '" + command + "'");
}

/// run_command with errors mapped to exit codes; messages go to `err`.
inline int run_guarded(const std::string& command, const json& cfg, const RunContext& ctx, std::ostream& err) {
  try {
    return run_command(command, cfg, ctx);
  } catch (const BudgetError& e) {
    err << "budget: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    err << "config: " << e.what() << "\n";
  } catch (const json::exception& e) {
    err << "config: " << e.what() << "\n";
  } catch (const NumericalError& e) {
    err << "numerics: " << e.what() << "\n";
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io: " << e.what() << "\n";
  }
  return kExitConfigError;
}

}  // namespace drbm::cli
