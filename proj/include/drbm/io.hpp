#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "drbm/errors.hpp"
#include "drbm/fredholm.hpp"
#include "drbm/geometry.hpp"
#include "drbm/marks.hpp"
#include "drbm/measures.hpp"
#include "drbm/radius_law.hpp"
#include "drbm/scaling.hpp"

namespace drbm::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline double get_number(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_number()) throw ConfigError("'" + key + "' must be a number");
  return j[key].get<double>();
}

inline PlanePoint point_from_json(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
    throw ConfigError("'" + key + "' must be a two-element array [re, im]");
  return {j[key][0].get<double>(), j[key][1].get<double>()};
}

// ---- measures ----

inline json part_to_json(const MeasurePart& part) {
  if (const auto* u = std::get_if<UniformDisk>(&part))
    return {{"kind", "uniform_disk"}, {"center", {u->center.re, u->center.im}}, {"radius", u->radius}, {"mass", u->mass}};
  if (const auto* u = std::get_if<UniformRect>(&part))
    return {{"kind", "uniform_rect"},
            {"bounds", {u->bounds.xmin, u->bounds.xmax, u->bounds.ymin, u->bounds.ymax}},
            {"mass", u->mass}};
  const auto& g = std::get<GaussianBump>(part);
  return {{"kind", "gaussian_bump"}, {"center", {g.center.re, g.center.im}}, {"bandwidth", g.bandwidth}, {"mass", g.mass}};
}

inline json measure_to_json(const MeasureSpec& mu) {
  const auto& parts = mu.parts();
  if (parts.size() == 1 && parts[0].first == 1.0) return part_to_json(parts[0].second);
  json terms = json::array();
  for (const auto& [coef, part] : parts) terms.push_back({{"coef", coef}, {"measure", part_to_json(part)}});
  return {{"kind", "combination"}, {"terms", terms}};
}

inline MeasureSpec measure_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("measure must be an object with a 'kind'");
  const auto kind = j["kind"].get<std::string>();
  try {
    if (kind == "uniform_disk")
      return MeasureSpec::uniform_disk(point_from_json(j, "center"), get_number(j, "radius"), get_number(j, "mass"));
    if (kind == "uniform_rect") {
      const auto& b = j.at("bounds");
      if (!b.is_array() || b.size() != 4) throw ConfigError("'bounds' must be [xmin, xmax, ymin, ymax]");
      return MeasureSpec::uniform_rect({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                                       get_number(j, "mass"));
    }
    if (kind == "gaussian_bump")
      return MeasureSpec::gaussian_bump(point_from_json(j, "center"), get_number(j, "bandwidth"),
                                        get_number(j, "mass"));
    if (kind == "combination") {
      std::vector<std::pair<double, MeasureSpec>> terms;
      for (const auto& t : j.at("terms")) terms.emplace_back(get_number(t, "coef"), measure_from_json(t.at("measure")));
      return MeasureSpec::linear_combination(terms);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed measure: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown measure kind '" + kind + "'");
}

// ---- laws, windows, regimes, models ----

inline json law_to_json(const RadiusLaw& law) { return {{"beta", law.beta()}, {"r0", law.r0()}}; }

inline RadiusLaw law_from_json(const json& j) {
  const double beta = get_number(j, "beta");
  if (!(beta > 2.0 && beta < 4.0))
    throw ConfigError("beta=" + format_double(beta) + " is outside the admissible range (2,4)");
  try {
    return RadiusLaw(beta, j.contains("r0") ? get_number(j, "r0") : 1.0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline json window_to_json(const Window& w) {
  if (w.is_disk()) {
    const auto& d = w.as_disk();
    return {{"shape", "disk"}, {"center", {d.center.re, d.center.im}}, {"radius", d.radius}};
  }
  const auto& r = w.as_rect();
  return {{"shape", "rect"}, {"bounds", {r.xmin, r.xmax, r.ymin, r.ymax}}};
}

inline Window window_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::string>();
  try {
    if (shape == "disk")
      return Window::disk(j.contains("center") ? point_from_json(j, "center") : PlanePoint{0.0, 0.0},
                          get_number(j, "radius"));
    if (shape == "rect") {
      const auto& b = j.at("bounds");
      return Window::rectangle(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>());
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown window shape '" + shape + "'; expected disk or rect");
}

inline json regime_to_json(const Regime& r) {
  return {{"kind", to_string(r.kind)},
          {r.kind == RegimeKind::intermediate ? "a" : "delta", r.parameter},
          {"beta", r.beta}};
}

inline Regime regime_from_json(const json& j) {
  Regime r;
  r.kind = regime_kind_from_string(j.at("kind").get<std::string>());
  const char* key = r.kind == RegimeKind::intermediate ? "a" : "delta";
  r.parameter = get_number(j, key);
  r.beta = get_number(j, "beta");
  if (!(r.beta > 2.0 && r.beta < 4.0))
    throw ConfigError("beta=" + format_double(r.beta) + " is outside the admissible range (2,4)");
  if (!(r.parameter > 0.0)) throw ConfigError(std::string(key) + " must be > 0");
  return r;
}

inline json model_to_json(const FredholmModel& m) {
  return {{"c", m.c}, {"rho", m.rho}, {"R", m.R}, {"measure", measure_to_json(m.mu)}, {"law", law_to_json(m.law)}};
}

inline FredholmModel model_from_json(const json& j) {
  FredholmModel m;
  m.c = get_number(j, "c");
  m.rho = get_number(j, "rho");
  m.R = get_number(j, "R");
  m.mu = measure_from_json(j.at("measure"));
  m.law = law_from_json(j.at("law"));
  m.validate();
  return m;
}

inline std::string to_string(CenterSampler s) {
  switch (s) {
    case CenterSampler::radial: return "radial";
    case CenterSampler::matrix: return "matrix";
    case CenterSampler::automatic: return "automatic";
  }
  return "automatic";
}

inline CenterSampler sampler_from_string(const std::string& s) {
  if (s == "radial") return CenterSampler::radial;
  if (s == "matrix") return CenterSampler::matrix;
  if (s == "automatic") return CenterSampler::automatic;
  throw ConfigError("unknown sampler '" + s + "'; expected radial, matrix or automatic");
}

// ---- files ----

/// Writes through a temporary sibling and renames, so readers never see a partial file.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

/// `replicate_id,value` rows.
inline std::string samples_csv(const std::vector<double>& values) {
  std::string out = "replicate_id,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) out += std::to_string(i) + "," + format_double(values[i]) + "\n";
  return out;
}

inline std::vector<double> parse_samples_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "replicate_id,value") throw ConfigError("samples CSV lacks its header");
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("malformed samples CSV row: " + line);
    if (std::stoul(line.substr(0, comma)) != out.size()) throw ConfigError("samples CSV rows out of order");
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  return out;
}

/// `replicate_id,re,im` rows for a batch of patterns.
inline std::string patterns_csv(const std::vector<PointPattern>& patterns) {
  std::string out = "replicate_id,re,im\n";
  for (std::size_t i = 0; i < patterns.size(); ++i)
    for (const auto& p : patterns[i].points)
      out += std::to_string(i) + "," + format_double(p.re) + "," + format_double(p.im) + "\n";
  return out;
}

/// `replicate_id,re,im,radius` rows for a batch of marked patterns.
inline std::string marked_csv(const std::vector<MarkedPattern>& patterns) {
  std::string out = "replicate_id,re,im,radius\n";
  for (std::size_t i = 0; i < patterns.size(); ++i)
    for (const auto& it : patterns[i].items)
      out += std::to_string(i) + "," + format_double(it.center.re) + "," + format_double(it.center.im) + "," +
             format_double(it.radius) + "\n";
  return out;
}

inline json pattern_summary(const PointPattern& p, std::uint64_t seed) {
  return {{"count", p.size()}, {"c", p.c}, {"alpha", p.alpha}, {"window", window_to_json(p.window)}, {"seed", seed}};
}

}  // namespace drbm::io
