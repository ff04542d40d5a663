#include "twz/engine/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace twz::engine {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) {
      throw ConfigError(where_ + " must be an object");
    }
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) {
      return;
    }
    for (const auto& [key, value] : j_.items()) {
      if (seen_.count(key) == 0) {
        throw ConfigError(fmt::format("unknown key '{}{}'", prefix(), key));
      }
    }
  }
  Fields(const Fields&) = delete;
  Fields& operator=(const Fields&) = delete;

  template <typename T> void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("bad value for '{}{}': {}", prefix(), key, e.what()));
    }
  }
  [[nodiscard]] const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  [[nodiscard]] std::string prefix() const { return where_.empty() ? "" : where_ + "."; }

private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ordered_json to_json(const Scenario& s) {
  ordered_json g;
  const char* kinds[] = {"square", "sites", "layered"};
  g["kind"] = kinds[static_cast<int>(s.geometry.kind)];
  g["n"] = s.geometry.n;
  g["sites_path"] = s.geometry.sites_path;
  g["layers"] = s.geometry.layers;
  g["twist_deg"] = s.geometry.twist_deg;
  g["fresnel"] = s.geometry.fresnel;

  ordered_json p;
  p["theta"] = s.physics.theta;
  p["response_time_ms"] = s.physics.response_time_ms;
  p["refresh_ms"] = s.physics.refresh_ms;
  p["trap_period_ms"] = s.physics.trap_period_ms;
  p["steps_per_period"] = s.physics.steps_per_period;
  p["escape_radius"] = s.physics.escape_radius;

  ordered_json c;
  c["max_step"] = s.constraints.max_step;
  c["max_phase_step"] = s.constraints.max_phase_step;

  ordered_json gen;
  gen["backend"] = s.generator.backend;
  gen["endpoint"] = s.generator.endpoint;
  gen["slm_size"] = s.generator.slm_size;
  gen["oversample"] = s.generator.oversample;
  gen["iterations"] = s.generator.iterations;
  gen["verify"] = s.generator.verify;
  gen["verify_tolerance"] = s.generator.verify_tolerance;
  gen["timeout_ms"] = s.generator.timeout_ms;

  ordered_json sv;
  sv["model"] = s.survival.model;
  sv["per_round"] = s.survival.per_round;
  sv["calibration_dr"] = s.survival.calibration_dr;
  sv["calibration_dphi"] = s.survival.calibration_dphi;
  sv["calibration_samples"] = s.survival.calibration_samples;
  sv["calibration_steps"] = s.survival.calibration_steps;

  ordered_json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["geometry"] = g;
  j["reservoir_n"] = s.reservoir_n;
  j["spacing_px"] = s.spacing_px;
  j["waist_px"] = s.waist_px;
  j["loading"] = s.loading;
  j["physics"] = p;
  j["constraints"] = c;
  j["min_steps"] = s.min_steps;
  j["generator"] = gen;
  j["survival"] = sv;
  j["matching"] = s.matching;
  j["block_size"] = s.block_size;
  j["decollide"] = s.decollide;
  j["clearance"] = s.clearance;
  j["rounds"] = s.rounds;
  j["reserve"] = s.reserve;
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["imaging_error"] = s.imaging_error;
  j["trace"] = s.trace;
  return j;
}

Scenario from_json(const json& j) {
  Scenario s;
  Fields f(j, "");
  f.get("schema_version", s.schema_version);
  if (s.schema_version != kSchemaVersion) {
    throw ConfigError(fmt::format("unsupported schema_version {}", s.schema_version));
  }
  f.get("name", s.name);
  if (const json* g = f.child("geometry")) {
    Fields gf(*g, "geometry");
    std::string kind = "square";
    gf.get("kind", kind);
    if (kind == "square") {
      s.geometry.kind = Geometry::Kind::Square;
    } else if (kind == "sites") {
      s.geometry.kind = Geometry::Kind::Sites;
    } else if (kind == "layered") {
      s.geometry.kind = Geometry::Kind::Layered;
    } else {
      throw ConfigError("geometry.kind must be square, sites or layered (got '" + kind + "')");
    }
    gf.get("n", s.geometry.n);
    gf.get("sites_path", s.geometry.sites_path);
    gf.get("layers", s.geometry.layers);
    gf.get("twist_deg", s.geometry.twist_deg);
    gf.get("fresnel", s.geometry.fresnel);
  }
  f.get("reservoir_n", s.reservoir_n);
  f.get("spacing_px", s.spacing_px);
  f.get("waist_px", s.waist_px);
  f.get("loading", s.loading);
  if (const json* p = f.child("physics")) {
    Fields pf(*p, "physics");
    pf.get("theta", s.physics.theta);
    pf.get("response_time_ms", s.physics.response_time_ms);
    pf.get("refresh_ms", s.physics.refresh_ms);
    pf.get("trap_period_ms", s.physics.trap_period_ms);
    pf.get("steps_per_period", s.physics.steps_per_period);
    pf.get("escape_radius", s.physics.escape_radius);
  }
  if (const json* c = f.child("constraints")) {
    Fields cf(*c, "constraints");
    cf.get("max_step", s.constraints.max_step);
    cf.get("max_phase_step", s.constraints.max_phase_step);
  }
  f.get("min_steps", s.min_steps);
  if (const json* g = f.child("generator")) {
    Fields gf(*g, "generator");
    gf.get("backend", s.generator.backend);
    gf.get("endpoint", s.generator.endpoint);
    gf.get("slm_size", s.generator.slm_size);
    gf.get("oversample", s.generator.oversample);
    gf.get("iterations", s.generator.iterations);
    gf.get("verify", s.generator.verify);
    gf.get("verify_tolerance", s.generator.verify_tolerance);
    gf.get("timeout_ms", s.generator.timeout_ms);
  }
  if (const json* v = f.child("survival")) {
    Fields vf(*v, "survival");
    vf.get("model", s.survival.model);
    vf.get("per_round", s.survival.per_round);
    vf.get("calibration_dr", s.survival.calibration_dr);
    vf.get("calibration_dphi", s.survival.calibration_dphi);
    vf.get("calibration_samples", s.survival.calibration_samples);
    vf.get("calibration_steps", s.survival.calibration_steps);
  }
  f.get("matching", s.matching);
  f.get("block_size", s.block_size);
  f.get("decollide", s.decollide);
  f.get("clearance", s.clearance);
  f.get("rounds", s.rounds);
  f.get("reserve", s.reserve);
  f.get("trials", s.trials);
  f.get("seed", s.seed);
  f.get("imaging_error", s.imaging_error);
  f.get("trace", s.trace);
  return s;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
}

} // namespace

void Scenario::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (geometry.kind != Geometry::Kind::Sites && geometry.n == 0) {
    fail("geometry.n must be positive");
  }
  if (geometry.kind == Geometry::Kind::Sites && geometry.sites_path.empty()) {
    fail("geometry.sites_path is required for kind 'sites'");
  }
  if (geometry.layers == 0) {
    fail("geometry.layers must be positive");
  }
  if (reservoir_n == 0 || !(spacing_px > 0.0) || !(waist_px > 0.0)) {
    fail("reservoir_n, spacing_px and waist_px must be positive");
  }
  if (!(loading >= 0.0 && loading <= 1.0)) {
    fail("loading must be in [0, 1]");
  }
  if (!(imaging_error >= 0.0 && imaging_error < 0.5)) {
    fail("imaging_error must be in [0, 0.5)");
  }
  if (rounds != 1 && rounds != 2) {
    fail("rounds must be 1 or 2");
  }
  if (matching != "block" && matching != "exact") {
    fail("matching must be 'block' or 'exact'");
  }
  if (!(block_size > 0.0) || !(clearance > 0.0)) {
    fail("block_size and clearance must be positive");
  }
  const std::string& m = survival.model;
  if (m != "perfect" && m != "per_round" && m != "logistic" && m != "dynamics") {
    fail("survival.model must be perfect, per_round, logistic or dynamics");
  }
  if (!(survival.per_round >= 0.0 && survival.per_round <= 1.0)) {
    fail("survival.per_round must be in [0, 1]");
  }
  if (m == "logistic" && (survival.calibration_samples < 100 || survival.calibration_steps == 0)) {
    fail("logistic calibration needs >= 100 samples and >= 1 step");
  }
  const std::string& b = generator.backend;
  if (b != "none" && b != "classical-pinned" && b != "classical-wgs" && b != "external") {
    fail("generator.backend must be none, classical-pinned, classical-wgs or external");
  }
  if (b == "external" && generator.endpoint.empty()) {
    fail("generator.endpoint is required for the external backend");
  }
  if (!(generator.verify_tolerance > 0.0) || generator.timeout_ms <= 0) {
    fail("generator.verify_tolerance and timeout_ms must be positive");
  }
  try {
    physics.validate();
    constraints.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

std::size_t Scenario::layer_count() const noexcept {
  return geometry.kind == Geometry::Kind::Layered ? geometry.layers : 1;
}

double Scenario::fresnel(std::size_t layer) const noexcept {
  return layer < geometry.fresnel.size() ? geometry.fresnel[layer] : 0.0;
}

Scenario scenario_from_json(const std::string& text) {
  Scenario s = from_json(parse_text(text));
  s.validate();
  return s;
}

std::string scenario_to_json(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

namespace {

json apply_to_json(json j, const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [key, value] : overrides) {
    json* node = &j;
    std::stringstream path(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(path, part, '.')) {
      parts.push_back(part);
    }
    if (parts.empty()) {
      throw ConfigError("empty override key");
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      node = &(*node)[parts[i]];
    }
    json v;
    try {
      v = json::parse(value);
    } catch (const json::parse_error&) {
      v = value;
    }
    (*node)[parts.back()] = v;
  }
  return j;
}

} // namespace

Scenario apply_overrides(const Scenario& s,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  Scenario out = from_json(apply_to_json(json::parse(to_json(s).dump()), overrides));
  out.validate();
  return out;
}

Scenario load_scenario(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("scenario not found: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  json j = apply_to_json(parse_text(buf.str()), overrides);
  Scenario s = from_json(j);
  if (s.geometry.kind == Geometry::Kind::Sites && !s.geometry.sites_path.empty()) {
    const std::filesystem::path p(s.geometry.sites_path);
    if (p.is_relative()) {
      s.geometry.sites_path = (std::filesystem::path(path).parent_path() / p).string();
    }
  }
  s.validate();
  return s;
}

std::vector<LayerGeometry> build_layers(const Scenario& s) {
  s.validate();
  std::vector<LayerGeometry> out;
  const Vec2 origin{0.0, 0.0};
  if (s.geometry.kind == Geometry::Kind::Sites) {
    const match::SiteLattice all = match::read_lattice_file(s.geometry.sites_path, 1.0);
    for (int l = 0; l < all.layers; ++l) {
      LayerGeometry g;
      g.targets.spacing = 1.0;
      for (const std::size_t i : all.layer_indices(l)) {
        g.targets.sites.push_back(all.sites[i]);
      }
      g.reservoir = match::square_lattice(s.reservoir_n, 1.0, origin, l);
      out.push_back(std::move(g));
    }
    return out;
  }
  const double twist = s.geometry.twist_deg * std::numbers::pi / 180.0;
  for (std::size_t l = 0; l < s.layer_count(); ++l) {
    const int layer = static_cast<int>(l);
    LayerGeometry g{match::square_lattice(s.geometry.n, 1.0, origin, layer),
                    match::square_lattice(s.reservoir_n, 1.0, origin, layer)};
    const double angle = twist * static_cast<double>(l);
    if (angle != 0.0) {
      for (match::Site& site : g.targets.sites) {
        const Vec2 r = rotate({site.x, site.y}, origin, angle);
        site.x = r.x;
        site.y = r.y;
      }
      for (match::Site& site : g.reservoir.sites) {
        const Vec2 r = rotate({site.x, site.y}, origin, angle);
        site.x = r.x;
        site.y = r.y;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

} // namespace twz::engine
