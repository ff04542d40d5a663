#include "twz/holo/synthesis.hpp"

#include "twz/core/rng.hpp"
#include "twz/core/stats.hpp"
#include "twz/holo/superposition.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace twz::holo {

using optics::cdouble;
using optics::ComplexField;
using optics::PhaseGrid;

namespace {

void check_targets(std::span<const TweezerTarget> targets, const SynthesisConfig& cfg,
                   SynthesisReport& report) {
  if (targets.empty()) {
    throw EmptyTargets();
  }
  const auto m = static_cast<double>(cfg.expanded_size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    if (!(t.x >= 0.0 && t.x < m && t.y >= 0.0 && t.y < m)) {
      throw Error("target " + std::to_string(i) + " lies outside the expanded grid");
    }
    if (!std::isfinite(t.weight) || t.weight < 0.0) {
      throw Error("target " + std::to_string(i) + " has an invalid weight");
    }
  }
  // Sweep in x so crowded scenes stay cheap.
  std::vector<std::size_t> order(targets.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return targets[a].x < targets[b].x; });
  const double min_sep = 3.0 * cfg.waist;
  std::size_t close_pairs = 0;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const auto& p = targets[order[a]];
      const auto& q = targets[order[b]];
      if (q.x - p.x >= min_sep) {
        break;
      }
      if (std::hypot(q.x - p.x, q.y - p.y) < min_sep) {
        ++close_pairs;
      }
    }
  }
  if (close_pairs > 0) {
    report.warnings.push_back(std::to_string(close_pairs) +
                              " target pairs closer than 3 waists");
  }
}

std::size_t fft_index(double centered_pixel, std::size_t m) {
  const auto p = static_cast<long long>(std::llround(centered_pixel));
  const auto mm = static_cast<long long>(m);
  return static_cast<std::size_t>((p % mm + mm) % mm);
}

/// Power inside an integer disk of the measurement radius around each target
/// pixel, read straight from an FFT-order field.
void window_powers(const ComplexField& field, std::span<const long long> px,
                   std::span<const long long> py, double radius, std::vector<double>& out) {
  const auto m = static_cast<long long>(field.size());
  const auto r = static_cast<long long>(std::floor(radius));
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < px.size(); ++i) {
    double sum = 0.0;
    for (long long dy = -r; dy <= r; ++dy) {
      const auto row = static_cast<std::size_t>(((py[i] + dy) % m + m) % m);
      for (long long dx = -r; dx <= r; ++dx) {
        if (static_cast<double>(dx * dx + dy * dy) > r2) {
          continue;
        }
        const auto col = static_cast<std::size_t>(((px[i] + dx) % m + m) % m);
        sum += std::norm(field(col, row));
      }
    }
    out[i] = sum;
  }
}

PhaseGrid arg_grid(const optics::Grid<cdouble>& slm) {
  PhaseGrid h(slm.size());
  for (std::size_t v = 0; v < slm.size(); ++v) {
    for (std::size_t u = 0; u < slm.size(); ++u) {
      h.set(u, v, std::arg(slm(u, v)));
    }
  }
  return h;
}

std::vector<optics::TweezerMeasurement> measure(const PhaseGrid& h,
                                                std::span<const TweezerTarget> targets,
                                                const SynthesisConfig& cfg,
                                                const optics::RealGrid& aperture) {
  const ComplexField field = optics::propagate(h, aperture, cfg.oversample);
  optics::MeasureOptions opts = cfg.measure;
  opts.throw_on_missing = false;
  return optics::measure_tweezers(field, targets, opts);
}

double max_position_error(std::span<const optics::TweezerMeasurement> meas,
                          std::span<const TweezerTarget> targets) {
  double worst = 0.0;
  for (std::size_t i = 0; i < meas.size(); ++i) {
    const double e = meas[i].missing ? std::numeric_limits<double>::infinity()
                                     : std::hypot(meas[i].x - targets[i].x,
                                                  meas[i].y - targets[i].y);
    worst = std::max(worst, e);
  }
  return worst;
}

/// Multiplies each weight by (⟨P/a²⟩ / (Pᵢ/aᵢ²))^η.
void update_weights(std::vector<double>& weights, std::span<const double> powers,
                    std::span<const TweezerTarget> targets, double eta) {
  std::vector<double> rel;
  rel.reserve(powers.size());
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double a2 = targets[i].weight * targets[i].weight;
    rel.push_back(a2 > 0.0 ? powers[i] / a2 : 0.0);
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (const double r : rel) {
    if (r > 0.0) {
      sum += r;
      ++count;
    }
  }
  if (count == 0) {
    return;
  }
  const double avg = sum / static_cast<double>(count);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (rel[i] > 0.0) {
      weights[i] *= std::pow(avg / rel[i], eta);
    }
  }
}

} // namespace

double uniformity(std::span<const double> powers) {
  if (powers.empty()) {
    throw Error("uniformity of an empty list");
  }
  const double m = mean(powers);
  return m > 0.0 ? stddev(powers) / m : 0.0;
}

void summarize(SynthesisReport& report, std::span<const TweezerTarget> targets,
               const SynthesisConfig& cfg) {
  std::vector<double> powers;
  powers.reserve(report.measurements.size());
  double eff = 0.0;
  for (const auto& m : report.measurements) {
    powers.push_back(m.power);
    eff += m.power;
  }
  report.uniformity = powers.empty() ? 0.0 : uniformity(powers);
  report.efficiency = std::clamp(eff, 0.0, 1.0);
  report.max_position_error = max_position_error(report.measurements, targets);
  report.converged = report.uniformity <= cfg.uniformity_threshold;
}

SynthesisResult wgs(std::span<const TweezerTarget> targets, const SynthesisConfig& cfg) {
  SynthesisResult result;
  check_targets(targets, cfg, result.report);
  const std::size_t n = cfg.slm_size;
  const std::size_t m = cfg.expanded_size();
  const optics::RealGrid aperture = optics::make_aperture(n, cfg.aperture);
  const double half = static_cast<double>(m) / 2.0;

  std::vector<std::size_t> pix(targets.size());
  std::vector<long long> px(targets.size());
  std::vector<long long> py(targets.size());
  std::vector<RampTerm> terms(targets.size());
  Rng rng = make_rng(cfg.seed, 0x575);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    const double rx = std::round(t.x);
    const double ry = std::round(t.y);
    px[i] = static_cast<long long>(fft_index(rx - half, m));
    py[i] = static_cast<long long>(fft_index(ry - half, m));
    pix[i] = static_cast<std::size_t>(py[i]) * m + static_cast<std::size_t>(px[i]);
    const double start = uniform(rng, -std::numbers::pi, std::numbers::pi);
    terms[i] = {rx, ry, std::polar(t.weight, t.phase.value_or(start))};
  }
  PhaseGrid h = superposition_hologram(terms, n, m);

  std::vector<double> weights(targets.size(), 1.0);
  std::vector<double> powers(targets.size());
  ComplexField field(m);
  optics::Grid<cdouble> slm(n);
  std::vector<cdouble> spot(targets.size());
  for (int k = 0; k < cfg.iterations; ++k) {
    optics::propagate_fft_order(h, aperture, cfg.oversample, field);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (k < cfg.phase_lock_after) {
        spot[i] = field.data()[pix[i]];
      }
    }
    if (cfg.uniformity_weighting) {
      window_powers(field, px, py, cfg.measure.window_radius, powers);
      update_weights(weights, powers, targets, cfg.weight_exponent);
    }
    std::fill(field.values().begin(), field.values().end(), cdouble{});
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double a = weights[i] * targets[i].weight;
      field.data()[pix[i]] += std::polar(a, std::arg(spot[i]));
    }
    optics::back_propagate_fft_order(field, n, slm);
    h = arg_grid(slm);
  }

  result.report.measurements = measure(h, targets, cfg, aperture);
  result.report.best_iteration = cfg.iterations;
  summarize(result.report, targets, cfg);
  result.hologram = std::move(h);
  return result;
}

SynthesisResult synthesize_pinned(std::span<const TweezerTarget> targets,
                                  const SynthesisConfig& cfg) {
  SynthesisResult result;
  check_targets(targets, cfg, result.report);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!targets[i].phase) {
      throw UnspecifiedPhase(i);
    }
  }
  const std::size_t n = cfg.slm_size;
  const std::size_t m = cfg.expanded_size();
  const optics::RealGrid aperture = optics::make_aperture(n, cfg.aperture);

  std::vector<RampTerm> terms(targets.size());
  std::vector<double> cmd_phase(targets.size());
  std::vector<double> weights(targets.size(), 1.0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    terms[i].x = targets[i].x;
    terms[i].y = targets[i].y;
    cmd_phase[i] = *targets[i].phase;
  }
  auto build = [&] {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      terms[i].coefficient = std::polar(weights[i] * targets[i].weight, cmd_phase[i]);
    }
    return superposition_hologram(terms, n, m);
  };

  PhaseGrid best = build();
  auto best_meas = measure(best, targets, cfg, aperture);
  double best_err = max_position_error(best_meas, targets);
  int best_iter = 0;

  auto meas = best_meas;
  const int iterations = cfg.phase_pinning ? cfg.iterations : 0;
  for (int k = 1; k <= iterations; ++k) {
    std::vector<double> powers(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
      powers[i] = meas[i].missing ? 0.0 : meas[i].power;
      if (meas[i].missing) {
        continue;
      }
      terms[i].x += targets[i].x - meas[i].x;
      terms[i].y += targets[i].y - meas[i].y;
      cmd_phase[i] += circular_diff(meas[i].phase, *targets[i].phase);
    }
    if (cfg.uniformity_weighting) {
      update_weights(weights, powers, targets, cfg.weight_exponent);
    }
    PhaseGrid h = build();
    meas = measure(h, targets, cfg, aperture);
    const double err = max_position_error(meas, targets);
    if (err < best_err) {
      best_err = err;
      best = std::move(h);
      best_meas = meas;
      best_iter = k;
    }
  }

  result.report.measurements = std::move(best_meas);
  result.report.best_iteration = best_iter;
  summarize(result.report, targets, cfg);
  result.hologram = std::move(best);
  return result;
}

std::vector<ExtractedPhase> extract_phases_from_field(const ComplexField& field,
                                                      std::span<const cdouble> coords) {
  const auto m = static_cast<double>(field.size());
  double peak = 0.0;
  for (const cdouble& e : field.values()) {
    peak = std::max(peak, std::norm(e));
  }
  std::vector<ExtractedPhase> out;
  out.reserve(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double x = coords[i].real();
    const double y = coords[i].imag();
    if (!(x >= 0.0 && x <= m - 1.0 && y >= 0.0 && y <= m - 1.0)) {
      throw Error("coordinate " + std::to_string(i) + " lies outside the expanded grid");
    }
    const cdouble e = optics::sample_bilinear(field, x, y);
    out.push_back({wrap_phase(std::arg(e)), std::norm(e) < 1e-3 * peak});
  }
  return out;
}

std::vector<ExtractedPhase> extract_phases(const PhaseGrid& hologram,
                                           std::span<const cdouble> coords,
                                           std::size_t oversample,
                                           const optics::Aperture& aperture) {
  const ComplexField field = optics::propagate(
      hologram, optics::make_aperture(hologram.size(), aperture), oversample);
  return extract_phases_from_field(field, coords);
}

std::string report_to_json(const SynthesisReport& report) {
  nlohmann::json j;
  j["uniformity"] = report.uniformity;
  j["efficiency"] = report.efficiency;
  j["converged"] = report.converged;
  j["best_iteration"] = report.best_iteration;
  j["max_position_error"] = report.max_position_error;
  j["warnings"] = report.warnings;
  auto& arr = j["tweezers"] = nlohmann::json::array();
  for (const auto& m : report.measurements) {
    arr.push_back({{"x", m.x}, {"y", m.y}, {"phase", m.phase}, {"power", m.power},
                   {"missing", m.missing}});
  }
  return j.dump(2);
}

PhaseGrid PinnedGenerator::generate(std::span<const TweezerTarget> targets) {
  return synthesize_pinned(targets, cfg_).hologram;
}

PhaseGrid WgsGenerator::generate(std::span<const TweezerTarget> targets) {
  return wgs(targets, cfg_).hologram;
}

} // namespace twz::holo
