#include "twz/dataset/sample.hpp"

#include "twz/core/binary_io.hpp"
#include "twz/core/parallel.hpp"
#include "twz/core/rng.hpp"
#include "twz/core/stats.hpp"
#include "twz/match/lattice.hpp"
#include "twz/match/matching.hpp"
#include "twz/optics/fft.hpp"
#include "twz/traj/plan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

namespace twz::dataset {

using optics::cdouble;
using optics::ComplexField;
using optics::RealGrid;

namespace {

/// Centered unitary DFT of an n×n centered-order array, in place.
void centered_transform(ComplexField& f, optics::fft::Direction dir) {
  const std::size_t n = f.size();
  const std::size_t h = n / 2;
  ComplexField work(n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      work((x + n - h) % n, (y + n - h) % n) = f(x, y);
    }
  }
  optics::fft::transform(work.data(), n, dir);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      f(x, y) = scale * work((x + n - h) % n, (y + n - h) % n);
    }
  }
}

RealGrid to_float_grid(const RealGrid& g) {
  RealGrid out(g.size());
  for (std::size_t i = 0; i < g.values().size(); ++i) {
    out.values()[i] = static_cast<float>(g.values()[i]);
  }
  return out;
}

} // namespace

InputImages encode_inputs(std::span<const TweezerRecord> tweezers, std::size_t n,
                          std::size_t oversample) {
  if (n == 0 || oversample == 0) {
    throw Error("encode_inputs needs a positive size and oversampling factor");
  }
  InputImages img{RealGrid(n), RealGrid(n)};
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(n * n, kNone);
  const double s = static_cast<double>(oversample);
  for (std::size_t i = 0; i < tweezers.size(); ++i) {
    const TweezerRecord& t = tweezers[i];
    const double u = static_cast<double>(t.x) / s;
    const double v = static_cast<double>(t.y) / s;
    if (!(u >= 0.0 && v >= 0.0 && u < static_cast<double>(n) && v < static_cast<double>(n))) {
      throw Error(fmt::format("tweezer {} at ({}, {}) lies outside the {}x{} input", i, t.x, t.y,
                              n, n));
    }
    const auto x0 = static_cast<std::size_t>(std::floor(u));
    const auto y0 = static_cast<std::size_t>(std::floor(v));
    const double fx = u - static_cast<double>(x0);
    const double fy = v - static_cast<double>(y0);
    const std::array<std::array<double, 3>, 4> taps{{{0, 0, (1 - fx) * (1 - fy)},
                                                     {1, 0, fx * (1 - fy)},
                                                     {0, 1, (1 - fx) * fy},
                                                     {1, 1, fx * fy}}};
    for (const auto& [dx, dy, w] : taps) {
      if (w == 0.0) {
        continue;
      }
      const std::size_t px = x0 + static_cast<std::size_t>(dx);
      const std::size_t py = y0 + static_cast<std::size_t>(dy);
      if (px >= n || py >= n) {
        throw Error(fmt::format("footprint of tweezer {} leaves the {}x{} input", i, n, n));
      }
      std::size_t& o = owner[py * n + px];
      if (o != kNone && o != i && img.phase(px, py) != static_cast<double>(t.phase)) {
        throw PhaseConflict(o, i, px, py);
      }
      o = i;
      img.amplitude(px, py) += static_cast<double>(t.amplitude) * w;
      img.phase(px, py) = t.phase;
    }
  }
  return img;
}

std::vector<TweezerRecord> decode_inputs(const InputImages& images, std::size_t oversample) {
  const std::size_t n = images.amplitude.size();
  std::vector<std::uint8_t> seen(n * n, 0);
  std::vector<TweezerRecord> out;
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      if (seen[y * n + x] != 0 || images.amplitude(x, y) == 0.0) {
        continue;
      }
      double sw = 0.0;
      double sx = 0.0;
      double sy = 0.0;
      stack.assign(1, {x, y});
      seen[y * n + x] = 1;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        const double w = images.amplitude(cx, cy);
        sw += w;
        sx += w * static_cast<double>(cx);
        sy += w * static_cast<double>(cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const auto nx = static_cast<std::ptrdiff_t>(cx) + dx;
            const auto ny = static_cast<std::ptrdiff_t>(cy) + dy;
            if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(n) ||
                ny >= static_cast<std::ptrdiff_t>(n)) {
              continue;
            }
            const auto ux = static_cast<std::size_t>(nx);
            const auto uy = static_cast<std::size_t>(ny);
            if (seen[uy * n + ux] == 0 && images.amplitude(ux, uy) != 0.0 &&
                images.phase(ux, uy) == images.phase(cx, cy)) {
              seen[uy * n + ux] = 1;
              stack.emplace_back(ux, uy);
            }
          }
        }
      }
      const double s = static_cast<double>(oversample);
      out.push_back({static_cast<float>(s * sx / sw), static_cast<float>(s * sy / sw),
                     static_cast<float>(images.phase(x, y)), static_cast<float>(sw)});
    }
  }
  return out;
}

LabelImages make_label(const optics::PhaseGrid& hologram, std::size_t n) {
  const std::size_t k = hologram.size();
  if (n == 0 || k < n || k % n != 0) {
    throw Error(fmt::format("hologram of size {} cannot be cropped to {}", k, n));
  }
  const std::size_t off = (k - n) / 2;
  ComplexField f(n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      f(x, y) = std::polar(1.0, hologram(x + off, y + off));
    }
  }
  centered_transform(f, optics::fft::Direction::Forward);
  LabelImages out{RealGrid(n), RealGrid(n)};
  for (std::size_t i = 0; i < n * n; ++i) {
    out.amplitude.values()[i] = std::abs(f.values()[i]);
    out.phase.values()[i] = wrap_phase(std::arg(f.values()[i]));
  }
  return out;
}

ComplexField invert_label(const LabelImages& label) {
  const std::size_t n = label.amplitude.size();
  ComplexField f(n);
  for (std::size_t i = 0; i < n * n; ++i) {
    f.values()[i] = std::polar(label.amplitude.values()[i], label.phase.values()[i]);
  }
  centered_transform(f, optics::fft::Direction::Backward);
  return f;
}

bool operator==(const Sample& a, const Sample& b) {
  const auto same = [](const TweezerRecord& p, const TweezerRecord& q) {
    return p.x == q.x && p.y == q.y && p.phase == q.phase && p.amplitude == q.amplitude;
  };
  return a.n == b.n &&
         std::equal(a.tweezers.begin(), a.tweezers.end(), b.tweezers.begin(), b.tweezers.end(),
                    same) &&
         a.inputs.amplitude == b.inputs.amplitude && a.inputs.phase == b.inputs.phase &&
         a.labels.amplitude == b.labels.amplitude && a.labels.phase == b.labels.phase;
}

std::vector<std::uint8_t> encode_sample(const Sample& s) {
  ByteWriter w;
  w.put_bytes("TWZS");
  w.put_u8(kSampleVersion);
  w.put_u32(static_cast<std::uint32_t>(s.n));
  w.put_u32(static_cast<std::uint32_t>(s.tweezers.size()));
  for (const TweezerRecord& t : s.tweezers) {
    w.put_f32(t.x);
    w.put_f32(t.y);
    w.put_f32(t.phase);
    w.put_f32(t.amplitude);
  }
  for (const RealGrid* g :
       {&s.inputs.amplitude, &s.inputs.phase, &s.labels.amplitude, &s.labels.phase}) {
    if (g->size() != s.n) {
      throw Error(fmt::format("sample plane of size {} does not match n = {}", g->size(), s.n));
    }
    for (const double v : g->values()) {
      w.put_f32(static_cast<float>(v));
    }
  }
  return w.take();
}

Sample decode_sample(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.get_bytes(4) != "TWZS") {
    throw FormatError(FormatError::Kind::BadMagic, "not a TWZS sample");
  }
  const std::uint8_t version = r.get_u8();
  if (version != kSampleVersion) {
    throw FormatError(FormatError::Kind::Unsupported,
                      fmt::format("unsupported TWZS version {}", version));
  }
  Sample s;
  s.n = r.get_u32();
  const std::uint32_t count = r.get_u32();
  const std::uint64_t need = std::uint64_t{count} * 16 + std::uint64_t{s.n} * s.n * 16;
  if (need > r.remaining()) {
    throw FormatError(FormatError::Kind::Truncation,
                      fmt::format("TWZS payload needs {} bytes, have {}", need, r.remaining()));
  }
  s.tweezers.resize(count);
  for (TweezerRecord& t : s.tweezers) {
    t.x = r.get_f32();
    t.y = r.get_f32();
    t.phase = r.get_f32();
    t.amplitude = r.get_f32();
  }
  for (RealGrid* g :
       {&s.inputs.amplitude, &s.inputs.phase, &s.labels.amplitude, &s.labels.phase}) {
    *g = RealGrid(s.n);
    for (double& v : g->values()) {
      v = r.get_f32();
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::Malformed,
                      fmt::format("{} trailing bytes after TWZS payload", r.remaining()));
  }
  return s;
}

void write_sample(const std::string& path, const Sample& s) { write_file(path, encode_sample(s)); }

Sample read_sample(const std::string& path) { return decode_sample(read_file(path)); }

holo::SynthesisConfig SampleConfig::default_synthesis() {
  holo::SynthesisConfig c;
  c.slm_size = 64;
  c.oversample = 8;
  c.iterations = 30;
  return c;
}

namespace {

std::optional<Sample> attempt_sample(const SampleConfig& cfg, std::size_t index,
                                     std::size_t attempt) {
  Rng rng = make_rng(cfg.seed, index, attempt);
  const std::size_t m = cfg.synthesis.expanded_size();
  const double center = static_cast<double>(m) / 2.0;
  const std::size_t traps =
      cfg.min_traps + uniform_index(rng, cfg.max_traps - cfg.min_traps + 1);
  auto side = static_cast<std::size_t>(std::max(1L, std::lround(std::sqrt(double(traps)))));
  const auto fit = static_cast<std::size_t>(
      std::max(2.0, std::floor((static_cast<double>(m) - 64.0) / cfg.spacing) + 1.0));
  std::size_t res = std::min(fit, static_cast<std::size_t>(std::ceil(1.33 * double(side))) + 1);
  side = std::min(side, std::max<std::size_t>(1, static_cast<std::size_t>(double(res) / 1.33)));
  const match::SiteLattice reservoir = match::square_lattice(res, cfg.spacing, {center, center});
  const match::SiteLattice sites = match::square_lattice(side, cfg.spacing, {center, center});
  std::vector<Vec2> atoms;
  for (const Vec2& p : reservoir.positions()) {
    if (bernoulli(rng, cfg.loading)) {
      atoms.push_back(p);
    }
  }
  const std::vector<Vec2> targets = sites.positions();
  if (atoms.size() < targets.size()) {
    return std::nullopt;
  }
  const match::Assignment a = match::exact_match(atoms, targets);
  std::vector<traj::Move> moves;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    moves.push_back({atoms[a.atom_for_target[j]], targets[j]});
  }
  const traj::StepPlan plan = traj::plan(moves);
  const auto& frame = plan.frames[uniform_index(rng, plan.steps + 1)];

  std::vector<optics::TweezerTarget> request;
  std::vector<cdouble> coords;
  for (const traj::Tweezer& t : frame) {
    // Coordinates go through float first so the sample and hologram agree.
    const double x = static_cast<float>(t.position.x);
    const double y = static_cast<float>(t.position.y);
    request.push_back({x, y, std::nullopt, 1.0});
    coords.emplace_back(x, y);
  }
  holo::SynthesisConfig syn = cfg.synthesis;
  syn.seed = rng();
  const holo::SynthesisResult wgs = holo::wgs(request, syn);
  const auto phases = holo::extract_phases(wgs.hologram, coords, syn.oversample, syn.aperture);

  Sample s;
  s.n = syn.slm_size;
  for (std::size_t i = 0; i < request.size(); ++i) {
    if (phases[i].low_power) {
      return std::nullopt;
    }
    s.tweezers.push_back({static_cast<float>(request[i].x), static_cast<float>(request[i].y),
                          static_cast<float>(phases[i].phase), 1.0F});
  }
  InputImages in = encode_inputs(s.tweezers, s.n, syn.oversample);
  s.inputs = {to_float_grid(in.amplitude), to_float_grid(in.phase)};
  LabelImages label = make_label(wgs.hologram, s.n);
  s.labels = {to_float_grid(label.amplitude), to_float_grid(label.phase)};
  return s;
}

constexpr std::size_t kAttempts = 16;

} // namespace

std::optional<Sample> make_sample(const SampleConfig& cfg, std::size_t index,
                                  std::size_t* failures) {
  if (cfg.min_traps == 0 || cfg.max_traps < cfg.min_traps) {
    throw Error("sample trap range must satisfy 0 < min <= max");
  }
  for (std::size_t attempt = 0; attempt < kAttempts; ++attempt) {
    try {
      if (auto s = attempt_sample(cfg, index, attempt)) {
        return s;
      }
    } catch (const Error&) {
      // Crowded mid-move frames can defeat encoding or synthesis; redraw.
    }
    if (failures != nullptr) {
      ++*failures;
    }
  }
  return std::nullopt;
}

std::optional<Sample> SampleStream::next() {
  while (index_ < cfg_.count) {
    if (auto s = make_sample(cfg_, index_++, &skipped_)) {
      return s;
    }
  }
  return std::nullopt;
}

std::vector<Sample> generate_samples(const SampleConfig& cfg, std::size_t* skipped) {
  std::vector<std::optional<Sample>> slots(cfg.count);
  std::vector<std::size_t> fails(cfg.count, 0);
  parallel_for(cfg.count, [&](std::size_t i) { slots[i] = make_sample(cfg, i, &fails[i]); });
  std::vector<Sample> out;
  std::size_t total = 0;
  for (std::size_t i = 0; i < cfg.count; ++i) {
    total += fails[i];
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    }
  }
  if (skipped != nullptr) {
    *skipped = total;
  }
  return out;
}

std::vector<optics::TweezerTarget> validation_scene(const ValidationOptions& o,
                                                    std::size_t index) {
  Rng rng = make_rng(o.seed, index);
  const double c = static_cast<double>(o.optics.expanded_size()) / 2.0;
  std::vector<optics::TweezerTarget> out;
  const double min2 = o.min_separation * o.min_separation;
  for (std::size_t tries = 0; out.size() < o.traps; ++tries) {
    if (tries > 1000 * o.traps) {
      throw Error(fmt::format("cannot place {} traps {} px apart within +-{} px", o.traps,
                              o.min_separation, o.half_width));
    }
    const double x = uniform(rng, c - o.half_width, c + o.half_width);
    const double y = uniform(rng, c - o.half_width, c + o.half_width);
    const bool clear = std::none_of(out.begin(), out.end(), [&](const auto& t) {
      return (t.x - x) * (t.x - x) + (t.y - y) * (t.y - y) < min2;
    });
    if (clear) {
      out.push_back({x, y, uniform(rng, -std::numbers::pi, std::numbers::pi), 1.0});
    }
  }
  return out;
}

GeneratorMetrics validate_generator(holo::HologramGenerator& generator,
                                    const ValidationOptions& options) {
  if (options.scenes < 10) {
    throw Error(fmt::format("validate_generator needs at least 10 scenes (got {})",
                            options.scenes));
  }
  const holo::SynthesisConfig& cfg = options.optics;
  const RealGrid aperture = optics::make_aperture(cfg.slm_size, cfg.aperture);
  optics::MeasureOptions mo = cfg.measure;
  mo.throw_on_missing = false;
  GeneratorMetrics m;
  std::vector<double> dpos;
  std::vector<double> dphi;
  double uni = 0.0;
  double eff = 0.0;
  for (std::size_t k = 0; k < options.scenes; ++k) {
    const auto targets = validation_scene(options, k);
    try {
      const optics::PhaseGrid h = generator.generate(targets);
      if (h.size() != cfg.slm_size) {
        throw Error(fmt::format("hologram size {} but expected {}", h.size(), cfg.slm_size));
      }
      const ComplexField field = optics::propagate(h, aperture, cfg.oversample);
      auto meas = optics::measure_tweezers(field, targets, mo);
      std::size_t peak = 0;
      for (std::size_t i = 1; i < field.values().size(); ++i) {
        if (std::norm(field.values()[i]) > std::norm(field.values()[peak])) {
          peak = i;
        }
      }
      const double px = static_cast<double>(peak % field.size());
      const double py = static_cast<double>(peak / field.size());
      std::vector<double> powers;
      double total = 0.0;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        auto& q = meas[i];
        if (q.missing) {
          ++m.missing;
          q.x = px;
          q.y = py;
        }
        dpos.push_back(q.x - targets[i].x);
        dpos.push_back(q.y - targets[i].y);
        dphi.push_back(circular_diff(*targets[i].phase, q.phase));
        powers.push_back(q.power);
        total += q.power;
      }
      const double mu = mean(powers);
      uni += mu > 0.0 ? stddev(powers) / mu : std::numeric_limits<double>::infinity();
      eff += total;
      ++m.scenes;
      m.traps += targets.size();
    } catch (const std::exception& e) {
      ++m.failures;
      m.errors.push_back(fmt::format("scene {}: {}", k, e.what()));
    }
  }
  if (m.scenes > 0) {
    m.position_std = stddev(dpos);
    m.phase_std = circular_stddev(dphi);
    m.uniformity = uni / static_cast<double>(m.scenes);
    m.efficiency = eff / static_cast<double>(m.scenes);
  }
  return m;
}

std::string metrics_to_json(const GeneratorMetrics& m) {
  nlohmann::ordered_json j;
  j["scenes"] = m.scenes;
  j["traps"] = m.traps;
  j["position_std"] = m.position_std;
  j["phase_std"] = m.phase_std;
  j["uniformity"] = m.uniformity;
  j["efficiency"] = m.efficiency;
  j["missing"] = m.missing;
  j["failures"] = m.failures;
  j["errors"] = m.errors;
  return j.dump(2);
}

} // namespace twz::dataset
