#include "twz/transport/dynamics.hpp"

#include "twz/core/error.hpp"
#include "twz/core/parallel.hpp"
#include "twz/core/stats.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include <fmt/format.h>

namespace twz::transport {

void PhysicsParams::validate() const {
  if (!(theta >= 0.0) || !(response_time_ms > 0.0) || !(refresh_ms > 0.0) ||
      !(trap_period_ms > 0.0) || steps_per_period < 8 || !(escape_radius > 0.0)) {
    throw Error("invalid physics parameters");
  }
}

double PhysicsParams::model_time(double ms) const {
  return ms * std::numbers::pi / trap_period_ms;
}

double PhysicsParams::dt() const { return std::numbers::pi / steps_per_period; }

namespace {

constexpr double kPrune = 1e-3;

struct Component {
  Vec2 center;
  std::complex<double> phasor;
  double weight = 1.0;
};

/// The field on the SLM: the fading mixture of previous commands plus the
/// incoming command with weight 1 - decay.
class TrapField {
public:
  TrapField(Vec2 center, double phase) { parts_.push_back({center, std::polar(1.0, phase), 1.0}); }

  void command(Vec2 center, double phase) {
    std::vector<Component> kept;
    double dropped = 0.0;
    for (const Component& c : parts_) {
      if (c.weight < kPrune) {
        dropped += c.weight;
      } else {
        kept.push_back(c);
      }
    }
    parts_ = std::move(kept);
    if (!parts_.empty()) {
      parts_.back().weight += dropped;
    }
    incoming_ = {center, std::polar(1.0, phase), 0.0};
  }

  void set_decay(double decay) noexcept { decay_ = decay; }

  /// Folds the incoming command into the mixture at the end of a refresh.
  void settle() {
    for (Component& c : parts_) {
      c.weight *= decay_;
    }
    incoming_.weight = 1.0 - decay_;
    bool merged = false;
    for (Component& c : parts_) {
      if (c.center == incoming_.center && c.phasor == incoming_.phasor) {
        c.weight += incoming_.weight;
        merged = true;
      }
    }
    if (!merged) {
      parts_.push_back(incoming_);
    }
    decay_ = 1.0;
  }

  /// Potential -|E|^2 and its gradient at r.
  [[nodiscard]] double potential(Vec2 r, Vec2* grad) const {
    std::complex<double> e{};
    std::complex<double> ex{};
    std::complex<double> ey{};
    const auto add = [&](const Component& c, double w) {
      if (w == 0.0) {
        return;
      }
      const Vec2 d = r - c.center;
      const std::complex<double> g = (w * std::exp(-norm2(d))) * c.phasor;
      e += g;
      ex += -2.0 * d.x * g;
      ey += -2.0 * d.y * g;
    };
    for (const Component& c : parts_) {
      add(c, c.weight * decay_);
    }
    add(incoming_, 1.0 - decay_);
    if (grad != nullptr) {
      grad->x = -2.0 * std::real(std::conj(e) * ex);
      grad->y = -2.0 * std::real(std::conj(e) * ey);
    }
    return -std::norm(e);
  }

private:
  std::vector<Component> parts_;
  Component incoming_{{}, {1.0, 0.0}, 0.0};
  double decay_ = 1.0;
};

/// One refresh of velocity Verlet while the incoming command fades in.
void run_refresh(AtomState& a, TrapField& field, const PhysicsParams& params) {
  const double tau = params.model_time(params.response_time_ms);
  const double total = params.model_time(params.refresh_ms);
  const double dt = params.dt();
  const auto steps = static_cast<std::size_t>(std::ceil(total / dt));
  const double h = total / static_cast<double>(steps);
  Vec2 grad;
  field.set_decay(1.0);
  (void)field.potential(a.position, &grad);
  for (std::size_t s = 1; s <= steps; ++s) {
    a.velocity -= (0.5 * h) * grad;
    a.position += h * a.velocity;
    field.set_decay(std::exp(-static_cast<double>(s) * h / tau));
    (void)field.potential(a.position, &grad);
    a.velocity -= (0.5 * h) * grad;
  }
  a.energy = 0.5 * norm2(a.velocity) + field.potential(a.position, nullptr);
  field.settle();
}

void check_escape(AtomState& a, Vec2 commanded, const PhysicsParams& params) {
  if (a.energy > 0.0 || dist(a.position, commanded) > params.escape_radius) {
    a.alive = false;
  }
}

} // namespace

AtomState sample_thermal(double theta, Rng& rng) {
  if (!(theta >= 0.0)) {
    throw Error(fmt::format("temperature must be non-negative (got {})", theta));
  }
  const double sx = std::sqrt(theta / 4.0);
  const double sv = std::sqrt(theta);
  AtomState a;
  a.position = {sx * standard_normal(rng), sx * standard_normal(rng)};
  a.velocity = {sv * standard_normal(rng), sv * standard_normal(rng)};
  a.energy = 0.5 * norm2(a.velocity) - std::exp(-2.0 * norm2(a.position));
  return a;
}

AtomState sample_thermal(double theta, std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_rng(seed, stream);
  return sample_thermal(theta, rng);
}

AtomState evolve_step(const AtomState& atom, Vec2 from, double phase_from, Vec2 to,
                      double phase_to, const PhysicsParams& params) {
  params.validate();
  AtomState a = atom;
  if (!a.alive) {
    return a;
  }
  TrapField field(from, phase_from);
  field.command(to, phase_to);
  run_refresh(a, field, params);
  check_escape(a, to, params);
  return a;
}

AtomState evolve_path(const AtomState& atom, std::span<const Waypoint> path,
                      const PhysicsParams& params, int hold) {
  params.validate();
  AtomState a = atom;
  if (!a.alive || path.empty()) {
    return a;
  }
  TrapField field(path.front().position, path.front().phase);
  const std::size_t refreshes = path.size() - 1 + static_cast<std::size_t>(std::max(hold, 0));
  for (std::size_t k = 1; k <= refreshes && a.alive; ++k) {
    const Waypoint& w = path[std::min(k, path.size() - 1)];
    field.command(w.position, w.phase);
    run_refresh(a, field, params);
    check_escape(a, w.position, params);
  }
  return a;
}

std::vector<SurvivalCell> survival_curve(std::span<const double> dr_grid,
                                         std::span<const double> dphi_grid,
                                         const PhysicsParams& params,
                                         const SurvivalOptions& options) {
  params.validate();
  if (options.samples < 100) {
    throw Error(fmt::format("survival_curve needs at least 100 samples (got {})",
                            options.samples));
  }
  const std::size_t cells = dr_grid.size() * dphi_grid.size();
  const std::size_t m = options.samples;
  std::vector<std::uint8_t> alive(cells * m, 0);
  parallel_for(cells * m, [&](std::size_t job) {
    const std::size_t cell = job / m;
    const double dr = dr_grid[cell / dphi_grid.size()];
    const double dphi = dphi_grid[cell % dphi_grid.size()];
    std::vector<Waypoint> path(options.steps_per_move + 1);
    for (std::size_t k = 0; k < path.size(); ++k) {
      const double t = static_cast<double>(k);
      path[k] = {{t * dr, 0.0}, wrap_phase(t * dphi)};
    }
    Rng rng = make_rng(options.seed, cell, job % m);
    const AtomState start = sample_thermal(params.theta, rng);
    alive[job] = evolve_path(start, path, params).alive ? 1 : 0;
  });
  std::vector<SurvivalCell> out(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    SurvivalCell& s = out[c];
    s.dr = dr_grid[c / dphi_grid.size()];
    s.dphi = dphi_grid[c % dphi_grid.size()];
    s.n = m;
    for (std::size_t i = 0; i < m; ++i) {
      s.survived += alive[c * m + i];
    }
    s.p = static_cast<double>(s.survived) / static_cast<double>(m);
    std::tie(s.ci_lo, s.ci_hi) = wilson_interval(s.survived, s.n);
  }
  return out;
}

std::string survival_to_csv(std::span<const SurvivalCell> cells) {
  std::string out = "dr,dphi,n,survived,p,ci_lo,ci_hi\n";
  for (const SurvivalCell& c : cells) {
    out += fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f}\n", c.dr, c.dphi, c.n, c.survived, c.p,
                       c.ci_lo, c.ci_hi);
  }
  return out;
}

double LogisticSurvival::probability(double dr, double dphi) const noexcept {
  return 1.0 / (1.0 + std::exp(-(b0 + b1 * dr + b2 * dphi)));
}

LogisticSurvival fit_logistic(std::span<const SurvivalCell> cells) {
  constexpr double kRidge = 1e-3;
  std::array<double, 3> beta{0.0, 0.0, 0.0};
  for (int iter = 0; iter < 100; ++iter) {
    std::array<std::array<double, 3>, 3> h{};
    std::array<double, 3> g{};
    for (const SurvivalCell& c : cells) {
      const std::array<double, 3> x{1.0, c.dr, c.dphi};
      const double eta = beta[0] + beta[1] * c.dr + beta[2] * c.dphi;
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const double n = static_cast<double>(c.n);
      const double w = n * p * (1.0 - p);
      const double r = static_cast<double>(c.survived) - n * p;
      for (int i = 0; i < 3; ++i) {
        g[i] += r * x[i];
        for (int j = 0; j < 3; ++j) {
          h[i][j] += w * x[i] * x[j];
        }
      }
    }
    for (int i = 0; i < 3; ++i) {
      g[i] -= kRidge * beta[i];
      h[i][i] += kRidge;
    }
    // Solve h * step = g by Cramer's rule.
    const auto det3 = [](const std::array<std::array<double, 3>, 3>& a) {
      return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
             a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
             a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const double d = det3(h);
    if (d == 0.0) {
      break;
    }
    double change = 0.0;
    std::array<double, 3> step{};
    for (int col = 0; col < 3; ++col) {
      auto a = h;
      for (int row = 0; row < 3; ++row) {
        a[row][col] = g[row];
      }
      step[col] = det3(a) / d;
      change = std::max(change, std::abs(step[col]));
    }
    for (int i = 0; i < 3; ++i) {
      beta[i] += step[i];
    }
    if (change < 1e-10) {
      break;
    }
  }
  return {beta[0], beta[1], beta[2]};
}

match::Occupancy load(const match::SiteLattice& lattice, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(fmt::format("loading probability must be in [0, 1] (got {})", p));
  }
  Rng rng = make_rng(seed);
  match::Occupancy occ(lattice.size());
  for (auto& o : occ) {
    o = bernoulli(rng, p) ? 1 : 0;
  }
  return occ;
}

} // namespace twz::transport
