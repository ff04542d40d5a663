#include "twz/core/parallel.hpp"
#include "twz/dataset/protocol.hpp"
#include "twz/dataset/sample.hpp"
#include "twz/engine/assemble.hpp"
#include "twz/engine/bench.hpp"
#include "twz/engine/scenario.hpp"
#include "twz/holo/synthesis.hpp"
#include "twz/optics/propagate.hpp"
#include "twz/optics/twzf.hpp"
#include "twz/transport/dynamics.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace twz;

constexpr int kConfigExit = 2;
constexpr int kProtocolExit = 3;

int fail(int code, const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = message;
  j["kind"] = kind;
  std::cerr << j.dump() << "\n";
  return code;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path);
  }
  out << text;
}

/// "--key value" and "--key=value" pairs left over after the known options.
std::vector<std::pair<std::string, std::string>> parse_overrides(std::vector<std::string> rest) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& a = rest[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) {
      throw engine::ConfigError("unexpected argument: " + a);
    }
    const std::string body = a.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < rest.size()) {
      out.emplace_back(body, rest[++i]);
    } else {
      throw engine::ConfigError("override --" + body + " has no value");
    }
  }
  return out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    out.push_back(std::stod(item));
  }
  return out;
}

/// Whitespace-separated "x y [phase [weight]]" per line; '#' starts a comment.
std::vector<optics::TweezerTarget> read_targets(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw engine::ConfigError("targets not found: " + path);
  }
  std::vector<optics::TweezerTarget> out;
  std::string line;
  while (std::getline(in, line)) {
    line = line.substr(0, line.find('#'));
    std::istringstream ls(line);
    optics::TweezerTarget t;
    if (!(ls >> t.x >> t.y)) {
      continue;
    }
    double v = 0.0;
    if (ls >> v) {
      t.phase = v;
      if (ls >> v) {
        t.weight = v;
      }
    }
    out.push_back(t);
  }
  return out;
}

std::unique_ptr<holo::HologramGenerator> local_generator(const std::string& kind,
                                                         const holo::SynthesisConfig& cfg) {
  if (kind == "classical-pinned" || kind == "pinned") {
    return std::make_unique<holo::PinnedGenerator>(cfg);
  }
  if (kind == "classical-wgs" || kind == "wgs") {
    return std::make_unique<holo::WgsGenerator>(cfg);
  }
  if (kind == "echo") {
    return std::make_unique<dataset::EchoGenerator>(cfg.slm_size);
  }
  throw engine::ConfigError("unknown generator: " + kind);
}

struct AssembleArgs {
  std::string scenario;
  std::string out;
  std::string csv;
  std::string frames;
  std::string timing;
  std::vector<std::string> rest;
};

int run_assemble(const AssembleArgs& a, bool three_d) {
  const engine::Scenario s = engine::load_scenario(a.scenario, parse_overrides(a.rest));
  engine::RunOptions options;
  options.frames_dir = a.frames;
  engine::TimingReport timing;
  if (!a.timing.empty()) {
    options.timing = &timing;
  }
  const engine::RunReport r = three_d ? engine::assemble_3d(s, options) : engine::assemble(s, options);
  emit(a.out, engine::report_to_json(r));
  if (!a.csv.empty()) {
    emit(a.csv, engine::report_to_csv(r));
  }
  if (!a.timing.empty()) {
    emit(a.timing, engine::timing_to_json(timing));
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Holographic atom-array assembly toolkit"};
  app.require_subcommand(1);

  AssembleArgs asm_args;
  auto add_assemble = [&](const char* name, const char* help) {
    CLI::App* c = app.add_subcommand(name, help);
    c->add_option("scenario", asm_args.scenario, "Scenario JSON file")->required();
    c->add_option("-o,--out", asm_args.out, "RunReport JSON (default stdout)");
    c->add_option("--csv", asm_args.csv, "Per-trial metrics CSV");
    c->add_option("--frames", asm_args.frames, "Directory for per-step |E|^2 PGM frames");
    c->add_option("--timing", asm_args.timing, "TimingReport JSON");
    c->allow_extras();
    return c;
  };
  CLI::App* cmd_asm = add_assemble("assemble", "Run a single-layer assembly scenario");
  CLI::App* cmd_asm3 = add_assemble("assemble3d", "Run a layered assembly scenario");

  engine::BenchOptions bench;
  std::string bench_sizes = "1024,4096";
  std::string bench_out;
  CLI::App* cmd_bench = app.add_subcommand("bench", "Scaling benchmark (CSV)");
  cmd_bench->add_option("--sizes", bench_sizes, "Comma-separated atom counts");
  cmd_bench->add_option("--reps", bench.repetitions, "Repetitions per size");
  cmd_bench->add_option("--slm", bench.slm_size, "SLM size N");
  cmd_bench->add_option("--oversample", bench.oversample, "Oversample s");
  cmd_bench->add_option("--steps", bench.steps, "Steps in the makespan model");
  cmd_bench->add_option("--seed", bench.seed, "Seed");
  cmd_bench->add_option("-o,--out", bench_out, "CSV output (default stdout)");

  transport::PhysicsParams physics;
  transport::SurvivalOptions surv;
  std::string dr_list = "0,0.25,0.5,1,1.5";
  std::string dphi_list = "0,0.5,1,2";
  std::string surv_out;
  bool surv_fit = false;
  CLI::App* cmd_surv = app.add_subcommand("survival", "Survival curve over step size and phase step");
  cmd_surv->add_option("--dr", dr_list, "Per-step displacements, waists");
  cmd_surv->add_option("--dphi", dphi_list, "Per-step phase changes, radians");
  cmd_surv->add_option("--samples", surv.samples, "Atoms per cell");
  cmd_surv->add_option("--steps", surv.steps_per_move, "Steps per move");
  cmd_surv->add_option("--theta", physics.theta, "Temperature, trap depths");
  cmd_surv->add_option("--response-ms", physics.response_time_ms, "SLM response time");
  cmd_surv->add_option("--seed", surv.seed, "Seed");
  cmd_surv->add_flag("--fit", surv_fit, "Print the logistic fit as JSON on stderr");
  cmd_surv->add_option("-o,--out", surv_out, "CSV output (default stdout)");

  holo::SynthesisConfig syn;
  std::string synth_targets;
  std::string synth_method = "pinned";
  std::string synth_out;
  std::string synth_field;
  std::string synth_report;
  CLI::App* cmd_synth = app.add_subcommand("synth", "Synthesize one hologram");
  cmd_synth->add_option("targets", synth_targets, "File of 'x y [phase [weight]]' lines")->required();
  cmd_synth->add_option("--method", synth_method, "pinned | wgs");
  cmd_synth->add_option("--slm", syn.slm_size, "SLM size N");
  cmd_synth->add_option("--oversample", syn.oversample, "Oversample s");
  cmd_synth->add_option("--iterations", syn.iterations, "Feedback iterations K");
  cmd_synth->add_option("--seed", syn.seed, "Seed");
  cmd_synth->add_option("-o,--out", synth_out, "Hologram TWZF")->required();
  cmd_synth->add_option("--field", synth_field, "Propagated field TWZF");
  cmd_synth->add_option("--report", synth_report, "Synthesis report JSON (default stdout)");

  dataset::SampleConfig ds;
  std::string ds_out;
  CLI::App* cmd_ds = app.add_subcommand("dataset", "Write TWZS training samples");
  cmd_ds->add_option("--count", ds.count, "Number of samples")->required();
  cmd_ds->add_option("--seed", ds.seed, "Seed");
  cmd_ds->add_option("--min-traps", ds.min_traps, "Fewest traps per scene");
  cmd_ds->add_option("--max-traps", ds.max_traps, "Most traps per scene");
  cmd_ds->add_option("--slm", ds.synthesis.slm_size, "SLM size N");
  cmd_ds->add_option("--oversample", ds.synthesis.oversample, "Oversample s");
  cmd_ds->add_option("--iterations", ds.synthesis.iterations, "WGS iterations");
  cmd_ds->add_option("-o,--out", ds_out, "Output directory")->required();

  dataset::ValidationOptions vo;
  std::string vb_endpoint;
  std::string vb_out;
  int vb_timeout = 5000;
  CLI::App* cmd_vb = app.add_subcommand("validate-backend", "Score a hologram backend");
  cmd_vb->add_option("endpoint", vb_endpoint, "'stdio:CMD', 'host:port' or a built-in: pinned, wgs, echo")->required();
  cmd_vb->add_option("--scenes", vo.scenes, "Scenes");
  cmd_vb->add_option("--traps", vo.traps, "Traps per scene");
  cmd_vb->add_option("--seed", vo.seed, "Seed");
  cmd_vb->add_option("--slm", vo.optics.slm_size, "SLM size N");
  cmd_vb->add_option("--oversample", vo.optics.oversample, "Oversample s");
  cmd_vb->add_option("--half-width", vo.half_width, "Scene half-width, expanded px");
  cmd_vb->add_option("--timeout-ms", vb_timeout, "Per-request timeout");
  cmd_vb->add_option("-o,--out", vb_out, "Metrics JSON (default stdout)");

  holo::SynthesisConfig srv;
  srv.iterations = 1;
  std::string srv_gen = "pinned";
  int srv_port = -1;
  bool srv_stdio = false;
  std::size_t srv_max = 0;
  CLI::App* cmd_srv = app.add_subcommand("serve", "Serve holograms over the binary protocol");
  cmd_srv->add_option("--generator", srv_gen, "pinned | wgs | echo");
  cmd_srv->add_option("--slm", srv.slm_size, "SLM size N");
  cmd_srv->add_option("--oversample", srv.oversample, "Oversample s");
  cmd_srv->add_option("--iterations", srv.iterations, "Iterations");
  cmd_srv->add_option("--port", srv_port, "TCP port on 127.0.0.1 (0 picks one)");
  cmd_srv->add_flag("--stdio", srv_stdio, "Serve one session on stdin/stdout");
  cmd_srv->add_option("--max-connections", srv_max, "Exit after this many sessions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    return fail(kConfigExit, "usage", e.what());
  }

  try {
    if (cmd_asm->parsed() || cmd_asm3->parsed()) {
      asm_args.rest = (cmd_asm->parsed() ? cmd_asm : cmd_asm3)->remaining();
      return run_assemble(asm_args, cmd_asm3->parsed());
    }
    if (cmd_bench->parsed()) {
      bench.sizes.clear();
      for (const double v : parse_list(bench_sizes)) {
        bench.sizes.push_back(static_cast<std::size_t>(v));
      }
      emit(bench_out, engine::bench_to_csv(engine::benchmark_scaling(bench)));
      return 0;
    }
    if (cmd_surv->parsed()) {
      const auto dr = parse_list(dr_list);
      const auto dphi = parse_list(dphi_list);
      const auto cells = transport::survival_curve(dr, dphi, physics, surv);
      emit(surv_out, transport::survival_to_csv(cells));
      if (surv_fit) {
        const auto fit = transport::fit_logistic(cells);
        nlohmann::ordered_json j{{"b0", fit.b0}, {"b1", fit.b1}, {"b2", fit.b2}};
        std::cerr << j.dump() << "\n";
      }
      return 0;
    }
    if (cmd_synth->parsed()) {
      const auto targets = read_targets(synth_targets);
      const holo::SynthesisResult r = synth_method == "wgs" ? holo::wgs(targets, syn)
                                                            : holo::synthesize_pinned(targets, syn);
      optics::write_twzf(synth_out, optics::to_twzf(r.hologram));
      if (!synth_field.empty()) {
        const auto field = optics::propagate(
            r.hologram, optics::make_aperture(syn.slm_size, syn.aperture), syn.oversample);
        optics::write_twzf(synth_field, optics::to_twzf(field));
      }
      emit(synth_report, holo::report_to_json(r.report));
      return 0;
    }
    if (cmd_ds->parsed()) {
      std::filesystem::create_directories(ds_out);
      std::size_t skipped = 0;
      const auto samples = dataset::generate_samples(ds, &skipped);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        dataset::write_sample(fmt::format("{}/sample_{:06d}.twzs", ds_out, i), samples[i]);
      }
      std::cout << nlohmann::ordered_json{{"written", samples.size()}, {"skipped", skipped}}.dump()
                << "\n";
      return 0;
    }
    if (cmd_vb->parsed()) {
      std::unique_ptr<holo::HologramGenerator> gen;
      if (vb_endpoint == "pinned" || vb_endpoint == "wgs" || vb_endpoint == "echo") {
        holo::SynthesisConfig cfg = vo.optics;
        cfg.iterations = vb_endpoint == "wgs" ? 30 : 1;
        gen = local_generator(vb_endpoint, cfg);
      } else {
        gen = std::make_unique<dataset::RemoteGenerator>(dataset::open_backend(vb_endpoint),
                                                         std::chrono::milliseconds(vb_timeout));
      }
      emit(vb_out, dataset::metrics_to_json(dataset::validate_generator(*gen, vo)));
      return 0;
    }
    if (cmd_srv->parsed()) {
      if (srv_stdio == (srv_port >= 0)) {
        return fail(kConfigExit, "usage", "serve needs exactly one of --port or --stdio");
      }
      const auto make = [&] { return local_generator(srv_gen, srv); };
      if (srv_stdio) {
        dataset::FdConnection c(0, 1, false);
        const auto gen = make();
        dataset::serve_backend(c, *gen);
        return 0;
      }
      dataset::serve_tcp(
          static_cast<std::uint16_t>(srv_port), make,
          [](std::uint16_t port) {
            std::cout << nlohmann::ordered_json{{"port", port}}.dump() << std::endl;
          },
          srv_max);
      return 0;
    }
  } catch (const engine::ConfigError& e) {
    return fail(kConfigExit, "config", e.what());
  } catch (const dataset::ProtocolError& e) {
    return fail(kProtocolExit, "protocol", e.what());
  } catch (const dataset::BackendError& e) {
    return fail(kProtocolExit, "protocol", e.what());
  } catch (const std::exception& e) {
    return fail(1, "error", e.what());
  }
  return 0;
}
