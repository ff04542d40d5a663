#include "twz/core/error.hpp"
#include "twz/core/rng.hpp"
#include "twz/dataset/protocol.hpp"
#include "twz/dataset/sample.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <future>
#include <numbers>
#include <thread>

using namespace twz;
using namespace twz::dataset;
using optics::PhaseGrid;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<std::uint8_t> bytes_of(std::initializer_list<int> v) {
  std::vector<std::uint8_t> out;
  for (const int b : v) {
    out.push_back(static_cast<std::uint8_t>(b));
  }
  return out;
}

void append(std::vector<std::uint8_t>& out, const std::string& s) {
  out.insert(out.end(), s.begin(), s.end());
}

ErrorCode code_of(std::span<const std::uint8_t> bytes) {
  try {
    (void)decode_message(bytes);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode_message accepted bad bytes";
  return ErrorCode::GenerationFailed;
}

FormatError::Kind sample_error(std::span<const std::uint8_t> bytes) {
  try {
    (void)decode_sample(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode_sample accepted bad bytes";
  return FormatError::Kind::Malformed;
}

// Runs serve_backend on one end of a socket pair for the lifetime of the object.
struct LocalBackend {
  std::unique_ptr<Connection> client;
  std::unique_ptr<Connection> server;
  std::thread thread;

  explicit LocalBackend(holo::HologramGenerator& g) {
    auto [a, b] = connection_pair();
    client = std::move(a);
    server = std::move(b);
    thread = std::thread([this, &g] { serve_backend(*server, g); });
  }
  ~LocalBackend() {
    client.reset();
    if (thread.joinable()) {
      thread.join();
    }
  }
  LocalBackend(const LocalBackend&) = delete;
  LocalBackend& operator=(const LocalBackend&) = delete;
};

// The in-process generator seen through the f32 fields of a request and a
// response.
class F32Wrapped final : public holo::HologramGenerator {
public:
  explicit F32Wrapped(holo::HologramGenerator& g) : inner_(g) {}
  PhaseGrid generate(std::span<const optics::TweezerTarget> t) override {
    const auto records = to_records(t);
    return parse_response(make_response(inner_.generate(to_targets(records))));
  }
  [[nodiscard]] std::string name() const override { return "wrapped"; }

private:
  holo::HologramGenerator& inner_;
};

holo::SynthesisConfig small_optics() {
  holo::SynthesisConfig c;
  c.slm_size = 64;
  c.oversample = 8;
  c.iterations = 1;
  return c;
}

ValidationOptions small_validation() {
  ValidationOptions o;
  o.scenes = 10;
  o.traps = 10;
  o.seed = 2;
  o.half_width = 150.0;
  o.optics = small_optics();
  return o;
}

} // namespace

TEST(Twzp, GoldenRequest) {
  const std::vector<TweezerRecord> r = {{1.0F, 2.0F, 0.5F, 1.0F}};
  const auto expected = bytes_of({'T', 'W', 'Z', 'P', 1, 1, 20, 0, 0, 0,
                                  1, 0, 0, 0,
                                  0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40,
                                  0x00, 0x00, 0x00, 0x3F, 0x00, 0x00, 0x80, 0x3F});
  EXPECT_EQ(encode_message(make_request(r)), expected);
  const auto back = parse_request(decode_message(expected));
  ASSERT_EQ(back.size(), 1U);
  EXPECT_EQ(back[0].y, 2.0F);
  EXPECT_EQ(back[0].phase, 0.5F);
}

TEST(Twzp, GoldenResponseAndError) {
  auto response = bytes_of({'T', 'W', 'Z', 'P', 1, 2, 20, 0, 0, 0, 2, 0, 0, 0});
  response.resize(response.size() + 16, 0);
  EXPECT_EQ(encode_message(make_response(PhaseGrid(2))), response);
  EXPECT_EQ(parse_response(decode_message(response)), PhaseGrid(2));

  auto error = bytes_of({'T', 'W', 'Z', 'P', 1, 3, 15, 0, 0, 0, 1, 0});
  append(error, "empty request");
  EXPECT_EQ(encode_message(make_error(ErrorCode::EmptyRequest, "empty request")), error);
  const auto [code, reason] = parse_error(decode_message(error));
  EXPECT_EQ(code, ErrorCode::EmptyRequest);
  EXPECT_EQ(reason, "empty request");
  try {
    (void)parse_response(decode_message(error));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyRequest);
  }
}

TEST(Twzp, HeaderErrors) {
  const auto ok = encode_message(make_request({}));
  EXPECT_EQ(code_of(bytes_of({'X', 'W', 'Z', 'P'})), ErrorCode::BadMagic);
  EXPECT_EQ(code_of(bytes_of({'T', 'W'})), ErrorCode::BadMagic);
  auto bad = ok;
  bad[4] = 9;
  EXPECT_EQ(code_of(bad), ErrorCode::UnsupportedVersion);
  bad = ok;
  bad[5] = 7;
  EXPECT_EQ(code_of(bad), ErrorCode::UnknownType);
  bad = ok;
  bad.push_back(0);
  EXPECT_EQ(code_of(bad), ErrorCode::MalformedPayload);
  bad = ok;
  bad[6] = 0xFF;
  bad[9] = 0xFF;
  EXPECT_EQ(code_of(bad), ErrorCode::MalformedPayload);
  Message short_request{MessageType::GenerateRequest, bytes_of({2, 0, 0, 0})};
  EXPECT_THROW((void)parse_request(short_request), ProtocolError);
  Message bad_size{MessageType::HologramResponse, bytes_of({3, 0, 0, 0})};
  bad_size.payload.resize(4 + 36, 0);
  EXPECT_THROW((void)parse_response(bad_size), ProtocolError);
}

TEST(Twzp, BadMagicIsRejectedAfterFourBytes) {
  auto [a, b] = connection_pair();
  a->write_all(bytes_of({'J', 'U', 'N', 'K'}));
  try {
    (void)read_message(*b, std::chrono::milliseconds(2000));
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
}

TEST(Twzp, TimeoutIsBackendError) {
  auto [a, b] = connection_pair();
  EXPECT_THROW((void)read_message(*b, std::chrono::milliseconds(50)), BackendError);
  a->write_all(bytes_of({'T', 'W', 'Z', 'P', 1}));
  a.reset();
  EXPECT_THROW((void)read_message(*b, std::chrono::milliseconds(500)), BackendError);
}

TEST(Backend, EchoServesZeros) {
  EchoGenerator echo(16);
  LocalBackend backend(echo);
  const std::vector<optics::TweezerTarget> t = {{10.0, 20.0, 0.0, 1.0}};
  const PhaseGrid h = request_hologram(*backend.client, t);
  ASSERT_EQ(h.size(), 16U);
  for (const std::uint32_t u : h.raw_units()) {
    EXPECT_EQ(u, 0U);
  }
  try {
    (void)request_hologram(*backend.client, {});
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyRequest);
    EXPECT_NE(std::string(e.what()).find("empty request"), std::string::npos);
  }
  // The session survives a rejected request.
  EXPECT_EQ(request_hologram(*backend.client, t).size(), 16U);
}

TEST(Backend, GarbageEndsTheSession) {
  EchoGenerator echo(8);
  LocalBackend backend(echo);
  backend.client->write_all(bytes_of({'G', 'E', 'T', ' '}));
  const auto reply = read_message(*backend.client, std::chrono::milliseconds(2000));
  ASSERT_TRUE(reply.has_value());
  EXPECT_EQ(parse_error(*reply).first, ErrorCode::BadMagic);
  // serve_backend has returned; closing its end gives the client a clean EOF.
  backend.thread.join();
  backend.server.reset();
  EXPECT_FALSE(read_message(*backend.client, std::chrono::milliseconds(2000)).has_value());
}

TEST(Backend, GenerationFailureIsReported) {
  holo::PinnedGenerator pinned(small_optics());
  LocalBackend backend(pinned);
  // A trap far off the expanded grid cannot be measured.
  const std::vector<optics::TweezerTarget> t = {{-4000.0, 5.0, 0.0, 1.0}};
  try {
    (void)request_hologram(*backend.client, t);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), ErrorCode::GenerationFailed);
  }
}

TEST(Backend, RemotePinnedMatchesInProcess) {
  const ValidationOptions o = small_validation();
  holo::PinnedGenerator local(o.optics);
  F32Wrapped wrapped(local);
  const GeneratorMetrics in_process = validate_generator(wrapped, o);

  holo::PinnedGenerator served(o.optics);
  LocalBackend backend(served);
  RemoteGenerator remote(std::move(backend.client));
  const GeneratorMetrics over_wire = validate_generator(remote, o);
  EXPECT_EQ(metrics_to_json(over_wire), metrics_to_json(in_process));
  EXPECT_EQ(over_wire.failures, 0U);
  EXPECT_LE(over_wire.position_std, 0.15);
  EXPECT_LE(over_wire.phase_std, 0.2);
}

TEST(Backend, TcpRoundTrip) {
  std::promise<std::uint16_t> port;
  std::thread server([&] {
    serve_tcp(
        0, [] { return std::make_unique<EchoGenerator>(8); },
        [&](std::uint16_t p) { port.set_value(p); }, 1);
  });
  const std::uint16_t p = port.get_future().get();
  {
    auto c = connect_tcp("127.0.0.1:" + std::to_string(p));
    const std::vector<optics::TweezerTarget> t = {{1.0, 1.0, 0.0, 1.0}};
    EXPECT_EQ(request_hologram(*c, t), PhaseGrid(8));
  }
  server.join();
  EXPECT_THROW((void)open_backend("no-port-here"), Error);
}

TEST(Validation, NegativeControlAndSceneCount) {
  ValidationOptions o = small_validation();
  EchoGenerator echo(o.optics.slm_size);
  const GeneratorMetrics m = validate_generator(echo, o);
  EXPECT_GT(m.position_std, 0.15);
  o.scenes = 9;
  EXPECT_THROW((void)validate_generator(echo, o), Error);
  o.scenes = 0;
  EXPECT_THROW((void)validate_generator(echo, o), Error);
}

TEST(Validation, ScenesRespectSeparation) {
  const ValidationOptions o = small_validation();
  const auto scene = validation_scene(o, 3);
  ASSERT_EQ(scene.size(), o.traps);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    EXPECT_TRUE(scene[i].phase.has_value());
    for (std::size_t j = 0; j < i; ++j) {
      EXPECT_GE(std::hypot(scene[i].x - scene[j].x, scene[i].y - scene[j].y), o.min_separation);
    }
  }
  EXPECT_EQ(validation_scene(o, 3)[0].x, scene[0].x);
}

TEST(Inputs, IntegerCoordinateHitsOnePixel) {
  const std::vector<TweezerRecord> t = {{80.0F, 160.0F, 0.7F, 1.0F}};
  const InputImages img = encode_inputs(t, 32, 8);
  EXPECT_EQ(img.amplitude(10, 20), 1.0);
  EXPECT_EQ(img.phase(10, 20), 0.7F);
  double total = 0.0;
  for (const double v : img.amplitude.values()) {
    total += v;
  }
  EXPECT_EQ(total, 1.0);
}

TEST(Inputs, HalfPixelSplitsEvenly) {
  const std::vector<TweezerRecord> t = {{84.0F, 160.0F, 0.0F, 1.0F}};
  const InputImages img = encode_inputs(t, 32, 8);
  EXPECT_EQ(img.amplitude(10, 20), 0.5);
  EXPECT_EQ(img.amplitude(11, 20), 0.5);
  EXPECT_EQ(img.amplitude(10, 21), 0.0);
}

TEST(Inputs, ConflictsAndRange) {
  const std::vector<TweezerRecord> clash = {{80.0F, 160.0F, 0.0F, 1.0F},
                                            {80.0F, 160.0F, 1.0F, 1.0F}};
  EXPECT_THROW((void)encode_inputs(clash, 32, 8), PhaseConflict);
  const std::vector<TweezerRecord> same = {{80.0F, 160.0F, 0.5F, 1.0F},
                                           {84.0F, 160.0F, 0.5F, 1.0F}};
  EXPECT_NO_THROW((void)encode_inputs(same, 32, 8));
  const std::vector<TweezerRecord> outside = {{300.0F, 10.0F, 0.0F, 1.0F}};
  EXPECT_THROW((void)encode_inputs(outside, 32, 8), Error);
  const std::vector<TweezerRecord> edge = {{250.0F, 10.0F, 0.0F, 1.0F}};
  EXPECT_THROW((void)encode_inputs(edge, 32, 8), Error);
}

TEST(Inputs, DecodeRecoversDisjointTweezers) {
  Rng rng = make_rng(8);
  std::vector<TweezerRecord> t;
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 5; ++i) {
      t.push_back({static_cast<float>(40.0 + 40.0 * i + uniform(rng, 0.0, 7.9)),
                   static_cast<float>(40.0 + 40.0 * j + uniform(rng, 0.0, 7.9)),
                   static_cast<float>(uniform(rng, -kPi, kPi)),
                   static_cast<float>(uniform(rng, 0.5, 1.0))});
    }
  }
  const auto back = decode_inputs(encode_inputs(t, 32, 8), 8);
  ASSERT_EQ(back.size(), t.size());
  // Rows of the lattice are far apart, so (y, x) order is the input order.
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(back[i].x, t[i].x, 1e-6 * 8 + 1e-4);
    EXPECT_NEAR(back[i].y, t[i].y, 1e-6 * 8 + 1e-4);
    EXPECT_EQ(back[i].phase, t[i].phase);
    EXPECT_NEAR(back[i].amplitude, t[i].amplitude, 1e-6);
  }
}

TEST(Labels, FlatHologramIsCentredImpulse) {
  const LabelImages l = make_label(PhaseGrid(16), 16);
  EXPECT_NEAR(l.amplitude(8, 8), 16.0, 1e-12);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      if (x != 8 || y != 8) {
        EXPECT_LT(l.amplitude(x, y), 1e-12);
      }
    }
  }
  EXPECT_NEAR(l.phase(8, 8), 0.0, 1e-12);
  EXPECT_THROW((void)make_label(PhaseGrid(16), 32), Error);
  EXPECT_THROW((void)make_label(PhaseGrid(16), 0), Error);
}

TEST(Labels, CropIsCentral) {
  PhaseGrid big(32);
  for (std::size_t v = 8; v < 24; ++v) {
    for (std::size_t u = 8; u < 24; ++u) {
      big.set(u, v, 1.0);
    }
  }
  const LabelImages l = make_label(big, 16);
  EXPECT_NEAR(l.amplitude(8, 8), 16.0, 1e-12);
  EXPECT_NEAR(l.phase(8, 8), 1.0, 1e-9);
}

TEST(Labels, InverseReproducesCrop) {
  Rng rng = make_rng(4);
  PhaseGrid h(32);
  for (std::size_t v = 0; v < 32; ++v) {
    for (std::size_t u = 0; u < 32; ++u) {
      h.set(u, v, uniform(rng, -kPi, kPi));
    }
  }
  LabelImages l = make_label(h, 16);
  for (double& v : l.amplitude.values()) {
    v = static_cast<float>(v);
  }
  for (double& v : l.phase.values()) {
    v = static_cast<float>(v);
  }
  const optics::ComplexField back = invert_label(l);
  double err = 0.0;
  double norm = 0.0;
  for (std::size_t v = 0; v < 16; ++v) {
    for (std::size_t u = 0; u < 16; ++u) {
      const optics::cdouble want = std::polar(1.0, h(u + 8, v + 8));
      err += std::norm(back(u, v) - want);
      norm += std::norm(want);
    }
  }
  EXPECT_LT(std::sqrt(err / norm), 1e-5);
}

TEST(Labels, WgsPeaksSitAtScaledTargets) {
  holo::SynthesisConfig cfg = small_optics();
  cfg.iterations = 20;
  std::vector<optics::TweezerTarget> t;
  for (int i = 0; i < 10; ++i) {
    t.push_back({160.0 + 24.0 * (i % 5), 200.0 + 48.0 * (i / 5), std::nullopt, 1.0});
  }
  const holo::SynthesisResult r = holo::wgs(t, cfg);
  const LabelImages l = make_label(r.hologram, cfg.slm_size);
  for (const auto& p : t) {
    const double u = p.x / 8.0;
    const double v = p.y / 8.0;
    std::size_t bx = 0;
    std::size_t by = 0;
    double best = -1.0;
    for (std::size_t y = static_cast<std::size_t>(v) - 1; y <= static_cast<std::size_t>(v) + 1; ++y) {
      for (std::size_t x = static_cast<std::size_t>(u) - 1; x <= static_cast<std::size_t>(u) + 1;
           ++x) {
        if (l.amplitude(x, y) > best) {
          best = l.amplitude(x, y);
          bx = x;
          by = y;
        }
      }
    }
    EXPECT_LE(std::hypot(bx - u, by - v), 1.0);
    // A local maximum of the label amplitude.
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        EXPECT_LE(l.amplitude(bx + dx, by + dy), best);
      }
    }
  }
}

TEST(Twzs, GoldenBytes) {
  Sample s;
  s.n = 1;
  s.tweezers = {{1.0F, 2.0F, 0.5F, 1.0F}};
  s.inputs = {optics::RealGrid(1, 1.0), optics::RealGrid(1, 0.5)};
  s.labels = {optics::RealGrid(1, 2.0), optics::RealGrid(1, -2.0)};
  const auto expected = bytes_of({'T', 'W', 'Z', 'S', 1, 1, 0, 0, 0, 1, 0, 0, 0,
                                  0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40,
                                  0x00, 0x00, 0x00, 0x3F, 0x00, 0x00, 0x80, 0x3F,
                                  0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x3F,
                                  0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x00, 0xC0});
  EXPECT_EQ(encode_sample(s), expected);
  EXPECT_EQ(decode_sample(expected), s);
}

TEST(Twzs, ErrorKinds) {
  Sample s;
  s.n = 2;
  s.tweezers = {{1.0F, 2.0F, 0.5F, 1.0F}};
  s.inputs = {optics::RealGrid(2, 1.0), optics::RealGrid(2, 0.5)};
  s.labels = {optics::RealGrid(2, 2.0), optics::RealGrid(2, -2.0)};
  const auto ok = encode_sample(s);
  auto bad = ok;
  bad[1] = 'X';
  EXPECT_EQ(sample_error(bad), FormatError::Kind::BadMagic);
  bad = ok;
  bad[4] = 255;
  EXPECT_EQ(sample_error(bad), FormatError::Kind::Unsupported);
  bad.assign(ok.begin(), ok.end() - 1);
  EXPECT_EQ(sample_error(bad), FormatError::Kind::Truncation);
  bad.assign(ok.begin(), ok.begin() + 7);
  EXPECT_EQ(sample_error(bad), FormatError::Kind::Truncation);
  bad = ok;
  bad.push_back(1);
  EXPECT_EQ(sample_error(bad), FormatError::Kind::Malformed);
  s.labels.phase = optics::RealGrid(3);
  EXPECT_THROW((void)encode_sample(s), Error);
}

TEST(Samples, StreamIsDeterministicAndValid) {
  SampleConfig cfg;
  cfg.count = 3;
  cfg.seed = 12;
  cfg.min_traps = 9;
  cfg.max_traps = 16;
  cfg.synthesis.iterations = 10;
  SampleStream stream(cfg);
  std::vector<Sample> streamed;
  while (auto s = stream.next()) {
    streamed.push_back(std::move(*s));
  }
  const std::vector<Sample> batch = generate_samples(cfg);
  ASSERT_EQ(streamed.size(), batch.size());
  ASSERT_FALSE(batch.empty());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_EQ(streamed[i], batch[i]);
  }
  for (const Sample& s : batch) {
    EXPECT_EQ(s.n, cfg.synthesis.slm_size);
    EXPECT_GE(s.tweezers.size(), 1U);
    for (const double a : s.inputs.amplitude.values()) {
      EXPECT_GE(a, 0.0);
    }
    for (const optics::RealGrid* g : {&s.inputs.phase, &s.labels.phase}) {
      for (const double p : g->values()) {
        EXPECT_GE(p, -kPi);
        EXPECT_LT(p, kPi);
      }
    }
    EXPECT_EQ(decode_sample(encode_sample(s)), s);
    EXPECT_EQ(decode_inputs(s.inputs, cfg.synthesis.oversample).size(), s.tweezers.size());
  }
  cfg.count = 0;
  EXPECT_TRUE(generate_samples(cfg).empty());
  EXPECT_FALSE(SampleStream(cfg).next().has_value());
}

TEST(Samples, FileRoundTrip) {
  Sample s;
  s.n = 2;
  s.tweezers = {{3.0F, 4.0F, -1.0F, 1.0F}};
  s.inputs = {optics::RealGrid(2, 0.25), optics::RealGrid(2, -1.0)};
  s.labels = {optics::RealGrid(2, 1.5), optics::RealGrid(2, 3.0)};
  const std::string path = ::testing::TempDir() + "/round_trip.twzs";
  write_sample(path, s);
  EXPECT_EQ(read_sample(path), s);
}
