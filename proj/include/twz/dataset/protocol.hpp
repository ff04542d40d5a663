#pragma once

#include "twz/core/error.hpp"
#include "twz/holo/synthesis.hpp"
#include "twz/optics/grid.hpp"

#include <chrono>
#include <functional>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace twz::dataset {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kHeaderSize = 10;
/// Largest accepted payload (a 8192² response is 256 MiB + 4 bytes).
inline constexpr std::uint32_t kMaxPayload = 0x10000100U;

enum class MessageType : std::uint8_t { GenerateRequest = 1, HologramResponse = 2, Error = 3 };

enum class ErrorCode : std::uint16_t {
  EmptyRequest = 1,
  BadMagic = 2,
  UnsupportedVersion = 3,
  UnknownType = 4,
  MalformedPayload = 5,
  GenerationFailed = 6,
};

/// A decoded protocol violation, carrying the code the peer should receive.
class ProtocolError : public Error {
public:
  ProtocolError(ErrorCode code, const std::string& what) : Error(what), code_(code) {}
  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// The backend answered with an Error message, timed out or hung up.
class BackendError : public Error {
public:
  BackendError(std::optional<ErrorCode> code, const std::string& what)
      : Error(what), code_(code) {}
  [[nodiscard]] std::optional<ErrorCode> code() const noexcept { return code_; }

private:
  std::optional<ErrorCode> code_;
};

struct Message {
  MessageType type = MessageType::Error;
  std::vector<std::uint8_t> payload;
};

struct TweezerRecord {
  float x = 0.0F;
  float y = 0.0F;
  float phase = 0.0F;
  float amplitude = 1.0F;
};

[[nodiscard]] std::vector<std::uint8_t> encode_message(const Message& m);
/// Parses a 10-byte header; the magic is checked before anything else.
/// Returns the type and payload length.
[[nodiscard]] std::pair<MessageType, std::uint32_t> decode_header(std::span<const std::uint8_t> h);
/// Decodes exactly one whole message.
[[nodiscard]] Message decode_message(std::span<const std::uint8_t> bytes);

[[nodiscard]] Message make_request(std::span<const TweezerRecord> tweezers);
[[nodiscard]] std::vector<TweezerRecord> parse_request(const Message& m);
[[nodiscard]] Message make_response(const optics::PhaseGrid& hologram);
[[nodiscard]] optics::PhaseGrid parse_response(const Message& m);
[[nodiscard]] Message make_error(ErrorCode code, const std::string& reason);
[[nodiscard]] std::pair<ErrorCode, std::string> parse_error(const Message& m);

[[nodiscard]] std::vector<TweezerRecord> to_records(std::span<const optics::TweezerTarget> t);
[[nodiscard]] std::vector<optics::TweezerTarget> to_targets(std::span<const TweezerRecord> r);

/// Blocking byte stream with a per-read deadline.
class Connection {
public:
  virtual ~Connection() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  /// Reads exactly n bytes. Returns false on a clean end of stream before the
  /// first byte; throws BackendError on timeout or a mid-message hang-up.
  virtual bool read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) = 0;
};

/// Connection over a pair of file descriptors (the same one for sockets).
class FdConnection final : public Connection {
public:
  FdConnection(int read_fd, int write_fd, bool owned);
  ~FdConnection() override;
  FdConnection(const FdConnection&) = delete;
  FdConnection& operator=(const FdConnection&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override;
  bool read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;

private:
  int read_fd_;
  int write_fd_;
  bool owned_;
};

/// Two connected in-process endpoints (a socketpair).
[[nodiscard]] std::pair<std::unique_ptr<Connection>, std::unique_ptr<Connection>> connection_pair();
/// TCP client connection to "host:port".
[[nodiscard]] std::unique_ptr<Connection> connect_tcp(const std::string& address);
/// Starts `/bin/sh -c command` and talks to its stdin/stdout. The child is
/// reaped when the connection is destroyed.
[[nodiscard]] std::unique_ptr<Connection> spawn_stdio(const std::string& command);
/// Opens "stdio:CMD" or "host:port".
[[nodiscard]] std::unique_ptr<Connection> open_backend(const std::string& spec);

/// Reads one message; nullopt on a clean end of stream.
[[nodiscard]] std::optional<Message> read_message(Connection& c, std::chrono::milliseconds timeout);

inline constexpr std::chrono::milliseconds kDefaultTimeout{5000};

/// Answers requests on one connection until the peer closes it or sends
/// something that is not TWZP. Errors are reported to the peer as Error
/// messages; a bad header ends the session.
void serve_backend(Connection& c, holo::HologramGenerator& generator);

/// Listens on 127.0.0.1:port (0 picks a free port), calls `ready` with the
/// bound port, then serves each accepted connection on its own thread with a
/// generator from `make`. Returns after `max_connections` sessions if nonzero.
void serve_tcp(std::uint16_t port,
               const std::function<std::unique_ptr<holo::HologramGenerator>()>& make,
               const std::function<void(std::uint16_t)>& ready, std::size_t max_connections = 0);

/// One request/response round trip.
[[nodiscard]] optics::PhaseGrid request_hologram(Connection& c,
                                                 std::span<const optics::TweezerTarget> tweezers,
                                                 std::chrono::milliseconds timeout = kDefaultTimeout);

/// HologramGenerator that forwards every request over a connection.
class RemoteGenerator final : public holo::HologramGenerator {
public:
  explicit RemoteGenerator(std::unique_ptr<Connection> c,
                           std::chrono::milliseconds timeout = kDefaultTimeout)
      : connection_(std::move(c)), timeout_(timeout) {}
  [[nodiscard]] optics::PhaseGrid generate(std::span<const optics::TweezerTarget> t) override;
  [[nodiscard]] std::string name() const override { return "external"; }

private:
  std::unique_ptr<Connection> connection_;
  std::chrono::milliseconds timeout_;
};

/// Test backend: a flat zero hologram of the configured size.
class EchoGenerator final : public holo::HologramGenerator {
public:
  explicit EchoGenerator(std::size_t n) : n_(n) {}
  [[nodiscard]] optics::PhaseGrid generate(std::span<const optics::TweezerTarget> t) override;
  [[nodiscard]] std::string name() const override { return "echo"; }

private:
  std::size_t n_;
};

} // namespace twz::dataset
