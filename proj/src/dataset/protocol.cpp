#include "twz/dataset/protocol.hpp"

#include "twz/core/binary_io.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <csignal>
#include <array>
#include <cstring>
#include <mutex>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include <fmt/format.h>

namespace twz::dataset {

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text() { return std::strerror(errno); }

} // namespace

std::vector<std::uint8_t> encode_message(const Message& m) {
  ByteWriter w;
  w.put_bytes("TWZP");
  w.put_u8(kProtocolVersion);
  w.put_u8(static_cast<std::uint8_t>(m.type));
  w.put_u32(static_cast<std::uint32_t>(m.payload.size()));
  std::vector<std::uint8_t> out = w.take();
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

std::pair<MessageType, std::uint32_t> decode_header(std::span<const std::uint8_t> h) {
  if (h.size() < 4 || std::memcmp(h.data(), "TWZP", 4) != 0) {
    throw ProtocolError(ErrorCode::BadMagic, "bad magic: not a TWZP message");
  }
  if (h.size() < kHeaderSize) {
    throw ProtocolError(ErrorCode::MalformedPayload, "truncated TWZP header");
  }
  ByteReader r(h.subspan(4, kHeaderSize - 4));
  const std::uint8_t version = r.get_u8();
  if (version != kProtocolVersion) {
    throw ProtocolError(ErrorCode::UnsupportedVersion,
                        fmt::format("unsupported protocol version {}", version));
  }
  const std::uint8_t type = r.get_u8();
  const std::uint32_t length = r.get_u32();
  if (type < 1 || type > 3) {
    throw ProtocolError(ErrorCode::UnknownType, fmt::format("unknown message type {}", type));
  }
  if (length > kMaxPayload) {
    throw ProtocolError(ErrorCode::MalformedPayload,
                        fmt::format("payload length {} exceeds limit", length));
  }
  return {static_cast<MessageType>(type), length};
}

Message decode_message(std::span<const std::uint8_t> bytes) {
  const auto [type, length] = decode_header(bytes);
  if (bytes.size() - kHeaderSize != length) {
    throw ProtocolError(ErrorCode::MalformedPayload,
                        fmt::format("payload length field {} but {} bytes follow", length,
                                    bytes.size() - kHeaderSize));
  }
  return {type, {bytes.begin() + kHeaderSize, bytes.end()}};
}

Message make_request(std::span<const TweezerRecord> tweezers) {
  ByteWriter w;
  w.put_u32(static_cast<std::uint32_t>(tweezers.size()));
  for (const TweezerRecord& t : tweezers) {
    w.put_f32(t.x);
    w.put_f32(t.y);
    w.put_f32(t.phase);
    w.put_f32(t.amplitude);
  }
  return {MessageType::GenerateRequest, w.take()};
}

std::vector<TweezerRecord> parse_request(const Message& m) {
  if (m.type != MessageType::GenerateRequest) {
    throw ProtocolError(ErrorCode::UnknownType, "expected a GenerateRequest");
  }
  if (m.payload.size() < 4) {
    throw ProtocolError(ErrorCode::MalformedPayload, "request payload shorter than its count");
  }
  ByteReader r(m.payload);
  const std::uint32_t count = r.get_u32();
  if (r.remaining() != std::uint64_t{count} * 16) {
    throw ProtocolError(ErrorCode::MalformedPayload,
                        fmt::format("request declares {} tweezers but carries {} bytes", count,
                                    r.remaining()));
  }
  std::vector<TweezerRecord> out(count);
  for (TweezerRecord& t : out) {
    t.x = r.get_f32();
    t.y = r.get_f32();
    t.phase = r.get_f32();
    t.amplitude = r.get_f32();
  }
  return out;
}

Message make_response(const optics::PhaseGrid& hologram) {
  ByteWriter w;
  w.put_u32(static_cast<std::uint32_t>(hologram.size()));
  for (const std::uint32_t u : hologram.raw_units()) {
    w.put_f32(static_cast<float>(optics::PhaseGrid::to_radians(u)));
  }
  return {MessageType::HologramResponse, w.take()};
}

optics::PhaseGrid parse_response(const Message& m) {
  if (m.type == MessageType::Error) {
    const auto [code, reason] = parse_error(m);
    throw BackendError(code, fmt::format("backend error {}: {}", static_cast<int>(code), reason));
  }
  if (m.type != MessageType::HologramResponse) {
    throw ProtocolError(ErrorCode::UnknownType, "expected a HologramResponse");
  }
  if (m.payload.size() < 4) {
    throw ProtocolError(ErrorCode::MalformedPayload, "response payload shorter than its size");
  }
  ByteReader r(m.payload);
  const std::uint32_t n = r.get_u32();
  if (!optics::is_power_of_two(n) || r.remaining() != std::uint64_t{n} * n * 4) {
    throw ProtocolError(ErrorCode::MalformedPayload,
                        fmt::format("response of size {} carries {} bytes", n, r.remaining()));
  }
  std::vector<double> phases(std::size_t{n} * n);
  for (double& p : phases) {
    p = r.get_f32();
  }
  return optics::PhaseGrid::from_radians(n, phases);
}

Message make_error(ErrorCode code, const std::string& reason) {
  ByteWriter w;
  w.put_u16(static_cast<std::uint16_t>(code));
  w.put_bytes(reason);
  return {MessageType::Error, w.take()};
}

std::pair<ErrorCode, std::string> parse_error(const Message& m) {
  if (m.type != MessageType::Error || m.payload.size() < 2) {
    throw ProtocolError(ErrorCode::MalformedPayload, "malformed Error message");
  }
  ByteReader r(m.payload);
  const auto code = static_cast<ErrorCode>(r.get_u16());
  return {code, r.get_bytes(r.remaining())};
}

std::vector<TweezerRecord> to_records(std::span<const optics::TweezerTarget> t) {
  std::vector<TweezerRecord> out;
  out.reserve(t.size());
  for (const auto& x : t) {
    out.push_back({static_cast<float>(x.x), static_cast<float>(x.y),
                   static_cast<float>(x.phase.value_or(0.0)), static_cast<float>(x.weight)});
  }
  return out;
}

std::vector<optics::TweezerTarget> to_targets(std::span<const TweezerRecord> r) {
  std::vector<optics::TweezerTarget> out;
  out.reserve(r.size());
  for (const auto& x : r) {
    out.push_back({x.x, x.y, static_cast<double>(x.phase), x.amplitude});
  }
  return out;
}

FdConnection::FdConnection(int read_fd, int write_fd, bool owned)
    : read_fd_(read_fd), write_fd_(write_fd), owned_(owned) {
  ignore_sigpipe();
}

FdConnection::~FdConnection() {
  if (owned_) {
    ::close(read_fd_);
    if (write_fd_ != read_fd_) {
      ::close(write_fd_);
    }
  }
}

void FdConnection::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(write_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw BackendError(std::nullopt, "write failed: " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
}

bool FdConnection::read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  std::size_t done = 0;
  while (done < out.size()) {
    pollfd p{read_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, timeout.count() < 0 ? -1 : static_cast<int>(timeout.count()));
    if (ready < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw BackendError(std::nullopt, "poll failed: " + errno_text());
    }
    if (ready == 0) {
      throw BackendError(std::nullopt,
                         fmt::format("backend timed out after {} ms", timeout.count()));
    }
    const ssize_t n = ::read(read_fd_, out.data() + done, out.size() - done);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw BackendError(std::nullopt, "read failed: " + errno_text());
    }
    if (n == 0) {
      if (done == 0) {
        return false;
      }
      throw BackendError(std::nullopt, "connection closed mid-message");
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

std::pair<std::unique_ptr<Connection>, std::unique_ptr<Connection>> connection_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw Error("socketpair failed: " + errno_text());
  }
  return {std::make_unique<FdConnection>(fds[0], fds[0], true),
          std::make_unique<FdConnection>(fds[1], fds[1], true)};
}

std::unique_ptr<Connection> connect_tcp(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw Error("backend address must be host:port (got '" + address + "')");
  }
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw BackendError(std::nullopt, "cannot resolve " + address);
  }
  int fd = -1;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd >= 0 && ::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      break;
    }
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw BackendError(std::nullopt, "cannot connect to " + address);
  }
  return std::make_unique<FdConnection>(fd, fd, true);
}

namespace {

class ProcessConnection final : public Connection {
public:
  ProcessConnection(int read_fd, int write_fd, pid_t pid)
      : fds_(std::make_unique<FdConnection>(read_fd, write_fd, true)), pid_(pid) {}
  ~ProcessConnection() override {
    // Closing the child's stdin lets it exit before it is reaped.
    fds_.reset();
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
  ProcessConnection(const ProcessConnection&) = delete;
  ProcessConnection& operator=(const ProcessConnection&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override { fds_->write_all(bytes); }
  bool read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override {
    return fds_->read_exact(out, timeout);
  }

private:
  std::unique_ptr<FdConnection> fds_;
  pid_t pid_;
};

} // namespace

std::unique_ptr<Connection> spawn_stdio(const std::string& command) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
    throw Error("pipe failed: " + errno_text());
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    throw Error("fork failed: " + errno_text());
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessConnection>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Connection> open_backend(const std::string& spec) {
  if (spec.rfind("stdio:", 0) == 0) {
    return spawn_stdio(spec.substr(6));
  }
  return connect_tcp(spec);
}

std::optional<Message> read_message(Connection& c, std::chrono::milliseconds timeout) {
  std::array<std::uint8_t, kHeaderSize> header{};
  if (!c.read_exact(std::span<std::uint8_t>(header.data(), 4), timeout)) {
    return std::nullopt;
  }
  if (std::memcmp(header.data(), "TWZP", 4) != 0) {
    throw ProtocolError(ErrorCode::BadMagic, "bad magic: not a TWZP message");
  }
  if (!c.read_exact(std::span<std::uint8_t>(header.data() + 4, kHeaderSize - 4), timeout)) {
    throw BackendError(std::nullopt, "connection closed mid-header");
  }
  const auto [type, length] = decode_header(header);
  Message m{type, std::vector<std::uint8_t>(length)};
  if (length > 0 && !c.read_exact(m.payload, timeout)) {
    throw BackendError(std::nullopt, "connection closed mid-message");
  }
  return m;
}

void serve_backend(Connection& c, holo::HologramGenerator& generator) {
  const auto send = [&](const Message& m) { c.write_all(encode_message(m)); };
  for (;;) {
    std::optional<Message> m;
    try {
      m = read_message(c, std::chrono::milliseconds(-1));
    } catch (const ProtocolError& e) {
      send(make_error(e.code(), e.what()));
      return;
    }
    if (!m) {
      return;
    }
    try {
      const std::vector<TweezerRecord> records = parse_request(*m);
      if (records.empty()) {
        send(make_error(ErrorCode::EmptyRequest, "empty request"));
        continue;
      }
      const std::vector<optics::TweezerTarget> targets = to_targets(records);
      optics::PhaseGrid hologram;
      try {
        hologram = generator.generate(targets);
      } catch (const std::exception& e) {
        send(make_error(ErrorCode::GenerationFailed, e.what()));
        continue;
      }
      send(make_response(hologram));
    } catch (const ProtocolError& e) {
      send(make_error(e.code(), e.what()));
    }
  }
}

void serve_tcp(std::uint16_t port,
               const std::function<std::unique_ptr<holo::HologramGenerator>()>& make,
               const std::function<void(std::uint16_t)>& ready, std::size_t max_connections) {
  ignore_sigpipe();
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) {
    throw Error("socket failed: " + errno_text());
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 8) != 0) {
    const std::string why = errno_text();
    ::close(fd);
    throw Error(fmt::format("cannot listen on port {}: {}", port, why));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (ready) {
    ready(ntohs(addr.sin_port));
  }
  std::vector<std::jthread> sessions;
  for (std::size_t served = 0; max_connections == 0 || served < max_connections; ++served) {
    const int client = ::accept(fd, nullptr, nullptr);
    if (client < 0) {
      if (errno == EINTR) {
        --served;
        continue;
      }
      break;
    }
    sessions.emplace_back([client, &make] {
      FdConnection c(client, client, true);
      const std::unique_ptr<holo::HologramGenerator> generator = make();
      try {
        serve_backend(c, *generator);
      } catch (const std::exception&) {
        // The peer went away; nothing left to report to.
      }
    });
  }
  ::close(fd);
}

optics::PhaseGrid request_hologram(Connection& c, std::span<const optics::TweezerTarget> tweezers,
                                   std::chrono::milliseconds timeout) {
  const std::vector<TweezerRecord> records = to_records(tweezers);
  c.write_all(encode_message(make_request(records)));
  const std::optional<Message> reply = read_message(c, timeout);
  if (!reply) {
    throw BackendError(std::nullopt, "backend closed the connection");
  }
  return parse_response(*reply);
}

optics::PhaseGrid RemoteGenerator::generate(std::span<const optics::TweezerTarget> t) {
  return request_hologram(*connection_, t, timeout_);
}

optics::PhaseGrid EchoGenerator::generate(std::span<const optics::TweezerTarget> /*t*/) {
  return optics::PhaseGrid(n_);
}

} // namespace twz::dataset
