#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace pstmon::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string to_string() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

/// Parses `host:port`; throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& text);

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owning TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  void shutdown_write();
  void shutdown_both();

  /// Writes every byte; throws NetError on failure.
  void write_all(std::string_view data);
  /// Returns 0 on orderly EOF; throws NetError on failure.
  std::size_t read_some(char* buf, std::size_t len);

 private:
  int fd_ = -1;
};

Socket connect_tcp(const Endpoint& ep);

class Listener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  explicit Listener(const Endpoint& ep, int backlog = 64);
  std::uint16_t port() const { return port_; }
  const std::string& host() const { return host_; }
  /// Waits up to `timeout` for a connection; nullopt on timeout.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void close() { sock_.close(); }
  bool valid() const { return sock_.valid(); }

 private:
  Socket sock_;
  std::string host_;
  std::uint16_t port_ = 0;
};

/// Buffered line reader over a socket. Lines are returned without the
/// terminator; a trailing '\r' is stripped when `strip_cr` is set.
class LineReader {
 public:
  LineReader(Socket& sock, bool strip_cr) : sock_(sock), strip_cr_(strip_cr) {}

  /// Blocks until a full line arrives. nullopt on EOF (a partial final line is
  /// returned as a line).
  std::optional<std::string> read_line();
  /// Reads whatever is available once (one recv) and buffers it. Returns false on EOF.
  bool fill();
  /// Pops a complete buffered line, if any, without blocking.
  std::optional<std::string> next_buffered();
  /// Remaining unterminated bytes after EOF.
  std::optional<std::string> take_partial();

 private:
  Socket& sock_;
  bool strip_cr_;
  std::string buf_;
  std::size_t start_ = 0;
};

}  // namespace pstmon::net
