#include "pstmon/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace pstmon::net {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw NetError(what + ": " + std::strerror(errno));
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw NetError("cannot resolve host " + ep.host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("expected host:port, got '" + text + "'");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  const std::string port = text.substr(colon + 1);
  unsigned long p = 0;
  try {
    std::size_t used = 0;
    p = std::stoul(port, &used);
    if (used != port.size()) throw std::invalid_argument("");
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad port in '" + text + "'");
  }
  if (p > 65535) throw std::invalid_argument("port out of range in '" + text + "'");
  ep.port = static_cast<std::uint16_t>(p);
  return ep;
}

Socket::~Socket() {
  close();
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown_write() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void Socket::shutdown_both() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::write_all(std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::size_t Socket::read_some(char* buf, std::size_t len) {
  while (true) {
    ssize_t n = ::recv(fd_, buf, len, 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    throw_errno("recv");
  }
}

Socket connect_tcp(const Endpoint& ep) {
  sockaddr_in addr = resolve(ep);
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw_errno("socket");
  Socket s(fd);
  while (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno == EINTR) continue;
    throw_errno("connect to " + ep.to_string());
  }
  set_nodelay(fd);
  return s;
}

Listener::Listener(const Endpoint& ep, int backlog) : host_(ep.host) {
  sockaddr_in addr = resolve(ep);
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw_errno("socket");
  sock_ = Socket(fd);
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw_errno("bind " + ep.to_string());
  if (::listen(fd, backlog) != 0) throw_errno("listen");
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

std::optional<Socket> Listener::accept(std::chrono::milliseconds timeout) {
  if (!sock_.valid()) return std::nullopt;
  pollfd p{sock_.fd(), POLLIN, 0};
  int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (r < 0) {
    if (errno == EINTR) return std::nullopt;
    throw_errno("poll");
  }
  if (r == 0) return std::nullopt;
  int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) {
    if (errno == EINTR || errno == EAGAIN || errno == ECONNABORTED) return std::nullopt;
    throw_errno("accept");
  }
  set_nodelay(fd);
  return Socket(fd);
}

std::optional<std::string> LineReader::next_buffered() {
  std::size_t nl = buf_.find('\n', start_);
  if (nl == std::string::npos) {
    if (start_ > 0 && start_ == buf_.size()) {
      buf_.clear();
      start_ = 0;
    }
    return std::nullopt;
  }
  std::size_t end = nl;
  if (strip_cr_ && end > start_ && buf_[end - 1] == '\r') --end;
  std::string line = buf_.substr(start_, end - start_);
  start_ = nl + 1;
  if (start_ > 4096 && start_ * 2 > buf_.size()) {
    buf_.erase(0, start_);
    start_ = 0;
  }
  return line;
}

bool LineReader::fill() {
  char chunk[4096];
  std::size_t n = sock_.read_some(chunk, sizeof chunk);
  if (n == 0) return false;
  buf_.append(chunk, n);
  return true;
}

std::optional<std::string> LineReader::take_partial() {
  if (start_ >= buf_.size()) return std::nullopt;
  std::string rest = buf_.substr(start_);
  buf_.clear();
  start_ = 0;
  if (strip_cr_ && !rest.empty() && rest.back() == '\r') rest.pop_back();
  return rest;
}

std::optional<std::string> LineReader::read_line() {
  while (true) {
    if (auto line = next_buffered()) return line;
    if (!fill()) return take_partial();
  }
}

}  // namespace pstmon::net
