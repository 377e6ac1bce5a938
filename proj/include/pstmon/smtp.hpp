#pragma once

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pstmon/behavior.hpp"
#include "pstmon/embed.hpp"
#include "pstmon/net.hpp"

namespace pstmon::sim {

/// Minimal SMTP server that accepts the monitored fragment and discards
/// message bodies. Body lines use the single-line form `<escaped body>\n.`.
class SmtpStub {
 public:
  explicit SmtpStub(net::Endpoint listen = {});
  ~SmtpStub();
  void start();
  std::uint16_t port() const { return listener_ ? listener_->port() : 0; }
  void stop();
  std::uint64_t sessions_served() const { return served_; }

 private:
  net::Endpoint listen_;
  std::unique_ptr<net::Listener> listener_;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> served_{0};
  std::mutex mu_;
  std::list<std::thread> sessions_;

  void serve(net::Socket sock);
};

struct SmtpTrace {
  std::vector<std::string> labels;
  /// One entry per request (write -> matching reply), milliseconds.
  std::vector<double> response_ms;
  bool completed = false;
  std::string error;
};

/// Runs the scripted SMTP client over a typed channel.
SmtpTrace run_smtp_client(TypedChannel& ch, const MailLoop& loop);

}  // namespace pstmon::sim
