#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "pstmon/codec.hpp"
#include "pstmon/monitor.hpp"
#include "pstmon/net.hpp"

namespace pstmon {

struct ProxyConfig {
  net::Endpoint listen;
  net::Endpoint upstream;
  std::shared_ptr<const MonitorAutomaton> automaton;
  Codec codec;
  MonitorConfig monitor;
  bool aggregate = false;
  std::optional<std::chrono::milliseconds> session_timeout;
};

/// Cross-session counters for `--aggregate`. Reported in logs only; never
/// used for verdicts.
class AggregateStats {
 public:
  void merge(const MonitorSession& session);
  /// One `ok` event per branch of every choice point seen so far, under session id "aggregate".
  std::vector<MonitorEvent> snapshot(const CiMethod& method);

 private:
  std::mutex mu_;
  std::map<std::string, ChoiceStats> stats_;
  std::uint64_t seq_ = 0;
};

/// Black-box setup: a TCP man-in-the-middle that starts a fresh monitor for
/// every accepted connection.
class ProxyServer {
 public:
  ProxyServer(ProxyConfig config, EventSink& sink);
  ~ProxyServer();
  ProxyServer(const ProxyServer&) = delete;
  ProxyServer& operator=(const ProxyServer&) = delete;

  /// Binds the listener and starts accepting in the background.
  void start();
  std::uint16_t port() const;
  /// Stops accepting, closes live sessions and joins every thread.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler flag.
  void run_until(const std::atomic<bool>& interrupted);

  std::vector<SessionSummary> summaries() const;
  std::size_t finished_sessions() const;

 private:
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  ProxyConfig config_;
  EventSink& sink_;
  std::unique_ptr<net::Listener> listener_;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> next_session_{0};
  mutable std::mutex mu_;
  std::list<Worker> workers_;
  std::vector<SessionSummary> summaries_;
  AggregateStats aggregate_;

  void accept_loop();
  void reap_finished();
  void handle(net::Socket client, std::string session_id);
  void finish(const MonitorSession& m, std::size_t events, std::string detail);
};

}  // namespace pstmon
