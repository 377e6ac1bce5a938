#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pstmon/behavior.hpp"
#include "pstmon/embed.hpp"

namespace pstmon::sim {

/// Labels exchanged in one session, in wire order.
struct Trace {
  std::vector<std::string> labels;
  bool completed = false;  // reached the protocol's end from this side's view
  std::string error;
};

/// Guessing-game server side over any typed channel: Correct when the guess
/// hits the secret (a fresh secret in 1..100 is drawn after each hit).
Trace serve_game_session(TypedChannel& ch, std::uint64_t seed);

/// Guessing-game client side following `behavior`.
Trace play_game(TypedChannel& ch, const ScriptedBehavior& behavior);

/// Settings for running the game server with an embedded (grey-box) monitor.
struct GreyBoxSettings {
  std::shared_ptr<const SessionType> type;
  MonitorConfig monitor;
  EventSink* sink = nullptr;
};

class GameServer {
 public:
  GameServer(net::Endpoint listen, std::uint64_t seed, Codec codec, std::optional<GreyBoxSettings> greybox = {});
  ~GameServer();
  void start();
  std::uint16_t port() const { return listener_ ? listener_->port() : 0; }
  void stop();
  std::vector<Trace> traces() const;
  std::vector<SessionSummary> monitor_summaries() const;

 private:
  net::Endpoint listen_;
  std::uint64_t seed_;
  Codec codec_;
  std::optional<GreyBoxSettings> greybox_;
  std::unique_ptr<net::Listener> listener_;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  mutable std::mutex mu_;
  std::list<std::thread> sessions_;
  std::vector<Trace> traces_;
  std::vector<SessionSummary> summaries_;
  std::uint64_t accepted_ = 0;
};

/// Connects to `server` and plays one session.
Trace run_game_client(const net::Endpoint& server, const ScriptedBehavior& behavior, const Codec& codec);

}  // namespace pstmon::sim
