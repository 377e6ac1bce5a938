#include "pstmon/game.hpp"

namespace pstmon::sim {

namespace {

TypedMessage msg(std::string label, std::optional<Value> payload = std::nullopt) {
  return TypedMessage{Direction::FromClient, std::move(label), std::move(payload)};
}

}  // namespace

Trace serve_game_session(TypedChannel& ch, std::uint64_t seed) {
  Trace trace;
  Rng rng(seed);
  std::int64_t secret = rng.between(1, 100);
  try {
    while (true) {
      auto in = ch.receive();
      if (!in) {
        trace.error = "client closed the connection";
        return trace;
      }
      trace.labels.push_back(in->label);
      if (in->label == "Guess") {
        const auto* guess = in->payload ? std::get_if<std::int64_t>(&*in->payload) : nullptr;
        const bool hit = guess && *guess == secret;
        if (hit) secret = rng.between(1, 100);
        const char* reply = hit ? "Correct" : "Incorrect";
        ch.send(msg(reply));
        trace.labels.push_back(reply);
      } else if (in->label == "Help") {
        ch.send(msg("Hint", Value{std::string(secret % 2 == 0 ? "even" : "odd")}));
        trace.labels.push_back("Hint");
      } else if (in->label == "Quit") {
        trace.completed = true;
        return trace;
      } else {
        trace.error = "unexpected message " + in->label;
        return trace;
      }
    }
  } catch (const std::exception& e) {
    trace.error = e.what();
  }
  return trace;
}

Trace play_game(TypedChannel& ch, const ScriptedBehavior& behavior) {
  Trace trace;
  LabelSchedule schedule(behavior);
  Rng guesses(behavior.seed ^ 0x9e3779b97f4a7c15ULL);
  try {
    while (true) {
      std::string label = schedule.next();
      if (label.empty()) return trace;  // script exhausted without Quit
      std::optional<Value> payload;
      if (label == "Guess") payload = Value{guesses.between(1, 100)};
      ch.send(msg(label, payload));
      trace.labels.push_back(label);
      if (label == "Quit") {
        trace.completed = true;
        return trace;
      }
      auto reply = ch.receive();
      if (!reply) {
        trace.error = "server closed the connection";
        return trace;
      }
      trace.labels.push_back(reply->label);
    }
  } catch (const std::exception& e) {
    trace.error = e.what();
  }
  return trace;
}

GameServer::GameServer(net::Endpoint listen, std::uint64_t seed, Codec codec, std::optional<GreyBoxSettings> greybox)
    : listen_(std::move(listen)), seed_(seed), codec_(std::move(codec)), greybox_(std::move(greybox)) {}

GameServer::~GameServer() {
  stop();
}

void GameServer::start() {
  listener_ = std::make_unique<net::Listener>(listen_);
  acceptor_ = std::thread([this] {
    while (!stopping_) {
      std::optional<net::Socket> s;
      try {
        s = listener_->accept(std::chrono::milliseconds(50));
      } catch (const net::NetError&) {
        continue;
      }
      if (!s) continue;
      std::lock_guard lock(mu_);
      const std::uint64_t index = ++accepted_;
      sessions_.emplace_back([this, index, sock = std::move(*s)]() mutable {
        const std::uint64_t seed = seed_ + index;
        if (greybox_) {
          std::unique_ptr<MonitoredEndpoint> ep;
          try {
            ep = embed(*greybox_->type, codec_, greybox_->monitor, Direction::FromServer, std::move(sock),
                       *greybox_->sink, std::to_string(index));
          } catch (const std::exception&) {
            return;
          }
          Trace t = serve_game_session(*ep, seed);
          ep->close();
          std::lock_guard lk(mu_);
          traces_.push_back(std::move(t));
          summaries_.push_back(ep->summary());
        } else {
          CodecChannel ch(std::move(sock), codec_, Direction::FromServer);
          Trace t = serve_game_session(ch, seed);
          std::lock_guard lk(mu_);
          traces_.push_back(std::move(t));
        }
      });
    }
  });
}

void GameServer::stop() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> sessions;
  {
    std::lock_guard lock(mu_);
    sessions.swap(sessions_);
  }
  for (auto& t : sessions)
    if (t.joinable()) t.join();
  if (listener_) listener_->close();
}

std::vector<Trace> GameServer::traces() const {
  std::lock_guard lock(mu_);
  return traces_;
}

std::vector<SessionSummary> GameServer::monitor_summaries() const {
  std::lock_guard lock(mu_);
  return summaries_;
}

Trace run_game_client(const net::Endpoint& server, const ScriptedBehavior& behavior, const Codec& codec) {
  CodecChannel ch(net::connect_tcp(server), codec, Direction::FromClient);
  Trace t = play_game(ch, behavior);
  ch.close();
  return t;
}

}  // namespace pstmon::sim
