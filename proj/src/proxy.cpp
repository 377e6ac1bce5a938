#include "pstmon/proxy.hpp"

#include <poll.h>

#include <cerrno>

namespace pstmon {

void AggregateStats::merge(const MonitorSession& session) {
  std::lock_guard lock(mu_);
  for (const ChoiceStats* st : session.visited_stats()) {
    auto it = stats_.find(st->id());
    if (it == stats_.end()) {
      std::vector<std::pair<std::string, double>> bs;
      for (const auto& b : st->branches()) bs.emplace_back(b.label, b.spec_prob);
      it = stats_.emplace(st->id(), ChoiceStats(st->id(), std::move(bs))).first;
    }
    for (std::size_t i = 0; i < st->branches().size(); ++i)
      for (std::uint64_t k = 0; k < st->branches()[i].count; ++k) it->second.observe_index(i);
  }
}

std::vector<MonitorEvent> AggregateStats::snapshot(const CiMethod& method) {
  std::lock_guard lock(mu_);
  std::vector<MonitorEvent> out;
  for (auto& [id, st] : stats_) {
    if (st.n() == 0) continue;
    // Evaluate a copy so aggregate flags never feed back into anything.
    ChoiceStats copy = st;
    for (const auto& ev : copy.evaluate(method)) {
      MonitorEvent e;
      e.session_id = "aggregate";
      e.seq = ++seq_;
      e.choice_point_id = id;
      e.label = ev.label;
      e.n = st.n();
      e.p_hat = ev.p_hat;
      e.ci_lo = ev.ci.lo;
      e.ci_hi = ev.ci.hi;
      e.verdict = Verdict::Ok;
      e.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
      out.push_back(std::move(e));
    }
  }
  return out;
}

ProxyServer::ProxyServer(ProxyConfig config, EventSink& sink) : config_(std::move(config)), sink_(sink) {
  if (!config_.automaton) throw std::invalid_argument("proxy needs an automaton");
}

ProxyServer::~ProxyServer() {
  stop();
}

void ProxyServer::start() {
  listener_ = std::make_unique<net::Listener>(config_.listen);
  if (listener_->port() == config_.upstream.port &&
      (config_.listen.host == config_.upstream.host || config_.upstream.host == "localhost"))
    throw std::invalid_argument("listen and upstream endpoints must differ");
  acceptor_ = std::thread([this] { accept_loop(); });
}

std::uint16_t ProxyServer::port() const {
  return listener_ ? listener_->port() : 0;
}

void ProxyServer::stop() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::list<Worker> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (auto& w : workers)
    if (w.thread.joinable()) w.thread.join();
  if (listener_) listener_->close();
}

void ProxyServer::run_until(const std::atomic<bool>& interrupted) {
  while (!interrupted && !stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  stop();
}

std::vector<SessionSummary> ProxyServer::summaries() const {
  std::lock_guard lock(mu_);
  return summaries_;
}

std::size_t ProxyServer::finished_sessions() const {
  std::lock_guard lock(mu_);
  return summaries_.size();
}

void ProxyServer::reap_finished() {
  std::lock_guard lock(mu_);
  for (auto it = workers_.begin(); it != workers_.end();) {
    if (*it->done) {
      it->thread.join();
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
}

void ProxyServer::accept_loop() {
  while (!stopping_) {
    std::optional<net::Socket> client;
    try {
      client = listener_->accept(std::chrono::milliseconds(50));
    } catch (const net::NetError&) {
      continue;
    }
    reap_finished();
    if (!client) continue;
    std::string sid = std::to_string(++next_session_);
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(mu_);
    workers_.push_back({std::thread([this, done, sid, c = std::move(*client)]() mutable {
                          handle(std::move(c), sid);
                          *done = true;
                        }),
                        done});
  }
}

void ProxyServer::finish(const MonitorSession& m, std::size_t events, std::string detail) {
  if (config_.aggregate) {
    aggregate_.merge(m);
    for (const auto& e : aggregate_.snapshot(config_.monitor.method)) sink_.write(e);
  }
  std::lock_guard lock(mu_);
  summaries_.push_back(summarize(m, events, std::move(detail)));
}

void ProxyServer::handle(net::Socket client, std::string session_id) {
  MonitorSession m(config_.automaton, config_.monitor, session_id);
  std::size_t events = 0;
  std::string detail;
  auto deliver = [&](std::vector<MonitorEvent> evs) {
    for (auto& e : evs) {
      if (e.verdict == Verdict::Violation || e.verdict == Verdict::Aborted) detail = e.detail;
      sink_.write(e);
      ++events;
    }
  };

  net::Socket upstream;
  try {
    upstream = net::connect_tcp(config_.upstream);
  } catch (const net::NetError& e) {
    deliver(m.abort(std::string("upstream dial failed: ") + e.what()));
    client.close();
    finish(m, events, detail);
    return;
  }

  const bool crlf = config_.codec.framing() == Framing::CRLF;
  const std::string& term = config_.codec.terminator();
  net::LineReader from_client(client, crlf);
  net::LineReader from_server(upstream, crlf);
  const auto started = std::chrono::steady_clock::now();

  // Returns false once the session must be torn down.
  auto relay = [&](Direction dir, const std::string& line) -> bool {
    net::Socket& out = dir == Direction::FromClient ? upstream : client;
    Decoded d = config_.codec.decode(dir, line);
    std::vector<MonitorEvent> evs = std::visit([&](const auto& x) { return m.step(x); }, d);
    const bool violated = m.status() == MonitorSession::Status::Violated;
    // The original line is forwarded, not its re-encoding: decoding may
    // normalise payloads (`GUESS 007` is Guess(7)) and the relay must not
    // alter what it lets through.
    std::string wire = line + term;
    deliver(std::move(evs));
    try {
      out.write_all(wire);
    } catch (const net::NetError& e) {
      deliver(m.abort(std::string("write failed: ") + e.what()));
      return false;
    }
    return !violated;
  };

  bool open = true;
  while (open && !stopping_) {
    pollfd fds[2] = {{client.fd(), POLLIN, 0}, {upstream.fd(), POLLIN, 0}};
    int timeout_ms = 50;
    int r = ::poll(fds, 2, timeout_ms);
    if (r < 0) {
      if (errno == EINTR) continue;
      deliver(m.abort("poll failed"));
      break;
    }
    if (config_.session_timeout && std::chrono::steady_clock::now() - started > *config_.session_timeout) {
      deliver(m.abort("session timeout"));
      break;
    }
    for (int i = 0; i < 2 && open; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const Direction dir = i == 0 ? Direction::FromClient : Direction::FromServer;
      net::LineReader& reader = i == 0 ? from_client : from_server;
      bool eof = false;
      try {
        eof = !reader.fill();
      } catch (const net::NetError& e) {
        deliver(m.abort(std::string("read failed: ") + e.what()));
        open = false;
        break;
      }
      while (open) {
        auto line = reader.next_buffered();
        if (!line) break;
        open = relay(dir, *line);
      }
      if (open && eof) {
        if (auto partial = reader.take_partial()) open = relay(dir, *partial);
        // Half-close: flush (writes are synchronous) and close the other side.
        if (!m.finished()) deliver(m.abort(std::string(to_string(dir)) + " closed the connection"));
        open = false;
      }
    }
  }
  if (open && stopping_) deliver(m.abort("proxy shutting down"));
  client.shutdown_both();
  upstream.shutdown_both();
  client.close();
  upstream.close();
  finish(m, events, detail);
}

}  // namespace pstmon
