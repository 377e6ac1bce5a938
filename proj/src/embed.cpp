#include "pstmon/embed.hpp"

namespace pstmon {

CodecChannel::CodecChannel(net::Socket sock, Codec codec, Direction local_direction)
    : sock_(std::move(sock)),
      codec_(std::move(codec)),
      local_(local_direction),
      reader_(sock_, codec_.framing() == Framing::CRLF) {}

void CodecChannel::send(const TypedMessage& msg) {
  TypedMessage m = msg;
  m.direction = local_;
  sock_.write_all(codec_.encode(m) + codec_.terminator());
}

std::optional<TypedMessage> CodecChannel::receive() {
  auto line = reader_.read_line();
  if (!line) return std::nullopt;
  Decoded d = codec_.decode(opposite(local_), *line);
  if (auto* u = std::get_if<Unrecognized>(&d)) throw ProtocolViolation("unrecognized line '" + u->raw + "'");
  return std::get<TypedMessage>(std::move(d));
}

void CodecChannel::close() {
  sock_.close();
}

MonitoredEndpoint::MonitoredEndpoint(std::shared_ptr<const MonitorAutomaton> automaton, Codec codec,
                                     MonitorConfig config, Direction embedded_side, net::Socket remote,
                                     EventSink& sink, std::string session_id)
    : codec_(std::move(codec)),
      local_(embedded_side),
      remote_(std::move(remote)),
      reader_(remote_, codec_.framing() == Framing::CRLF),
      sink_(sink),
      monitor_(std::move(automaton), config, std::move(session_id)) {}

MonitoredEndpoint::~MonitoredEndpoint() {
  close();
}

void MonitoredEndpoint::deliver(std::vector<MonitorEvent> evs) {
  for (auto& e : evs) {
    if (e.verdict == Verdict::Violation || e.verdict == Verdict::Aborted) detail_ = e.detail;
    sink_.write(e);
    ++events_;
  }
}

void MonitoredEndpoint::send(const TypedMessage& msg) {
  TypedMessage m = msg;
  m.direction = local_;
  deliver(monitor_.step(m));
  if (monitor_.status() == MonitorSession::Status::Violated) {
    remote_.close();
    throw ProtocolViolation(detail_);
  }
  try {
    remote_.write_all(codec_.encode(m) + codec_.terminator());
  } catch (const net::NetError& e) {
    deliver(monitor_.abort(std::string("write failed: ") + e.what()));
    throw;
  }
}

std::optional<TypedMessage> MonitoredEndpoint::receive() {
  std::optional<std::string> line;
  try {
    line = reader_.read_line();
  } catch (const net::NetError& e) {
    deliver(monitor_.abort(std::string("read failed: ") + e.what()));
    throw;
  }
  if (!line) {
    if (!monitor_.finished()) deliver(monitor_.abort("remote closed the connection"));
    return std::nullopt;
  }
  Decoded d = codec_.decode(opposite(local_), *line);
  deliver(std::visit([&](const auto& x) { return monitor_.step(x); }, d));
  if (monitor_.status() == MonitorSession::Status::Violated) {
    remote_.close();
    throw ProtocolViolation(detail_);
  }
  return std::get<TypedMessage>(std::move(d));
}

void MonitoredEndpoint::close() {
  if (!remote_.valid()) return;
  if (!monitor_.finished()) deliver(monitor_.abort("embedded side closed the connection"));
  remote_.close();
}

SessionSummary MonitoredEndpoint::summary() const {
  return summarize(monitor_, events_, detail_);
}

std::unique_ptr<MonitoredEndpoint> embed(const SessionType& type, Codec codec, MonitorConfig config,
                                         Direction embedded_side, net::Socket remote, EventSink& sink,
                                         std::string session_id) {
  auto errors = validate(type);
  if (!errors.empty()) {
    std::string msg = "cannot embed monitor: invalid session type";
    for (const auto& e : errors) msg += "; " + std::string(to_string(e.kind)) + ": " + e.message;
    throw std::runtime_error(msg);
  }
  auto automaton = std::make_shared<const MonitorAutomaton>(compile(type));
  auto problems = codec.check_against(signature_of(*automaton, config.perspective));
  if (!problems.empty()) throw CodecError(std::move(problems));
  return std::make_unique<MonitoredEndpoint>(std::move(automaton), std::move(codec), config, embedded_side,
                                             std::move(remote), sink, std::move(session_id));
}

}  // namespace pstmon
