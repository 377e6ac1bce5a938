#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "pstmon/codec.hpp"
#include "pstmon/monitor.hpp"
#include "pstmon/net.hpp"

namespace pstmon {

/// A typed, bidirectional message channel seen from one component.
class TypedChannel {
 public:
  virtual ~TypedChannel() = default;
  /// Sends a message authored by the local component.
  virtual void send(const TypedMessage& msg) = 0;
  /// Next message from the peer; nullopt once the peer closed.
  virtual std::optional<TypedMessage> receive() = 0;
  virtual void close() = 0;
};

class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unmonitored channel over TCP: typed messages <-> codec text lines.
/// Lines the codec does not recognise raise ProtocolViolation.
class CodecChannel : public TypedChannel {
 public:
  CodecChannel(net::Socket sock, Codec codec, Direction local_direction);
  void send(const TypedMessage& msg) override;
  std::optional<TypedMessage> receive() override;
  void close() override;

 private:
  net::Socket sock_;
  Codec codec_;
  Direction local_;
  net::LineReader reader_;
};

/// Grey-box setup: the embedded component exchanges TypedMessages with the
/// monitor directly; only the remote side goes through codec and TCP.
class MonitoredEndpoint : public TypedChannel {
 public:
  MonitoredEndpoint(std::shared_ptr<const MonitorAutomaton> automaton, Codec codec, MonitorConfig config,
                    Direction embedded_side, net::Socket remote, EventSink& sink, std::string session_id);
  ~MonitoredEndpoint() override;

  /// Throws ProtocolViolation (and closes the connection) when the monitor rejects the message.
  void send(const TypedMessage& msg) override;
  std::optional<TypedMessage> receive() override;
  void close() override;

  const MonitorSession& monitor() const { return monitor_; }
  SessionSummary summary() const;

 private:
  Codec codec_;
  Direction local_;
  net::Socket remote_;
  net::LineReader reader_;
  EventSink& sink_;
  MonitorSession monitor_;
  std::size_t events_ = 0;
  std::string detail_;

  void deliver(std::vector<MonitorEvent> evs);
};

/// Validates the type, compiles it, checks the codec and wraps `remote`.
/// Throws std::runtime_error at startup when the type is ill-formed.
std::unique_ptr<MonitoredEndpoint> embed(const SessionType& type, Codec codec, MonitorConfig config,
                                         Direction embedded_side, net::Socket remote, EventSink& sink,
                                         std::string session_id = "1");

}  // namespace pstmon
