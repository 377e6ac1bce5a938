#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pstmon/automaton.hpp"
#include "pstmon/message.hpp"
#include "pstmon/stats.hpp"

namespace pstmon {

enum class Verdict { Ok, WarningRaised, WarningRetracted, Violation, SessionEnd, Aborted };

std::string_view to_string(Verdict v);
std::optional<Verdict> verdict_from_string(std::string_view s);

/// One log record. At a multi-branch choice point an accepted message yields
/// one event per branch: the chosen branch first, then its siblings.
struct MonitorEvent {
  std::string session_id;
  std::uint64_t seq = 0;
  Direction direction = Direction::FromClient;
  std::string choice_point_id;
  std::string label;
  std::uint64_t n = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  Verdict verdict = Verdict::Ok;
  std::int64_t timestamp_ms = 0;
  /// Human-readable context for violations (expected label set); not part of the CSV.
  std::string detail;
};

struct MonitorConfig {
  CiMethod method;
  std::uint64_t min_samples = 1;
  Perspective perspective = Perspective::Server;
};

class EventSink {
 public:
  virtual ~EventSink() = default;
  /// Must tolerate concurrent calls from different sessions.
  virtual void write(const MonitorEvent& e) = 0;
};

/// Monitor for one session. Single-threaded; not shared between sessions.
class MonitorSession {
 public:
  enum class Status { Running, Ended, Violated, Aborted };

  MonitorSession(std::shared_ptr<const MonitorAutomaton> automaton, MonitorConfig config, std::string session_id);

  /// Advances on an accepted message or emits a violation. After a violation
  /// (or abort) the session refuses input and returns no events.
  std::vector<MonitorEvent> step(const TypedMessage& msg);
  std::vector<MonitorEvent> step(const Unrecognized& raw);
  /// Marks the session aborted (premature close, I/O error). Emits one event
  /// unless the session already ended or was violated.
  std::vector<MonitorEvent> abort(const std::string& reason);

  Status status() const { return status_; }
  bool finished() const { return status_ != Status::Running; }
  std::size_t current_state() const { return state_; }
  const std::string& session_id() const { return session_id_; }
  const MonitorAutomaton& automaton() const { return *automaton_; }
  /// Labels accepted in the current state, in declaration order.
  std::vector<std::string> expected_labels() const;
  /// Stats for every choice state visited so far, keyed by state index order.
  std::vector<const ChoiceStats*> visited_stats() const;

 private:
  std::shared_ptr<const MonitorAutomaton> automaton_;
  MonitorConfig config_;
  std::string session_id_;
  std::size_t state_;
  Status status_ = Status::Running;
  std::uint64_t seq_ = 0;
  std::vector<std::optional<ChoiceStats>> stats_;

  MonitorEvent make_event(Direction d, const std::string& cp, const std::string& label, Verdict v);
  std::vector<MonitorEvent> violation(Direction d, const std::string& label, const std::string& why);
  ChoiceStats& stats_for(std::size_t state);
};

struct ChoicePointSummary {
  std::string choice_point_id;
  std::uint64_t n = 0;
  struct BranchSummary {
    std::string label;
    std::uint64_t count = 0;
    double p_hat = 0.0;
    bool warning = false;
  };
  std::vector<BranchSummary> branches;
};

enum class SessionVerdict { Completed, Violation, Aborted };
std::string_view to_string(SessionVerdict v);

struct SessionSummary {
  SessionVerdict verdict = SessionVerdict::Aborted;
  std::vector<ChoicePointSummary> choice_points;
  std::size_t event_count = 0;
  std::string detail;
};

SessionSummary summarize(const MonitorSession& m, std::size_t event_count, std::string detail = {});

using SourceItem = std::variant<TypedMessage, Unrecognized>;

class MessageSource {
 public:
  virtual ~MessageSource() = default;
  /// nullopt on exhaustion; throws on I/O failure.
  virtual std::optional<SourceItem> next() = 0;
};

/// Drives the monitor until session end, violation or source exhaustion.
SessionSummary run_session(std::shared_ptr<const MonitorAutomaton> automaton, const MonitorConfig& config,
                           EventSink& sink, MessageSource& source, const std::string& session_id = "1");

}  // namespace pstmon
