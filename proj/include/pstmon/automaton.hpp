#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pstmon/session_type.hpp"

namespace pstmon {

struct Transition {
  std::string label;
  std::optional<Sort> sort;
  double prob = 1.0;
  std::size_t target = 0;
};

struct MonitorStateDef {
  enum class Kind { Choice, End };
  Kind kind = Kind::End;
  Polarity polarity = Polarity::Send;
  std::string choice_point_id;
  std::vector<Transition> branches;

  bool is_choice() const { return kind == Kind::Choice; }
  /// npos if the label is not outgoing from this state.
  std::size_t find(std::string_view label) const;
};

/// Finite state machine compiled from a validated session type. Recursion is
/// resolved into back-edges; one choice state per syntactic choice occurrence.
struct MonitorAutomaton {
  std::vector<MonitorStateDef> states;
  std::size_t initial = 0;
  std::size_t end_state = 0;

  std::size_t choice_state_count() const;
  /// Distinct labels across all states.
  std::vector<std::string> labels() const;
};

/// Precondition: validate(t) is empty.
MonitorAutomaton compile(const SessionType& t);

nlohmann::json automaton_to_json(const MonitorAutomaton& a);
/// Throws std::runtime_error on malformed documents.
MonitorAutomaton automaton_from_json(const nlohmann::json& j);
MonitorAutomaton load_automaton(const std::string& path);

}  // namespace pstmon
