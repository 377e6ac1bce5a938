#include "pstmon/monitor.hpp"

#include <chrono>

namespace pstmon {

std::string_view to_string(Direction d) {
  return d == Direction::FromClient ? "client" : "server";
}

std::string_view to_string(Perspective p) {
  return p == Perspective::Client ? "client" : "server";
}

std::optional<Perspective> perspective_from_string(std::string_view s) {
  if (s == "client") return Perspective::Client;
  if (s == "server") return Perspective::Server;
  return std::nullopt;
}

Sort sort_of(const Value& v) {
  switch (v.index()) {
    case 0: return Sort::Int;
    case 1: return Sort::String;
    default: return Sort::Bool;
  }
}

std::string render_value(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<bool>(v) ? "true" : "false";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Ok: return "ok";
    case Verdict::WarningRaised: return "warning_raised";
    case Verdict::WarningRetracted: return "warning_retracted";
    case Verdict::Violation: return "violation";
    case Verdict::SessionEnd: return "session_end";
    case Verdict::Aborted: return "aborted";
  }
  return "?";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
  for (Verdict v : {Verdict::Ok, Verdict::WarningRaised, Verdict::WarningRetracted, Verdict::Violation,
                    Verdict::SessionEnd, Verdict::Aborted})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::string_view to_string(SessionVerdict v) {
  switch (v) {
    case SessionVerdict::Completed: return "completed";
    case SessionVerdict::Violation: return "violation";
    case SessionVerdict::Aborted: return "aborted";
  }
  return "?";
}

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string s = "{";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) s += ", ";
    s += labels[i];
  }
  return s + "}";
}

}  // namespace

MonitorSession::MonitorSession(std::shared_ptr<const MonitorAutomaton> automaton, MonitorConfig config,
                               std::string session_id)
    : automaton_(std::move(automaton)),
      config_(config),
      session_id_(std::move(session_id)),
      state_(automaton_->initial),
      stats_(automaton_->states.size()) {}

std::vector<std::string> MonitorSession::expected_labels() const {
  std::vector<std::string> out;
  for (const auto& t : automaton_->states[state_].branches) out.push_back(t.label);
  return out;
}

std::vector<const ChoiceStats*> MonitorSession::visited_stats() const {
  std::vector<const ChoiceStats*> out;
  for (const auto& s : stats_)
    if (s) out.push_back(&*s);
  return out;
}

ChoiceStats& MonitorSession::stats_for(std::size_t state) {
  auto& slot = stats_[state];
  if (!slot) {
    const auto& def = automaton_->states[state];
    std::vector<std::pair<std::string, double>> bs;
    bs.reserve(def.branches.size());
    for (const auto& t : def.branches) bs.emplace_back(t.label, t.prob);
    slot.emplace(def.choice_point_id, std::move(bs));
  }
  return *slot;
}

MonitorEvent MonitorSession::make_event(Direction d, const std::string& cp, const std::string& label, Verdict v) {
  MonitorEvent e;
  e.session_id = session_id_;
  e.seq = ++seq_;
  e.direction = d;
  e.choice_point_id = cp;
  e.label = label;
  e.verdict = v;
  e.timestamp_ms = now_ms();
  return e;
}

std::vector<MonitorEvent> MonitorSession::violation(Direction d, const std::string& label, const std::string& why) {
  const auto& def = automaton_->states[state_];
  MonitorEvent e = make_event(d, def.is_choice() ? def.choice_point_id : "end", label, Verdict::Violation);
  e.detail = why + "; expected " + join_labels(expected_labels());
  status_ = Status::Violated;
  return {std::move(e)};
}

std::vector<MonitorEvent> MonitorSession::step(const Unrecognized& raw) {
  if (finished() && status_ != Status::Ended) return {};
  return violation(raw.direction, raw.raw, "unrecognized message '" + raw.raw + "'");
}

std::vector<MonitorEvent> MonitorSession::step(const TypedMessage& msg) {
  if (status_ == Status::Violated || status_ == Status::Aborted) return {};
  const MonitorStateDef& def = automaton_->states[state_];
  if (status_ == Status::Ended || !def.is_choice())
    return violation(msg.direction, msg.label, "message after session end");

  const Direction expected_dir = direction_of(def.polarity, config_.perspective);
  if (msg.direction != expected_dir) {
    return violation(msg.direction, msg.label,
                     "message from " + std::string(to_string(msg.direction)) + " while waiting for " +
                         std::string(to_string(expected_dir)));
  }
  const std::size_t bi = def.find(msg.label);
  if (bi == static_cast<std::size_t>(-1))
    return violation(msg.direction, msg.label, "unexpected label '" + msg.label + "'");
  const Transition& tr = def.branches[bi];
  if (tr.sort.has_value() != msg.payload.has_value() || (tr.sort && sort_of(*msg.payload) != *tr.sort)) {
    std::string want = tr.sort ? std::string(to_string(*tr.sort)) : "no payload";
    return violation(msg.direction, msg.label, "payload of '" + msg.label + "' does not match " + want);
  }

  std::vector<MonitorEvent> events;
  ChoiceStats& st = stats_for(state_);
  st.observe_index(bi);
  if (def.branches.size() == 1) {
    MonitorEvent e = make_event(msg.direction, def.choice_point_id, msg.label, Verdict::Ok);
    e.n = st.n();
    e.p_hat = 1.0;
    e.ci_lo = 1.0;
    e.ci_hi = 1.0;
    events.push_back(std::move(e));
  } else {
    auto evals = st.evaluate(config_.method, config_.min_samples);
    auto emit = [&](const BranchEvaluation& ev) {
      Verdict v = ev.change == FlagChange::Raised      ? Verdict::WarningRaised
                  : ev.change == FlagChange::Retracted ? Verdict::WarningRetracted
                                                       : Verdict::Ok;
      MonitorEvent e = make_event(msg.direction, def.choice_point_id, ev.label, v);
      e.n = st.n();
      e.p_hat = ev.p_hat;
      e.ci_lo = ev.ci.lo;
      e.ci_hi = ev.ci.hi;
      events.push_back(std::move(e));
    };
    emit(evals[bi]);
    for (std::size_t i = 0; i < evals.size(); ++i)
      if (i != bi) emit(evals[i]);
  }

  state_ = tr.target;
  if (!automaton_->states[state_].is_choice()) {
    status_ = Status::Ended;
    events.push_back(make_event(msg.direction, "end", msg.label, Verdict::SessionEnd));
  }
  return events;
}

std::vector<MonitorEvent> MonitorSession::abort(const std::string& reason) {
  if (status_ != Status::Running) return {};
  status_ = Status::Aborted;
  const auto& def = automaton_->states[state_];
  MonitorEvent e = make_event(Direction::FromClient, def.choice_point_id, "", Verdict::Aborted);
  e.detail = reason;
  return {std::move(e)};
}

SessionSummary summarize(const MonitorSession& m, std::size_t event_count, std::string detail) {
  SessionSummary s;
  switch (m.status()) {
    case MonitorSession::Status::Ended: s.verdict = SessionVerdict::Completed; break;
    case MonitorSession::Status::Violated: s.verdict = SessionVerdict::Violation; break;
    default: s.verdict = SessionVerdict::Aborted; break;
  }
  for (const ChoiceStats* st : m.visited_stats()) {
    ChoicePointSummary cp;
    cp.choice_point_id = st->id();
    cp.n = st->n();
    for (std::size_t i = 0; i < st->branches().size(); ++i) {
      const auto& b = st->branches()[i];
      cp.branches.push_back({b.label, b.count, st->estimate(i), b.warning});
    }
    s.choice_points.push_back(std::move(cp));
  }
  s.event_count = event_count;
  s.detail = std::move(detail);
  return s;
}

SessionSummary run_session(std::shared_ptr<const MonitorAutomaton> automaton, const MonitorConfig& config,
                           EventSink& sink, MessageSource& source, const std::string& session_id) {
  MonitorSession m(std::move(automaton), config, session_id);
  std::size_t count = 0;
  std::string detail;
  auto deliver = [&](std::vector<MonitorEvent> evs) {
    for (auto& e : evs) {
      if (e.verdict == Verdict::Violation) detail = e.detail;
      sink.write(e);
      ++count;
    }
  };
  try {
    while (!m.finished()) {
      auto item = source.next();
      if (!item) {
        // Exhaustion before reaching the end state is a premature close.
        // An empty source yields no events at all.
        if (count > 0) deliver(m.abort("message source exhausted"));
        break;
      }
      std::visit([&](const auto& x) { deliver(m.step(x)); }, *item);
    }
  } catch (const std::exception& e) {
    detail = e.what();
    deliver(m.abort(detail));
  }
  auto s = summarize(m, count, detail);
  return s;
}

}  // namespace pstmon
