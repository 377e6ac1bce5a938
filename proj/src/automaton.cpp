#include "pstmon/automaton.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace pstmon {

std::size_t MonitorStateDef::find(std::string_view label) const {
  for (std::size_t i = 0; i < branches.size(); ++i)
    if (branches[i].label == label) return i;
  return static_cast<std::size_t>(-1);
}

std::size_t MonitorAutomaton::choice_state_count() const {
  std::size_t n = 0;
  for (const auto& s : states) n += s.is_choice();
  return n;
}

std::vector<std::string> MonitorAutomaton::labels() const {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& s : states)
    for (const auto& t : s.branches)
      if (seen.insert(t.label).second) out.push_back(t.label);
  return out;
}

namespace {

class Compiler {
 public:
  MonitorAutomaton run(const SessionType& t) {
    a_.states.emplace_back();  // shared EndState at index 0
    a_.end_state = 0;
    a_.initial = compile(t, "root");
    return std::move(a_);
  }

 private:
  MonitorAutomaton a_;
  std::vector<std::pair<std::string, std::size_t>> env_;

  // Index the (possibly rec-wrapped) type `t` will occupy once compiled.
  std::size_t head_index(const SessionType* t) const {
    while (t->kind == SessionType::Kind::Rec) t = t->body.get();
    switch (t->kind) {
      case SessionType::Kind::End: return a_.end_state;
      case SessionType::Kind::Choice: return a_.states.size();
      case SessionType::Kind::Var: return lookup(t->var);
      case SessionType::Kind::Rec: break;
    }
    throw std::logic_error("unreachable");
  }

  std::size_t lookup(const std::string& var) const {
    for (auto it = env_.rbegin(); it != env_.rend(); ++it)
      if (it->first == var) return it->second;
    throw std::logic_error("compile: unbound recursion variable " + var);
  }

  std::size_t compile(const SessionType& t, const std::string& path) {
    switch (t.kind) {
      case SessionType::Kind::End:
        return a_.end_state;
      case SessionType::Kind::Var:
        return lookup(t.var);
      case SessionType::Kind::Rec: {
        env_.emplace_back(t.var, head_index(t.body.get()));
        std::size_t idx = compile(*t.body, path);
        env_.pop_back();
        return idx;
      }
      case SessionType::Kind::Choice: {
        std::size_t idx = a_.states.size();
        a_.states.emplace_back();
        MonitorStateDef def;
        def.kind = MonitorStateDef::Kind::Choice;
        def.polarity = t.branches.front().polarity;
        def.choice_point_id = path;
        for (const Branch& b : t.branches) {
          Transition tr;
          tr.label = b.label;
          if (b.payload) tr.sort = b.payload->sort;
          tr.prob = b.prob.value();
          tr.target = compile(*b.cont, path + "." + b.label);
          def.branches.push_back(std::move(tr));
        }
        a_.states[idx] = std::move(def);
        return idx;
      }
    }
    throw std::logic_error("unreachable");
  }
};

}  // namespace

MonitorAutomaton compile(const SessionType& t) {
  return Compiler().run(t);
}

nlohmann::json automaton_to_json(const MonitorAutomaton& a) {
  nlohmann::json states = nlohmann::json::array();
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    const auto& s = a.states[i];
    nlohmann::json js;
    js["id"] = i;
    if (!s.is_choice()) {
      js["kind"] = "end";
    } else {
      js["kind"] = "choice";
      js["polarity"] = s.polarity == Polarity::Send ? "!" : "?";
      js["choice_point_id"] = s.choice_point_id;
      nlohmann::json trs = nlohmann::json::array();
      for (const auto& t : s.branches) {
        trs.push_back({{"label", t.label},
                       {"payload", t.sort ? nlohmann::json(std::string(to_string(*t.sort))) : nlohmann::json()},
                       {"prob", t.prob},
                       {"target", t.target}});
      }
      js["transitions"] = std::move(trs);
    }
    states.push_back(std::move(js));
  }
  return {{"format", "pstmon-automaton/1"}, {"initial", a.initial}, {"end", a.end_state}, {"states", states}};
}

MonitorAutomaton automaton_from_json(const nlohmann::json& j) {
  try {
    MonitorAutomaton a;
    a.initial = j.at("initial").get<std::size_t>();
    a.end_state = j.at("end").get<std::size_t>();
    for (const auto& js : j.at("states")) {
      MonitorStateDef s;
      const std::string kind = js.at("kind").get<std::string>();
      if (kind == "choice") {
        s.kind = MonitorStateDef::Kind::Choice;
        const std::string pol = js.at("polarity").get<std::string>();
        if (pol != "!" && pol != "?") throw std::runtime_error("bad polarity '" + pol + "'");
        s.polarity = pol == "!" ? Polarity::Send : Polarity::Receive;
        s.choice_point_id = js.at("choice_point_id").get<std::string>();
        for (const auto& jt : js.at("transitions")) {
          Transition t;
          t.label = jt.at("label").get<std::string>();
          if (!jt.at("payload").is_null()) {
            auto sort = sort_from_string(jt.at("payload").get<std::string>());
            if (!sort) throw std::runtime_error("unknown sort in transition " + t.label);
            t.sort = *sort;
          }
          t.prob = jt.at("prob").get<double>();
          t.target = jt.at("target").get<std::size_t>();
          s.branches.push_back(std::move(t));
        }
        if (s.branches.empty()) throw std::runtime_error("choice state without transitions");
      } else if (kind != "end") {
        throw std::runtime_error("unknown state kind '" + kind + "'");
      }
      a.states.push_back(std::move(s));
    }
    const auto n = a.states.size();
    if (a.initial >= n || a.end_state >= n || a.states[a.end_state].is_choice())
      throw std::runtime_error("initial/end state index out of range");
    for (const auto& s : a.states)
      for (const auto& t : s.branches)
        if (t.target >= n) throw std::runtime_error("transition target out of range for " + t.label);
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed automaton document: ") + e.what());
  }
}

MonitorAutomaton load_automaton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return automaton_from_json(j);
}

}  // namespace pstmon
