#include <set>
#include <unordered_map>

#include "pstmon/session_type.hpp"

namespace pstmon {

namespace {

struct Scope {
  // var -> true while no choice prefix separates the use from its binder
  std::unordered_map<std::string, int> bound;  // binding depth count (shadowing)
  std::set<std::string> unguarded;
};

void check(const SessionType& t, Scope& scope, std::vector<WellFormednessError>& out) {
  using K = WellFormednessError::Kind;
  switch (t.kind) {
    case SessionType::Kind::End:
      return;
    case SessionType::Kind::Var: {
      auto it = scope.bound.find(t.var);
      if (it == scope.bound.end() || it->second == 0) {
        out.push_back({K::UnboundVar, t.pos, "recursion variable '" + t.var + "' is not bound"});
      } else if (scope.unguarded.count(t.var)) {
        out.push_back({K::UnguardedRec, t.pos,
                       "recursion variable '" + t.var + "' occurs without a choice prefix"});
      }
      return;
    }
    case SessionType::Kind::Rec: {
      ++scope.bound[t.var];
      bool inserted = scope.unguarded.insert(t.var).second;
      check(*t.body, scope, out);
      if (inserted) scope.unguarded.erase(t.var);
      --scope.bound[t.var];
      return;
    }
    case SessionType::Kind::Choice: {
      std::set<std::string> seen;
      DecimalSum sum;
      const Polarity expected = t.choice == ChoiceKind::External ? Polarity::Receive : Polarity::Send;
      for (const Branch& b : t.branches) {
        if (!seen.insert(b.label).second)
          out.push_back({K::DuplicateLabel, b.pos, "label '" + b.label + "' repeated in one choice"});
        if (b.polarity != expected) {
          out.push_back({K::MixedPolarity, b.pos,
                         std::string("branch '") + b.label + "' has polarity " +
                             (b.polarity == Polarity::Send ? "!" : "?") + " inside " +
                             (t.choice == ChoiceKind::External ? "&{...}" : "+{...}")});
        }
        sum.add(b.prob);
      }
      if (!sum.near_one(kProbSumTolerance)) {
        out.push_back({K::ProbSum, t.pos, "branch probabilities sum to " + std::to_string(sum.value())});
      }
      std::set<std::string> saved;
      saved.swap(scope.unguarded);
      for (const Branch& b : t.branches) check(*b.cont, scope, out);
      saved.swap(scope.unguarded);
      return;
    }
  }
}

}  // namespace

std::vector<WellFormednessError> validate(const SessionType& t) {
  std::vector<WellFormednessError> out;
  Scope scope;
  check(t, scope, out);
  return out;
}

}  // namespace pstmon
