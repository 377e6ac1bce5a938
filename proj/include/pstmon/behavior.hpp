#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace pstmon::sim {

/// How FixedFrequencies turns probabilities into choices.
///  - Iid: independent seeded draws.
///  - Balanced: pick the label furthest below its quota p_i·(n+1) − c_i,
///    ties broken by the seeded generator. Counts never drift more than one
///    observation from their quota.
enum class Sampling { Iid, Balanced };

struct FixedFrequencies {
  std::vector<std::pair<std::string, double>> weights;
  Sampling sampling = Sampling::Iid;
};

struct Sequence {
  std::vector<std::string> labels;
};

/// Help on every round, then Quit after `rounds`.
struct HelpSpammer {
  std::uint64_t rounds = 50;
};

struct MailLoop {
  std::uint64_t emails = 1;
  std::uint64_t recipients = 1;
};

using Policy = std::variant<FixedFrequencies, Sequence, HelpSpammer, MailLoop>;

struct ScriptedBehavior {
  std::uint64_t seed = 0;
  Policy policy;
  /// Safety cap on game rounds; when reached the client sends `Quit`.
  std::uint64_t max_rounds = 100000;
};

/// 64-bit generator with a portable uniform draw in [0,1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::uint64_t next() { return gen_(); }
  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

/// Produces the top-level choice of each game round for one behaviour.
class LabelSchedule {
 public:
  explicit LabelSchedule(const ScriptedBehavior& b);
  /// Next label, or empty string when the script is exhausted.
  std::string next();

 private:
  ScriptedBehavior behavior_;
  Rng rng_;
  std::uint64_t round_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Throws std::invalid_argument when FixedFrequencies weights do not sum to 1.
void check_behavior(const ScriptedBehavior& b);

}  // namespace pstmon::sim
