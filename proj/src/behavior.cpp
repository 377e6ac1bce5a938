#include "pstmon/behavior.hpp"

#include <cmath>
#include <stdexcept>

namespace pstmon::sim {

void check_behavior(const ScriptedBehavior& b) {
  if (auto* ff = std::get_if<FixedFrequencies>(&b.policy)) {
    if (ff->weights.empty()) throw std::invalid_argument("FixedFrequencies needs at least one label");
    double sum = 0;
    for (const auto& [label, p] : ff->weights) {
      if (p < 0 || p > 1) throw std::invalid_argument("frequency of " + label + " outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("FixedFrequencies weights must sum to 1");
  }
}

LabelSchedule::LabelSchedule(const ScriptedBehavior& b) : behavior_(b), rng_(b.seed) {
  check_behavior(b);
  if (auto* ff = std::get_if<FixedFrequencies>(&behavior_.policy)) counts_.assign(ff->weights.size(), 0);
}

std::string LabelSchedule::next() {
  const std::uint64_t round = round_++;
  return std::visit(
      [&](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Sequence>) {
          return round < p.labels.size() ? p.labels[round] : std::string();
        } else if constexpr (std::is_same_v<T, HelpSpammer>) {
          if (round < p.rounds) return "Help";
          return round == p.rounds ? "Quit" : std::string();
        } else if constexpr (std::is_same_v<T, MailLoop>) {
          return std::string();
        } else {
          if (round >= behavior_.max_rounds) return round == behavior_.max_rounds ? "Quit" : std::string();
          std::size_t pick = 0;
          if (p.sampling == Sampling::Iid) {
            double u = rng_.uniform();
            double acc = 0;
            pick = p.weights.size() - 1;
            for (std::size_t i = 0; i < p.weights.size(); ++i) {
              acc += p.weights[i].second;
              if (u < acc) {
                pick = i;
                break;
              }
            }
          } else {
            double best = -1e300;
            std::size_t ties = 0;
            for (std::size_t i = 0; i < p.weights.size(); ++i) {
              double deficit = p.weights[i].second * static_cast<double>(round + 1) - static_cast<double>(counts_[i]);
              if (deficit > best + 1e-12) {
                best = deficit;
                pick = i;
                ties = 1;
              } else if (std::abs(deficit - best) <= 1e-12) {
                // Reservoir choice among equal deficits.
                ++ties;
                if (rng_.next() % ties == 0) pick = i;
              }
            }
          }
          ++counts_[pick];
          return p.weights[pick].first;
        }
      },
      behavior_.policy);
}

}  // namespace pstmon::sim
