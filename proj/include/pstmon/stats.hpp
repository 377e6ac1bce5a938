#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pstmon {

enum class CiKind { Wald, Wilson };
/// Two-sided: z = Φ⁻¹(1 − (1−level)/2). One-sided: z = Φ⁻¹(level).
enum class ZConvention { TwoSided, OneSided };

std::string_view to_string(CiKind k);

/// Inverse of the standard normal CDF, accurate to full double precision on (0,1).
double normal_quantile(double prob);

/// Interval construction for one branch. The z-score is computed once on construction.
class CiMethod {
 public:
  CiMethod() : CiMethod(CiKind::Wald, 0.95) {}
  CiMethod(CiKind kind, double level, ZConvention convention = ZConvention::TwoSided);

  CiKind kind() const { return kind_; }
  double level() const { return level_; }
  ZConvention convention() const { return convention_; }
  double z() const { return z_; }

 private:
  CiKind kind_;
  double level_;
  ZConvention convention_;
  double z_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

/// Interval around the *specified* probability `p` for `n >= 1` observations,
/// clamped to [0,1]. Throws std::invalid_argument when n == 0.
Interval ci_bounds(double p, std::uint64_t n, const CiMethod& method);

enum class BranchStatus { Within, Deviating };
enum class FlagChange { None, Raised, Retracted };

struct BranchEvaluation {
  std::string label;
  BranchStatus status = BranchStatus::Within;
  double p_hat = 0.0;
  Interval ci;
  FlagChange change = FlagChange::None;
};

/// Observation counts and warning flags for one choice point.
class ChoiceStats {
 public:
  struct Branch {
    std::string label;
    double spec_prob = 0.0;
    std::uint64_t count = 0;
    bool warning = false;
  };

  ChoiceStats() = default;
  ChoiceStats(std::string choice_point_id, std::vector<std::pair<std::string, double>> branches);

  const std::string& id() const { return id_; }
  std::uint64_t n() const { return n_; }
  const std::vector<Branch>& branches() const { return branches_; }
  std::size_t index_of(std::string_view label) const;  // npos when absent
  /// Throws std::invalid_argument for unknown labels.
  void observe(std::string_view label);
  void observe_index(std::size_t i);
  /// p̂ for branch i; NaN when n == 0.
  double estimate(std::size_t i) const;

  /// Computes each branch's status against its interval and updates flags.
  /// Below `min_samples` every branch is reported `Within`, so no flag is raised.
  /// Precondition: n >= 1.
  std::vector<BranchEvaluation> evaluate(const CiMethod& method, std::uint64_t min_samples = 1);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::string id_;
  std::vector<Branch> branches_;
  std::uint64_t n_ = 0;
};

}  // namespace pstmon
