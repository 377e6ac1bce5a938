#include "pstmon/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pstmon {

std::string_view to_string(CiKind k) {
  return k == CiKind::Wald ? "wald" : "wilson";
}

namespace {

// Acklam's rational approximation of the normal quantile (relative error ~1e-9).
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  if (p < low) {
    double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - low) {
    double q = std::sqrt(-2 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("normal_quantile: probability must be in (0,1)");
  double x = acklam(prob);
  // Halley steps on Φ(x) − prob; Φ via erfc keeps precision in both tails.
  for (int i = 0; i < 2; ++i) {
    double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
    double e = cdf - prob;
    double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
    x = x - u / (1 + x * u / 2);
  }
  return x;
}

CiMethod::CiMethod(CiKind kind, double level, ZConvention convention)
    : kind_(kind), level_(level), convention_(convention) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0,1)");
  z_ = convention == ZConvention::TwoSided ? normal_quantile(1.0 - (1.0 - level) / 2.0) : normal_quantile(level);
}

Interval ci_bounds(double p, std::uint64_t n, const CiMethod& method) {
  if (n == 0) throw std::invalid_argument("ci_bounds: n must be >= 1");
  const double z = method.z();
  const double nn = static_cast<double>(n);
  const double var = p * (1.0 - p);
  Interval out;
  if (method.kind() == CiKind::Wald) {
    const double h = z * std::sqrt(var / nn);
    out = {p - h, p + h};
  } else {
    // (c ∓ h) / (1 + z²/n) rewritten as p² / (c + h) and its mirror image,
    // so that p = 0 and p = 1 give exact 0 and 1 bounds.
    const double z2 = z * z;
    const double h = z * std::sqrt(var / nn + z2 / (4.0 * nn * nn));
    const double q = 1.0 - p;
    out = {p * p / (p + z2 / (2.0 * nn) + h), 1.0 - q * q / (q + z2 / (2.0 * nn) + h)};
  }
  out.lo = std::clamp(out.lo, 0.0, 1.0);
  out.hi = std::clamp(out.hi, 0.0, 1.0);
  return out;
}

ChoiceStats::ChoiceStats(std::string choice_point_id, std::vector<std::pair<std::string, double>> branches)
    : id_(std::move(choice_point_id)) {
  branches_.reserve(branches.size());
  for (auto& [label, p] : branches) branches_.push_back({std::move(label), p, 0, false});
}

std::size_t ChoiceStats::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < branches_.size(); ++i)
    if (branches_[i].label == label) return i;
  return npos;
}

void ChoiceStats::observe(std::string_view label) {
  std::size_t i = index_of(label);
  if (i == npos) throw std::invalid_argument("choice point " + id_ + " has no branch '" + std::string(label) + "'");
  observe_index(i);
}

void ChoiceStats::observe_index(std::size_t i) {
  ++branches_.at(i).count;
  ++n_;
}

double ChoiceStats::estimate(std::size_t i) const {
  if (n_ == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(branches_.at(i).count) / static_cast<double>(n_);
}

std::vector<BranchEvaluation> ChoiceStats::evaluate(const CiMethod& method, std::uint64_t min_samples) {
  if (n_ == 0) throw std::logic_error("evaluate before any observation at " + id_);
  std::vector<BranchEvaluation> out;
  out.reserve(branches_.size());
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    Branch& b = branches_[i];
    BranchEvaluation ev;
    ev.label = b.label;
    ev.p_hat = estimate(i);
    ev.ci = ci_bounds(b.spec_prob, n_, method);
    const bool inside = ev.ci.lo <= ev.p_hat && ev.p_hat <= ev.ci.hi;
    ev.status = (inside || n_ < min_samples) ? BranchStatus::Within : BranchStatus::Deviating;
    const bool flag = ev.status == BranchStatus::Deviating;
    if (flag && !b.warning) ev.change = FlagChange::Raised;
    if (!flag && b.warning) ev.change = FlagChange::Retracted;
    b.warning = flag;
    out.push_back(std::move(ev));
  }
  return out;
}

}  // namespace pstmon
