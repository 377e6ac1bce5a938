#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pstmon {

enum class Sort { Int, String, Bool };

std::string_view to_string(Sort s);
std::optional<Sort> sort_from_string(std::string_view name);

/// `!` (the described endpoint sends) or `?` (it receives).
enum class Polarity { Send, Receive };

struct SourcePos {
  int line = 0;
  int column = 0;
};

/// Exact decimal in [0,1]: `units / 10^scale`.
///
/// Kept exact so that sums like 0.75 + 0.2 + 0.05 are checked without binary
/// rounding; `value()` is only used by the statistics layer.
class Probability {
 public:
  static constexpr int kMaxScale = 18;

  Probability() = default;
  Probability(std::int64_t units, int scale);

  /// Parses `0`, `1`, `0.75`, `.5`, `1.0`. Throws std::invalid_argument on
  /// anything else, including values above 1.
  static Probability parse(std::string_view text);

  std::int64_t units() const { return units_; }
  int scale() const { return scale_; }
  double value() const;
  std::string to_string() const;

  friend bool operator==(const Probability& a, const Probability& b);

 private:
  std::int64_t units_ = 0;
  int scale_ = 0;
};

/// Sum of exact decimals, returned as `num / 10^scale` in 128-bit.
struct DecimalSum {
  __int128 units = 0;
  int scale = 0;
  void add(const Probability& p);
  double value() const;
  /// |sum - 1| <= tolerance, evaluated exactly.
  bool near_one(double tolerance) const;
};

struct Payload {
  std::string var;
  Sort sort = Sort::Int;
  friend bool operator==(const Payload&, const Payload&) = default;
};

struct SessionType;
using TypePtr = std::shared_ptr<const SessionType>;

struct Branch {
  Polarity polarity = Polarity::Send;
  std::string label;
  std::optional<Payload> payload;
  Probability prob;
  TypePtr cont;
  SourcePos pos;
};

enum class ChoiceKind { External, Internal };

struct SessionType {
  enum class Kind { End, Rec, Var, Choice };

  Kind kind = Kind::End;
  SourcePos pos;
  // Rec / Var
  std::string var;
  TypePtr body;
  // Choice
  ChoiceKind choice = ChoiceKind::Internal;
  std::vector<Branch> branches;

  static TypePtr make_end(SourcePos pos = {});
  static TypePtr make_var(std::string name, SourcePos pos = {});
  static TypePtr make_rec(std::string name, TypePtr body, SourcePos pos = {});
  static TypePtr make_choice(ChoiceKind kind, std::vector<Branch> branches, SourcePos pos = {});
};

/// Structural equality, ignoring source positions.
bool structurally_equal(const SessionType& a, const SessionType& b);

/// Braceless form for singleton choices; re-parses to an equal AST.
std::string pretty_print(const SessionType& t);

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownSort, BadProbability, MultiPayload };
  ParseError(Kind kind, SourcePos pos, const std::string& msg);
  Kind kind() const { return kind_; }
  SourcePos pos() const { return pos_; }

 private:
  Kind kind_;
  SourcePos pos_;
};

std::string_view to_string(ParseError::Kind k);

TypePtr parse_pst(std::string_view source);
TypePtr parse_pst_file(const std::string& path);

struct WellFormednessError {
  enum class Kind { ProbSum, DuplicateLabel, UnguardedRec, UnboundVar, MixedPolarity };
  Kind kind;
  SourcePos pos;
  std::string message;
};

std::string_view to_string(WellFormednessError::Kind k);

/// Tolerance for the sum-to-one check.
inline constexpr double kProbSumTolerance = 1e-9;

std::vector<WellFormednessError> validate(const SessionType& t);

/// Parses and validates; throws std::runtime_error listing every problem.
TypePtr load_valid_pst(const std::string& path);

}  // namespace pstmon
