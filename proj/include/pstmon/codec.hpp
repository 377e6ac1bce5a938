#pragma once

#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pstmon/automaton.hpp"
#include "pstmon/message.hpp"

namespace pstmon {

enum class Framing { LF, CRLF };

struct CodecRule {
  std::string label;
  Direction direction = Direction::FromClient;
  std::string pattern;
  std::optional<Sort> payload;
  std::string templ;
  std::regex re;  // whole-line match of `pattern`
};

/// (label, direction, payload sort) triples a codec must cover.
struct LabelSignature {
  std::string label;
  Direction direction;
  std::optional<Sort> payload;
};

/// Label signature of an automaton under a perspective. Throws
/// std::runtime_error when one label is used with two different sorts in
/// the same direction.
std::vector<LabelSignature> signature_of(const MonitorAutomaton& a, Perspective perspective);

class CodecError : public std::runtime_error {
 public:
  CodecError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

using Decoded = std::variant<TypedMessage, Unrecognized>;

/// Declarative connection manager: text lines <-> typed messages.
class Codec {
 public:
  Codec() = default;
  Codec(Framing framing, std::vector<CodecRule> rules);

  Framing framing() const { return framing_; }
  const std::string& terminator() const { return terminator_; }
  const std::vector<CodecRule>& rules() const { return rules_; }

  /// First matching rule for the direction wins; payload conversion failure
  /// makes the line Unrecognized.
  Decoded decode(Direction direction, const std::string& line) const;
  /// Throws std::out_of_range when no rule covers (label, direction).
  std::string encode(const TypedMessage& msg) const;

  /// Checks the codec covers exactly the given signature. Returns problems;
  /// empty means valid. `warnings` receives pattern-overlap notes.
  std::vector<std::string> check_against(const std::vector<LabelSignature>& sig,
                                         std::vector<std::string>* warnings = nullptr) const;

 private:
  Framing framing_ = Framing::LF;
  std::string terminator_ = "\n";
  std::vector<CodecRule> rules_;
  const CodecRule* find_rule(const std::string& label, Direction d) const;
};

/// Builds a codec from the JSON document; throws CodecError on schema or regex problems.
Codec parse_codec(const std::string& json_text);
/// Loads a codec file and validates it against the automaton's labels.
Codec load_codec(const std::string& path, const MonitorAutomaton& a, Perspective perspective,
                 std::vector<std::string>* warnings = nullptr);

}  // namespace pstmon
