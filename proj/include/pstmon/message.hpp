#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "pstmon/session_type.hpp"

namespace pstmon {

enum class Direction { FromClient, FromServer };
/// Which network side plays the endpoint the PST is written for.
enum class Perspective { Client, Server };

std::string_view to_string(Direction d);
std::string_view to_string(Perspective p);
std::optional<Perspective> perspective_from_string(std::string_view s);

inline Direction opposite(Direction d) {
  return d == Direction::FromClient ? Direction::FromServer : Direction::FromClient;
}

/// Network direction of a message with the given polarity.
inline Direction direction_of(Polarity pol, Perspective persp) {
  const bool client_sends = (pol == Polarity::Send) == (persp == Perspective::Client);
  return client_sends ? Direction::FromClient : Direction::FromServer;
}

using Value = std::variant<std::int64_t, std::string, bool>;

Sort sort_of(const Value& v);
std::string render_value(const Value& v);

struct TypedMessage {
  Direction direction = Direction::FromClient;
  std::string label;
  std::optional<Value> payload;

  friend bool operator==(const TypedMessage&, const TypedMessage&) = default;
};

/// A line that no codec rule recognised, kept verbatim.
struct Unrecognized {
  Direction direction = Direction::FromClient;
  std::string raw;
  friend bool operator==(const Unrecognized&, const Unrecognized&) = default;
};

}  // namespace pstmon
