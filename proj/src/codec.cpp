#include "pstmon/codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace pstmon {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += "; ";
    s += x;
  }
  return s;
}

std::optional<Value> convert(const std::string& text, Sort sort) {
  switch (sort) {
    case Sort::Int: {
      std::int64_t v = 0;
      const char* first = text.data();
      const char* last = first + text.size();
      if (first != last && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
      return Value{v};
    }
    case Sort::String:
      return Value{text};
    case Sort::Bool: {
      std::string lower(text);
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
      if (lower == "true") return Value{true};
      if (lower == "false") return Value{false};
      return std::nullopt;
    }
  }
  return std::nullopt;
}

Value sample_value(Sort s) {
  switch (s) {
    case Sort::Int: return Value{std::int64_t{42}};
    case Sort::String: return Value{std::string("sample")};
    case Sort::Bool: return Value{true};
  }
  return Value{std::int64_t{0}};
}

std::string render(const CodecRule& r, const std::optional<Value>& payload) {
  std::string out;
  out.reserve(r.templ.size() + 16);
  const std::string key = "{0}";
  std::size_t pos = 0;
  while (true) {
    std::size_t at = r.templ.find(key, pos);
    if (at == std::string::npos) break;
    out.append(r.templ, pos, at - pos);
    if (payload) out += render_value(*payload);
    pos = at + key.size();
  }
  out.append(r.templ, pos, std::string::npos);
  return out;
}

}  // namespace

CodecError::CodecError(std::vector<std::string> problems)
    : std::runtime_error("invalid codec: " + join(problems)), problems_(std::move(problems)) {}

std::vector<LabelSignature> signature_of(const MonitorAutomaton& a, Perspective perspective) {
  std::vector<LabelSignature> out;
  for (const auto& s : a.states) {
    if (!s.is_choice()) continue;
    const Direction d = direction_of(s.polarity, perspective);
    for (const auto& t : s.branches) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const LabelSignature& x) { return x.label == t.label && x.direction == d; });
      if (it == out.end()) {
        out.push_back({t.label, d, t.sort});
      } else if (it->payload != t.sort) {
        throw std::runtime_error("label '" + t.label + "' is used with different payload sorts");
      }
    }
  }
  return out;
}

Codec::Codec(Framing framing, std::vector<CodecRule> rules)
    : framing_(framing), terminator_(framing == Framing::CRLF ? "\r\n" : "\n"), rules_(std::move(rules)) {}

const CodecRule* Codec::find_rule(const std::string& label, Direction d) const {
  for (const auto& r : rules_)
    if (r.label == label && r.direction == d) return &r;
  return nullptr;
}

Decoded Codec::decode(Direction direction, const std::string& line) const {
  std::smatch m;
  for (const auto& r : rules_) {
    if (r.direction != direction) continue;
    if (!std::regex_match(line, m, r.re)) continue;
    TypedMessage msg{direction, r.label, std::nullopt};
    if (r.payload) {
      auto v = convert(m[1].str(), *r.payload);
      if (!v) return Unrecognized{direction, line};
      msg.payload = std::move(v);
    }
    return msg;
  }
  return Unrecognized{direction, line};
}

std::string Codec::encode(const TypedMessage& msg) const {
  const CodecRule* r = find_rule(msg.label, msg.direction);
  if (!r) throw std::out_of_range("no codec rule for " + msg.label + " from " + std::string(to_string(msg.direction)));
  return render(*r, msg.payload);
}

std::vector<std::string> Codec::check_against(const std::vector<LabelSignature>& sig,
                                              std::vector<std::string>* warnings) const {
  std::vector<std::string> problems;
  std::map<std::pair<std::string, Direction>, int> counts;
  for (const auto& r : rules_) ++counts[{r.label, r.direction}];

  for (const auto& s : sig) {
    const int c = counts[{s.label, s.direction}];
    const std::string where = "'" + s.label + "' from " + std::string(to_string(s.direction));
    if (c == 0) {
      problems.push_back("missing rule for " + where);
      continue;
    }
    if (c > 1) problems.push_back("duplicate rules for " + where);
    const CodecRule* r = find_rule(s.label, s.direction);
    if (r->payload != s.payload) {
      problems.push_back("payload sort mismatch for " + where + ": type says " +
                         (s.payload ? std::string(to_string(*s.payload)) : "none") + ", codec says " +
                         (r->payload ? std::string(to_string(*r->payload)) : "none"));
    }
    const std::size_t groups = r->re.mark_count();
    const std::size_t want = s.payload ? 1 : 0;
    if (groups != want) {
      problems.push_back("capture group count " + std::to_string(groups) + " for " + where + " but payload arity is " +
                         std::to_string(want));
    }
  }
  for (const auto& r : rules_) {
    bool used = std::any_of(sig.begin(), sig.end(),
                            [&](const LabelSignature& s) { return s.label == r.label && s.direction == r.direction; });
    if (!used)
      problems.push_back("rule for '" + r.label + "' from " + std::string(to_string(r.direction)) +
                         " has no counterpart in the session type");
  }
  if (!problems.empty()) return problems;

  // Each rule's rendered sample must decode back to itself.
  for (const auto& r : rules_) {
    std::optional<Value> v;
    if (r.payload) v = sample_value(*r.payload);
    const std::string line = render(r, v);
    Decoded d = decode(r.direction, line);
    const TypedMessage want{r.direction, r.label, v};
    if (auto* got = std::get_if<TypedMessage>(&d); !got || !(*got == want)) {
      problems.push_back("template of '" + r.label + "' renders \"" + line + "\" which does not decode back to '" +
                         r.label + "'");
      continue;
    }
    if (warnings) {
      for (const auto& other : rules_) {
        if (&other == &r || other.direction != r.direction) continue;
        if (std::regex_match(line, other.re))
          warnings->push_back("pattern of '" + other.label + "' also matches the rendered template of '" + r.label +
                              "'");
      }
    }
  }
  return problems;
}

Codec parse_codec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw CodecError({std::string("malformed JSON: ") + e.what()});
  }
  std::vector<std::string> problems;
  Framing framing = Framing::LF;
  std::vector<CodecRule> rules;
  try {
    const std::string fr = j.at("framing").get<std::string>();
    if (fr == "CRLF") {
      framing = Framing::CRLF;
    } else if (fr != "LF") {
      problems.push_back("framing must be \"LF\" or \"CRLF\"");
    }
    for (const auto& jr : j.at("rules")) {
      CodecRule r;
      r.label = jr.at("label").get<std::string>();
      const std::string dir = jr.at("direction").get<std::string>();
      if (dir == "client") {
        r.direction = Direction::FromClient;
      } else if (dir == "server") {
        r.direction = Direction::FromServer;
      } else {
        problems.push_back("rule '" + r.label + "': direction must be \"client\" or \"server\"");
      }
      r.pattern = jr.at("pattern").get<std::string>();
      const auto& pl = jr.at("payload");
      if (!pl.is_null()) {
        auto sort = sort_from_string(pl.get<std::string>());
        if (!sort) {
          problems.push_back("rule '" + r.label + "': unknown payload sort");
        } else {
          r.payload = *sort;
        }
      }
      r.templ = jr.at("template").get<std::string>();
      try {
        r.re = std::regex(r.pattern, std::regex::ECMAScript | std::regex::optimize);
      } catch (const std::regex_error& e) {
        problems.push_back("rule '" + r.label + "': bad regex: " + e.what());
      }
      rules.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    problems.push_back(std::string("schema error: ") + e.what());
  }
  if (!problems.empty()) throw CodecError(std::move(problems));
  return Codec(framing, std::move(rules));
}

Codec load_codec(const std::string& path, const MonitorAutomaton& a, Perspective perspective,
                 std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError({"cannot read " + path});
  std::ostringstream ss;
  ss << in.rdbuf();
  Codec c = parse_codec(ss.str());
  std::vector<LabelSignature> sig;
  try {
    sig = signature_of(a, perspective);
  } catch (const std::runtime_error& e) {
    throw CodecError({e.what()});
  }
  auto problems = c.check_against(sig, warnings);
  if (!problems.empty()) throw CodecError(std::move(problems));
  return c;
}

}  // namespace pstmon
