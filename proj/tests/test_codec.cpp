#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "pstmon/codec.hpp"
#include "support.hpp"

using namespace pstmon;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MonitorAutomaton game_automaton() {
  return compile(*load_valid_pst(testsupport::protocol("game.pst")));
}

Codec game_codec() {
  return load_codec(testsupport::protocol("game.codec.json"), game_automaton(), Perspective::Client);
}

// Writes a modified copy of the game codec and loads it against the game type.
std::vector<std::string> problems_after(const std::function<void(nlohmann::json&)>& edit,
                                        std::vector<std::string>* warnings = nullptr) {
  auto j = nlohmann::json::parse(read_file(testsupport::protocol("game.codec.json")));
  edit(j);
  const fs::path p = fs::temp_directory_path() / ("pstmon_codec_" + std::to_string(::getpid()) + ".json");
  std::ofstream(p) << j.dump();
  try {
    load_codec(p.string(), game_automaton(), Perspective::Client, warnings);
  } catch (const CodecError& e) {
    fs::remove(p);
    return e.problems();
  }
  fs::remove(p);
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& word) {
  for (const auto& p : problems)
    if (p.find(word) != std::string::npos) return true;
  return false;
}

void erase_rule(nlohmann::json& j, const std::string& label) {
  auto& rules = j["rules"];
  for (auto it = rules.begin(); it != rules.end(); ++it) {
    if ((*it)["label"] == label) {
      rules.erase(it);
      return;
    }
  }
}

nlohmann::json& rule(nlohmann::json& j, const std::string& label) {
  for (auto& r : j["rules"])
    if (r["label"] == label) return r;
  throw std::logic_error("no rule " + label);
}

}  // namespace

TEST_CASE("guessing-game translations") {
  Codec c = game_codec();
  CHECK(c.rules().size() == 6);
  CHECK(c.terminator() == "\n");

  auto d = c.decode(Direction::FromClient, "GUESS 23");
  REQUIRE(std::holds_alternative<TypedMessage>(d));
  CHECK(std::get<TypedMessage>(d) == TypedMessage{Direction::FromClient, "Guess", Value{std::int64_t{23}}});
  CHECK(std::get<TypedMessage>(c.decode(Direction::FromServer, "CORRECT")).label == "Correct");
  auto hint = std::get<TypedMessage>(c.decode(Direction::FromServer, "HINT odd"));
  CHECK(std::get<std::string>(*hint.payload) == "odd");

  CHECK(std::get<Unrecognized>(c.decode(Direction::FromClient, "FROBNICATE")).raw == "FROBNICATE");
  CHECK(std::holds_alternative<Unrecognized>(c.decode(Direction::FromClient, "GUESS abc")));
  CHECK(std::holds_alternative<Unrecognized>(c.decode(Direction::FromClient, "GUESS 99999999999999999999")));
  // Whole-line match and direction matter.
  CHECK(std::holds_alternative<Unrecognized>(c.decode(Direction::FromClient, "GUESS 23 ")));
  CHECK(std::holds_alternative<Unrecognized>(c.decode(Direction::FromServer, "GUESS 23")));
  CHECK(std::holds_alternative<Unrecognized>(c.decode(Direction::FromClient, "CORRECT")));

  CHECK(c.encode({Direction::FromServer, "Correct", std::nullopt}) == "CORRECT");
  CHECK(c.encode({Direction::FromClient, "Guess", Value{std::int64_t{23}}}) == "GUESS 23");
  CHECK(c.encode({Direction::FromServer, "Hint", Value{std::string("even")}}) == "HINT even");
  CHECK_THROWS_AS(c.encode({Direction::FromClient, "Hint", Value{std::string("x")}}), std::out_of_range);
}

TEST_CASE("decode inverts encode for every game label") {
  Codec c = game_codec();
  auto sig = signature_of(game_automaton(), Perspective::Client);
  CHECK(sig.size() == 6);
  for (const auto& s : sig) {
    TypedMessage m{s.direction, s.label, std::nullopt};
    if (s.payload == Sort::Int) m.payload = Value{std::int64_t{-7}};
    if (s.payload == Sort::String) m.payload = Value{std::string("some text")};
    auto d = c.decode(s.direction, c.encode(m));
    REQUIRE(std::holds_alternative<TypedMessage>(d));
    CHECK(std::get<TypedMessage>(d) == m);
  }
}

TEST_CASE("randomised payload round-trip") {
  Codec c = game_codec();
  std::mt19937_64 rng(99);
  std::vector<std::int64_t> ints = {0, -1, 1, std::numeric_limits<std::int64_t>::min(),
                                    std::numeric_limits<std::int64_t>::max()};
  for (int i = 0; i < 2000; ++i) ints.push_back(static_cast<std::int64_t>(rng()));
  for (std::int64_t v : ints) {
    TypedMessage m{Direction::FromClient, "Guess", Value{v}};
    CHECK(std::get<TypedMessage>(c.decode(Direction::FromClient, c.encode(m))) == m);
  }
  const std::string alphabet = "abcXYZ019 ,.:;<>@!?\"'\\{}[]()\t";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const int len = static_cast<int>(rng() % 40);
    for (int k = 0; k < len; ++k) s += alphabet[rng() % alphabet.size()];
    TypedMessage m{Direction::FromServer, "Hint", Value{s}};
    auto d = c.decode(Direction::FromServer, c.encode(m));
    REQUIRE(std::holds_alternative<TypedMessage>(d));
    CHECK(std::get<TypedMessage>(d) == m);
  }
}

TEST_CASE("Bool payloads") {
  auto j = R"J({"framing": "LF", "rules": [{"label": "Flag", "direction": "client", "pattern": "FLAG (.*)",
                                            "payload": "Bool", "template": "FLAG {0}"}]})J";
  Codec b = parse_codec(j);
  CHECK(std::get<bool>(*std::get<TypedMessage>(b.decode(Direction::FromClient, "FLAG TRUE")).payload));
  CHECK_FALSE(std::get<bool>(*std::get<TypedMessage>(b.decode(Direction::FromClient, "FLAG false")).payload));
  CHECK(std::holds_alternative<Unrecognized>(b.decode(Direction::FromClient, "FLAG yes")));
  CHECK(b.encode({Direction::FromClient, "Flag", Value{true}}) == "FLAG true");
}

TEST_CASE("load-time validation names the offending label") {
  CHECK(problems_after([](nlohmann::json&) {}).empty());

  auto p = problems_after([](nlohmann::json& j) { erase_rule(j, "Hint"); });
  REQUIRE_FALSE(p.empty());
  CHECK(mentions(p, "Hint"));

  p = problems_after([](nlohmann::json& j) { j["rules"].push_back(rule(j, "Help")); });
  CHECK(mentions(p, "duplicate rules for 'Help'"));

  p = problems_after([](nlohmann::json& j) { rule(j, "Guess")["payload"] = "String"; });
  CHECK(mentions(p, "Guess"));

  p = problems_after([](nlohmann::json& j) { rule(j, "Help")["pattern"] = "HELP(.*)"; });
  CHECK(mentions(p, "capture group count 1 for 'Help'"));

  p = problems_after([](nlohmann::json& j) { rule(j, "Correct")["pattern"] = "CORR(ECT"; });
  CHECK(mentions(p, "Correct"));

  p = problems_after([](nlohmann::json& j) {
    j["rules"].push_back({{"label", "Extra"}, {"direction", "client"}, {"pattern", "EXTRA"}, {"payload", nullptr},
                          {"template", "EXTRA"}});
  });
  CHECK(mentions(p, "Extra"));

  p = problems_after([](nlohmann::json& j) { rule(j, "Quit")["template"] = "BYE"; });
  CHECK(mentions(p, "Quit"));

  p = problems_after([](nlohmann::json& j) { rule(j, "Quit")["direction"] = "server"; });
  CHECK(mentions(p, "Quit"));

  std::vector<std::string> warnings;
  p = problems_after([](nlohmann::json& j) { rule(j, "Hint")["pattern"] = "(?:HINT|INCORRECT) ?(.*)"; }, &warnings);
  CHECK(p.empty());
  CHECK(mentions(warnings, "Incorrect"));

  CHECK_THROWS_AS(parse_codec("{not json"), CodecError);
  CHECK_THROWS_AS(parse_codec(R"({"framing":"CR","rules":[]})"), CodecError);
}

TEST_CASE("shipped SMTP codec") {
  auto a = compile(*load_valid_pst(testsupport::protocol("smtp.pst")));
  Codec c = load_codec(testsupport::protocol("smtp.codec.json"), a, Perspective::Server);
  CHECK(c.framing() == Framing::CRLF);
  CHECK(c.terminator() == "\r\n");
  std::set<std::string> labels;
  for (const auto& r : c.rules()) labels.insert(r.label);
  CHECK(labels == std::set<std::string>{"M220", "Helo", "M250", "MailFrom", "RcptTo", "Data", "M354", "Content",
                                        "M221", "Quit"});
  auto from = [&](const char* line) { return c.decode(Direction::FromClient, line); };
  CHECK(std::get<TypedMessage>(from("HELO client.local")).label == "Helo");
  CHECK(std::get<std::string>(*std::get<TypedMessage>(from("MAIL FROM:<a@b>")).payload) == "<a@b>");
  CHECK(std::get<TypedMessage>(from("RCPT TO:<c@d>")).label == "RcptTo");
  CHECK(std::get<TypedMessage>(from("DATA")).label == "Data");
  CHECK(std::get<TypedMessage>(from("QUIT")).label == "Quit");
  auto body = std::get<TypedMessage>(from("Subject: x\\n\\nbody\\n."));
  CHECK(body.label == "Content");
  CHECK(std::get<std::string>(*body.payload) == "Subject: x\\n\\nbody");
  CHECK(c.encode(body) == "Subject: x\\n\\nbody\\n.");
  CHECK(std::get<TypedMessage>(c.decode(Direction::FromServer, "250 OK")).label == "M250");
  CHECK(std::holds_alternative<Unrecognized>(c.decode(Direction::FromServer, "999 what")));
}
