#include <random>

#include "doctest.h"
#include "pstmon/session_type.hpp"
#include "support.hpp"

using namespace pstmon;
using K = WellFormednessError::Kind;

namespace {

const char* kGame = R"(S_game = rec X.(+{!Guess(num: Int)[0.75].
                  &{?Correct()[0.01].X, ?Incorrect()[0.99].X},
                !Help()[0.2].?Hint(info: String)[1].X,
                !Quit()[0.05].end}))";

std::vector<K> kinds_of(const std::string& src) {
  std::vector<K> out;
  for (const auto& e : validate(*parse_pst(src))) out.push_back(e.kind);
  return out;
}

ParseError::Kind parse_failure(const std::string& src) {
  try {
    parse_pst(src);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("expected a parse error for: " << src);
  return ParseError::Kind::Syntax;
}

void check_round_trip(const std::string& src) {
  TypePtr t = parse_pst(src);
  std::string printed = pretty_print(*t);
  TypePtr again = parse_pst(printed);
  CHECK_MESSAGE(structurally_equal(*t, *again), src << "\n  printed as\n" << printed);
  CHECK(pretty_print(*again) == printed);
}

}  // namespace

TEST_CASE("game type parses with the expected shape") {
  TypePtr t = parse_pst(kGame);
  REQUIRE(t->kind == SessionType::Kind::Rec);
  CHECK(t->var == "X");
  const SessionType& outer = *t->body;
  REQUIRE(outer.kind == SessionType::Kind::Choice);
  CHECK(outer.choice == ChoiceKind::Internal);
  REQUIRE(outer.branches.size() == 3);
  CHECK(outer.branches[0].label == "Guess");
  CHECK(outer.branches[0].payload->sort == Sort::Int);
  CHECK(outer.branches[0].prob.value() == doctest::Approx(0.75));
  CHECK(outer.branches[1].label == "Help");
  CHECK_FALSE(outer.branches[1].payload.has_value());
  CHECK(outer.branches[2].prob == Probability::parse("0.05"));
  const SessionType& inner = *outer.branches[0].cont;
  CHECK(inner.choice == ChoiceKind::External);
  CHECK(inner.branches[1].label == "Incorrect");
  CHECK(inner.branches[1].cont->kind == SessionType::Kind::Var);
  const SessionType& hint = *outer.branches[1].cont;
  REQUIRE(hint.branches.size() == 1);
  CHECK(hint.branches[0].polarity == Polarity::Receive);
  CHECK(hint.branches[0].payload->sort == Sort::String);
  CHECK(validate(*t).empty());
}

TEST_CASE("protocol files validate and round-trip") {
  for (const char* name : {"game.pst", "smtp.pst"}) {
    CAPTURE(name);
    TypePtr t = parse_pst_file(testsupport::protocol(name));
    CHECK(validate(*t).empty());
    check_round_trip(pretty_print(*t));
    CHECK(structurally_equal(*t, *parse_pst(pretty_print(*t))));
  }
  CHECK(structurally_equal(*parse_pst(kGame), *parse_pst_file(testsupport::protocol("game.pst"))));
}

TEST_CASE("trivial types") {
  CHECK(parse_pst("end")->kind == SessionType::Kind::End);
  CHECK(validate(*parse_pst("end")).empty());
  CHECK(pretty_print(*parse_pst("  end // nothing more\n")) == "end");
  CHECK(validate(*parse_pst("+{!A()[1].end}")).empty());
}

TEST_CASE("negative cases report the designated kind") {
  CHECK(kinds_of("+{!A()[0.5].end, !B()[0.6].end}") == std::vector<K>{K::ProbSum});
  CHECK(kinds_of("+{!A()[0.5].end, !A()[0.5].end}") == std::vector<K>{K::DuplicateLabel});
  CHECK(kinds_of("rec X.X") == std::vector<K>{K::UnguardedRec});
  CHECK(kinds_of("rec X.rec Y.X") == std::vector<K>{K::UnguardedRec});
  CHECK(kinds_of("+{!A()[1].Y}") == std::vector<K>{K::UnboundVar});
  CHECK(kinds_of("+{!A()[0.5].end, ?B()[0.5].end}") == std::vector<K>{K::MixedPolarity});
  CHECK(parse_failure("!A(x: Float)[1].end") == ParseError::Kind::UnknownSort);
  CHECK(parse_failure("!A(x: Str)[1].end") == ParseError::Kind::UnknownSort);
  CHECK(parse_failure("!A()[1.5].end") == ParseError::Kind::BadProbability);
  CHECK(parse_failure("!A()[-0.1].end") == ParseError::Kind::BadProbability);
  CHECK(parse_failure("!A(x: Int, y: Int)[1].end") == ParseError::Kind::MultiPayload);
  CHECK(parse_failure("+{!A()[1].end") == ParseError::Kind::Syntax);
  CHECK(parse_failure("") == ParseError::Kind::Syntax);
  CHECK(parse_failure("end end") == ParseError::Kind::Syntax);
}

TEST_CASE("errors carry source positions") {
  try {
    parse_pst("+{!A()[0.5].end,\n  !B(x: Float)[0.5].end}");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.pos().line == 2);
    CHECK(e.pos().column == 9);
  }
  auto errs = validate(*parse_pst("rec X.+{!A()[0.5].X,\n !A()[0.5].end}"));
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].pos.line == 2);
}

TEST_CASE("guarded recursion and shadowing are accepted") {
  CHECK(validate(*parse_pst("rec X.!A()[1].rec Y.&{?B()[0.5].X, ?C()[0.5].Y}")).empty());
  CHECK(validate(*parse_pst("rec X.!A()[1].rec X.!B()[1].X")).empty());
  CHECK(kinds_of("rec X.!A()[1].rec Y.X") == std::vector<K>{});
}

TEST_CASE("probability literals are exact decimals") {
  CHECK(Probability::parse("1.0") == Probability::parse("1"));
  CHECK(Probability::parse(".5") == Probability::parse("0.50"));
  CHECK(Probability::parse("0.75").to_string() == "0.75");
  CHECK(Probability::parse("0") == Probability::parse("0.000"));
  CHECK_THROWS_AS(Probability::parse("1.0000001"), std::invalid_argument);
  CHECK_THROWS_AS(Probability::parse("abc"), std::invalid_argument);
  CHECK_THROWS_AS(Probability::parse(""), std::invalid_argument);
  DecimalSum s;
  for (int i = 0; i < 10; ++i) s.add(Probability::parse("0.1"));
  CHECK(s.near_one(kProbSumTolerance));
}

TEST_CASE("random probability vectors: accepted iff they sum to one") {
  // Oracle: integer arithmetic in units of 10^-4.
  std::mt19937_64 rng(7);
  int accepted = 0, rejected = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = std::uniform_int_distribution<int>(2, 5)(rng);
    std::vector<int> units(k);
    for (int& u : units) u = std::uniform_int_distribution<int>(0, 10000 / k + 50)(rng);
    if (trial % 2 == 0) {
      int rest = 10000;
      for (int i = 0; i + 1 < k; ++i) rest -= units[i];
      if (rest < 0 || rest > 10000) continue;
      units[k - 1] = rest;
    }
    int total = 0;
    std::string src = "+{";
    for (int i = 0; i < k; ++i) {
      total += units[i];
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s!L%d()[%d.%04d].end", i ? ", " : "", i, units[i] / 10000, units[i] % 10000);
      src += buf;
    }
    src += "}";
    const bool oracle_ok = total == 10000;
    const bool ok = validate(*parse_pst(src)).empty();
    CHECK_MESSAGE(ok == oracle_ok, src);
    (oracle_ok ? accepted : rejected)++;
  }
  CHECK(accepted > 100);
  CHECK(rejected > 100);
}

TEST_CASE("random well-formed types validate and round-trip") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    testsupport::RandomPst gen(seed);
    std::string src = gen.generate();
    CAPTURE(src);
    TypePtr t = parse_pst(src);
    CHECK(validate(*t).empty());
    check_round_trip(src);
  }
}

TEST_CASE("deeply nested types") {
  std::string src;
  for (int i = 0; i < 1000; ++i) src += "!A" + std::to_string(i) + "()[1].";
  src += "end";
  TypePtr t = parse_pst(src);
  CHECK(validate(*t).empty());
  CHECK(structurally_equal(*t, *parse_pst(pretty_print(*t))));
}
