#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "ast_oracle.hpp"
#include "doctest.h"
#include "pstmon/event_log.hpp"
#include "pstmon/monitor.hpp"
#include "support.hpp"

using namespace pstmon;
using oracle::AstOracle;
using oracle::describe;
using oracle::same_event;
using oracle::value_of;

namespace {

std::shared_ptr<const MonitorAutomaton> game() {
  return std::make_shared<const MonitorAutomaton>(compile(*load_valid_pst(testsupport::protocol("game.pst"))));
}

MonitorConfig client_view() {
  MonitorConfig c;
  c.perspective = Perspective::Client;
  return c;
}

TypedMessage from_client(std::string label, std::optional<Value> v = {}) {
  return {Direction::FromClient, std::move(label), std::move(v)};
}
TypedMessage from_server(std::string label, std::optional<Value> v = {}) {
  return {Direction::FromServer, std::move(label), std::move(v)};
}

class VectorSource : public MessageSource {
 public:
  explicit VectorSource(std::vector<SourceItem> items) : items_(std::move(items)) {}
  std::optional<SourceItem> next() override {
    if (i_ >= items_.size()) return std::nullopt;
    return items_[i_++];
  }

 private:
  std::vector<SourceItem> items_;
  std::size_t i_ = 0;
};

}  // namespace

TEST_CASE("compiled structure") {
  auto g = game();
  CHECK(g->choice_state_count() == 3);
  CHECK(g->states.size() == 4);
  CHECK(!g->states[g->end_state].is_choice());
  const auto& root = g->states[g->initial];
  CHECK(root.choice_point_id == "root");
  CHECK(root.polarity == Polarity::Send);
  REQUIRE(root.branches.size() == 3);
  const auto& inner = g->states[root.branches[0].target];
  CHECK(inner.choice_point_id == "root.Guess");
  CHECK(inner.branches[0].target == g->initial);  // back-edge for X
  CHECK(inner.branches[1].target == g->initial);
  const auto& hint = g->states[root.branches[1].target];
  CHECK(hint.choice_point_id == "root.Help");
  CHECK(hint.branches.size() == 1);
  CHECK(hint.branches[0].sort == Sort::String);
  CHECK(root.branches[2].target == g->end_state);

  auto smtp = compile(*load_valid_pst(testsupport::protocol("smtp.pst")));
  CHECK(smtp.choice_state_count() == 13);
  std::size_t multi = 0;
  std::set<std::string> ids;
  for (const auto& s : smtp.states) {
    if (s.is_choice()) {
      multi += s.branches.size() > 1;
      ids.insert(s.choice_point_id);
    }
  }
  CHECK(multi == 3);
  CHECK(ids.size() == 13);
  CHECK(ids.count("root.M220.Helo.M250"));
  CHECK(ids.count("root.M220.Helo.M250.MailFrom.M250"));

  auto trivial = compile(*parse_pst("end"));
  CHECK(trivial.states.size() == 1);
  CHECK(trivial.choice_state_count() == 0);
  CHECK(trivial.initial == trivial.end_state);
}

TEST_CASE("automaton document round-trips") {
  for (const char* name : {"game.pst", "smtp.pst"}) {
    auto a = compile(*load_valid_pst(testsupport::protocol(name)));
    auto j = automaton_to_json(a);
    auto b = automaton_from_json(j);
    CHECK(automaton_to_json(b) == j);
    CHECK(b.choice_state_count() == a.choice_state_count());
  }
  auto j = automaton_to_json(*game());
  j["states"][1]["transitions"][0]["target"] = 99;
  CHECK_THROWS_AS(automaton_from_json(j), std::runtime_error);
  CHECK_THROWS_AS(automaton_from_json(nlohmann::json::parse(R"({"states": 3})")), std::runtime_error);
}

TEST_CASE("stepping the guessing game") {
  MonitorSession m(game(), client_view(), "1");
  auto ev = m.step(from_client("Guess", Value{std::int64_t{23}}));
  REQUIRE(ev.size() == 3);
  CHECK(ev[0].label == "Guess");
  CHECK(ev[0].verdict == Verdict::Ok);
  CHECK(ev[0].n == 1);
  CHECK(ev[1].label == "Help");
  CHECK(ev[2].label == "Quit");
  CHECK(m.expected_labels() == std::vector<std::string>{"Correct", "Incorrect"});
  ev = m.step(from_server("Incorrect"));
  CHECK(ev[0].choice_point_id == "root.Guess");
  ev = m.step(from_client("Help"));
  ev = m.step(from_server("Hint", Value{std::string("odd")}));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].p_hat == 1.0);
  CHECK(ev[0].ci_lo == 1.0);
  ev = m.step(from_client("Quit"));
  CHECK(ev.back().verdict == Verdict::SessionEnd);
  CHECK(ev.back().choice_point_id == "end");
  CHECK(m.status() == MonitorSession::Status::Ended);
  ev = m.step(from_client("Help"));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].verdict == Verdict::Violation);
}

TEST_CASE("violations name the expected labels and are terminal") {
  SUBCASE("unexpected label") {
    MonitorSession m(game(), client_view(), "1");
    auto ev = m.step(from_client("Hint", Value{std::string("x")}));
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].verdict == Verdict::Violation);
    CHECK(ev[0].detail.find("{Guess, Help, Quit}") != std::string::npos);
    CHECK(m.step(from_client("Help")).empty());
    CHECK(m.step(Unrecognized{Direction::FromClient, "junk"}).empty());
    CHECK(m.abort("late").empty());
  }
  SUBCASE("wrong direction") {
    MonitorSession m(game(), client_view(), "1");
    auto ev = m.step(from_server("Help"));
    CHECK(ev[0].verdict == Verdict::Violation);
  }
  SUBCASE("payload sort") {
    MonitorSession m(game(), client_view(), "1");
    CHECK(m.step(from_client("Guess", Value{std::string("23")}))[0].verdict == Verdict::Violation);
  }
  SUBCASE("missing payload") {
    MonitorSession m(game(), client_view(), "1");
    CHECK(m.step(from_client("Guess"))[0].verdict == Verdict::Violation);
  }
  SUBCASE("unrecognized line") {
    MonitorSession m(game(), client_view(), "1");
    auto ev = m.step(Unrecognized{Direction::FromClient, "HELLO"});
    CHECK(ev[0].verdict == Verdict::Violation);
    CHECK(ev[0].label == "HELLO");
  }
}

TEST_CASE("Help spam warns on the first visit") {
  MonitorSession m(game(), client_view(), "1");
  std::vector<Verdict> help;
  for (int i = 0; i < 5; ++i) {
    auto ev = m.step(from_client("Help"));
    help.push_back(ev[0].verdict);
    m.step(from_server("Hint", Value{std::string("even")}));
  }
  CHECK(help[0] == Verdict::WarningRaised);
  for (int i = 1; i < 5; ++i) CHECK(help[i] == Verdict::Ok);
}

TEST_CASE("min_samples suppresses early warnings") {
  MonitorConfig c = client_view();
  c.min_samples = 3;
  MonitorSession m(game(), c, "1");
  std::vector<Verdict> help;
  for (int i = 0; i < 4; ++i) {
    help.push_back(m.step(from_client("Help"))[0].verdict);
    m.step(from_server("Hint", Value{std::string("even")}));
  }
  CHECK(help == std::vector<Verdict>{Verdict::Ok, Verdict::Ok, Verdict::WarningRaised, Verdict::Ok});
}

TEST_CASE("run_session") {
  MemoryEventSink sink;
  SUBCASE("empty source") {
    VectorSource src({});
    auto s = run_session(game(), client_view(), sink, src);
    CHECK(s.verdict == SessionVerdict::Aborted);
    CHECK(s.event_count == 0);
    CHECK(sink.events().empty());
  }
  SUBCASE("complete") {
    VectorSource src({from_client("Guess", Value{std::int64_t{5}}), from_server("Correct"), from_client("Quit")});
    auto s = run_session(game(), client_view(), sink, src, "7");
    CHECK(s.verdict == SessionVerdict::Completed);
    CHECK(s.event_count == sink.events().size());
    CHECK(sink.events().front().session_id == "7");
    REQUIRE(s.choice_points.size() == 2);
    CHECK(s.choice_points[0].n == 2);
  }
  SUBCASE("premature close") {
    VectorSource src({from_client("Help")});
    auto s = run_session(game(), client_view(), sink, src);
    CHECK(s.verdict == SessionVerdict::Aborted);
    CHECK(sink.events().back().verdict == Verdict::Aborted);
  }
  SUBCASE("violation") {
    VectorSource src({from_client("Help"), from_client("Help"), from_client("Quit")});
    auto s = run_session(game(), client_view(), sink, src);
    CHECK(s.verdict == SessionVerdict::Violation);
    CHECK(sink.events().back().verdict == Verdict::Violation);
    CHECK(s.detail.find("{Hint}") != std::string::npos);
  }
}

TEST_CASE("monitor events equal the syntax-tree re-simulation on random traces") {
  std::mt19937_64 rng(2024);
  int traces = 0, violations = 0, raised = 0, retracted = 0;
  for (std::uint64_t seed = 0; traces < 1000; ++seed) {
    testsupport::RandomPst gen(seed);
    const std::string src = gen.generate();
    TypePtr t = parse_pst(src);
    REQUIRE(validate(*t).empty());
    auto a = std::make_shared<const MonitorAutomaton>(compile(*t));
    const Perspective persp = rng() % 2 ? Perspective::Client : Perspective::Server;
    const bool wilson = rng() % 2;
    const double level = std::array<double, 3>{0.9, 0.95, 0.99}[rng() % 3];
    MonitorConfig cfg;
    cfg.method = CiMethod(wilson ? CiKind::Wilson : CiKind::Wald, level);
    cfg.perspective = persp;

    AstOracle oracle(t, persp, level, wilson);
    MonitorSession m(a, cfg, "s");
    // Skewed branch preferences produce both warnings and retractions.
    std::map<const SessionType*, std::vector<double>> pref;
    const bool inject = rng() % 10 == 0;
    const int length = 1 + static_cast<int>(rng() % 80);
    std::map<std::pair<std::string, std::string>, Verdict> last_flag;
    for (int step = 0; step < length && !oracle.done(); ++step) {
      const SessionType* cur = oracle.current();
      TypedMessage msg;
      const Polarity pol = cur->choice == ChoiceKind::Internal ? Polarity::Send : Polarity::Receive;
      msg.direction = direction_of(pol, persp);
      auto& w = pref[cur];
      if (w.empty())
        for (std::size_t i = 0; i < cur->branches.size(); ++i) w.push_back(std::uniform_real_distribution<>(0, 1)(rng));
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      const Branch& b = cur->branches[pick(rng)];
      msg.label = b.label;
      if (b.payload) msg.payload = value_of(b.payload->sort, rng);
      if (inject && rng() % 20 == 0) {
        switch (rng() % 3) {
          case 0: msg.label = "Nope"; break;
          case 1: msg.direction = opposite(msg.direction); break;
          default: msg.payload = msg.payload ? std::nullopt : std::optional<Value>(Value{true}); break;
        }
      }
      auto want = oracle.step(msg);
      auto got = m.step(msg);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        INFO(src << "\n  got  " << describe(got[i]) << "\n  want " << describe(want[i]));
        REQUIRE(same_event(got[i], want[i]));
        violations += got[i].verdict == Verdict::Violation;
        raised += got[i].verdict == Verdict::WarningRaised;
        retracted += got[i].verdict == Verdict::WarningRetracted;
        // Raised and retracted strictly alternate per branch, starting with raised.
        if (got[i].verdict == Verdict::WarningRaised || got[i].verdict == Verdict::WarningRetracted) {
          auto key = std::make_pair(got[i].choice_point_id, got[i].label);
          auto it = last_flag.find(key);
          if (it == last_flag.end()) {
            CHECK(got[i].verdict == Verdict::WarningRaised);
          } else {
            CHECK(it->second != got[i].verdict);
          }
          last_flag[key] = got[i].verdict;
        }
      }
    }
    ++traces;
  }
  CHECK(violations > 10);
  CHECK(raised > 100);
  CHECK(retracted > 10);
}

TEST_CASE("same input, same events") {
  auto run = [] {
    MonitorSession m(game(), client_view(), "1");
    std::vector<MonitorEvent> all;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
      auto ev = (rng() % 4 == 0) ? m.step(from_client("Help")) : m.step(from_client("Guess", Value{std::int64_t{1}}));
      all.insert(all.end(), ev.begin(), ev.end());
      ev = m.expected_labels()[0] == "Hint" ? m.step(from_server("Hint", Value{std::string("odd")}))
                                            : m.step(from_server("Incorrect"));
      all.insert(all.end(), ev.begin(), ev.end());
    }
    return all;
  };
  auto a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(format_csv_row(a[i]).substr(0, format_csv_row(a[i]).rfind(',')) ==
                                                    format_csv_row(b[i]).substr(0, format_csv_row(b[i]).rfind(',')));
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i].seq == a[i - 1].seq + 1);
}

TEST_CASE("event log formats") {
  MonitorEvent e;
  e.session_id = "3";
  e.seq = 12;
  e.direction = Direction::FromServer;
  e.choice_point_id = "root.Guess";
  e.label = "Correct";
  e.n = 4;
  e.p_hat = 0.25;
  e.ci_lo = 0.0;
  e.ci_hi = 0.1075;
  e.verdict = Verdict::WarningRaised;
  e.timestamp_ms = 1700000000000;
  CHECK(format_csv_row(e) == "3,12,server,root.Guess,Correct,4,0.250000,0.000000,0.107500,warning_raised,1700000000000");
  auto j = nlohmann::json::parse(format_jsonl_row(e));
  CHECK(j["verdict"] == "warning_raised");
  CHECK(j["p_hat"].get<double>() == 0.25);

  std::stringstream ss;
  {
    StreamEventSink sink(ss, LogFormat::Csv);
    sink.write(e);
    e.label = "odd, \"quoted\" line";
    e.verdict = Verdict::Violation;
    sink.write(e);
  }
  auto back = read_csv_log(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == "Correct");
  CHECK(back[0].ci_hi == doctest::Approx(0.1075));
  CHECK(back[1].label == "odd, \"quoted\" line");
  std::stringstream bad("a,b,c\n");
  CHECK_THROWS(read_csv_log(bad));
}

TEST_CASE("series extraction follows one branch") {
  MemoryEventSink sink;
  MonitorSession m(game(), client_view(), "1");
  for (int i = 0; i < 3; ++i) {
    for (auto& e : m.step(from_client("Help"))) sink.write(e);
    for (auto& e : m.step(from_server("Hint", Value{std::string("odd")}))) sink.write(e);
  }
  auto rows = extract_series(sink.events(), "root", "Help");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].n == 1);
  CHECK(rows[0].verdict == Verdict::WarningRaised);
  CHECK(rows[2].warning);
  std::ostringstream os;
  write_series_csv(os, rows);
  CHECK(os.str().rfind("n,p_hat,ci_lo,ci_hi,verdict,warning\n1,1.000000,0.000000,0.983986,warning_raised,1\n", 0) ==
        0);
}

TEST_CASE("a shared sink serialises concurrent sessions") {
  std::stringstream ss;
  StreamEventSink sink(ss, LogFormat::Csv);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      MonitorSession m(game(), client_view(), std::to_string(t));
      for (int i = 0; i < 100; ++i) {
        for (auto& e : m.step(from_client("Guess", Value{std::int64_t{i}}))) sink.write(e);
        for (auto& e : m.step(from_server("Incorrect"))) sink.write(e);
      }
    });
  }
  for (auto& th : threads) th.join();
  auto events = read_csv_log(ss);
  CHECK(events.size() == 8 * 100 * 5);
  std::map<std::string, std::uint64_t> last;
  for (const auto& e : events) {
    CHECK(e.seq > last[e.session_id]);
    last[e.session_id] = e.seq;
  }
}
