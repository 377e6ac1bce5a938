// pstmon: check, compile and deploy monitors for probabilistic session types.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pstmon/bench.hpp"
#include "pstmon/codec.hpp"
#include "pstmon/embed.hpp"
#include "pstmon/event_log.hpp"
#include "pstmon/game.hpp"
#include "pstmon/proxy.hpp"
#include "pstmon/smtp.hpp"

namespace fs = std::filesystem;
using namespace pstmon;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) {
  g_interrupted = true;
}

void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
  std::signal(SIGPIPE, SIG_IGN);
}

void wait_for_interrupt() {
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

// Flags shared by every command that instantiates a monitor.
struct MonitorFlags {
  std::string type_path;
  std::string automaton_path;
  std::string codec_path;
  std::string perspective = "server";
  double confidence = 0.95;
  std::string ci = "wald";
  std::string z = "two-sided";
  std::uint64_t min_samples = 1;
  std::string log_path;
  std::string log_format = "csv";
  bool no_log = false;

  void add_to(CLI::App& app, bool need_codec = true) {
    app.add_option("--type", type_path, "Probabilistic session type file")->check(CLI::ExistingFile);
    app.add_option("--automaton", automaton_path, "Automaton produced by `generate` (instead of --type)")
        ->check(CLI::ExistingFile);
    auto* c = app.add_option("--codec", codec_path, "Codec (wire format) JSON file")->check(CLI::ExistingFile);
    if (need_codec) c->required();
    app.add_option("--perspective", perspective, "Network side the type describes")
        ->check(CLI::IsMember({"client", "server"}));
    app.add_option("--confidence", confidence, "Confidence level")->check(CLI::Range(0.0, 1.0));
    app.add_option("--ci", ci, "Interval method")->check(CLI::IsMember({"wald", "wilson"}));
    app.add_option("--z", z, "z-score convention")->check(CLI::IsMember({"two-sided", "one-sided"}));
    app.add_option("--min-samples", min_samples, "Suppress warnings below this many visits");
    app.add_option("--log", log_path, "Event log path (env PSTMON_LOG as fallback)");
    app.add_option("--log-format", log_format, "Event log format")->check(CLI::IsMember({"csv", "jsonl"}));
    app.add_flag("--no-log", no_log, "Disable event logging even if PSTMON_LOG is set");
  }

  MonitorConfig monitor_config() const {
    MonitorConfig mc;
    mc.method = CiMethod(ci == "wald" ? CiKind::Wald : CiKind::Wilson, confidence,
                         z == "two-sided" ? ZConvention::TwoSided : ZConvention::OneSided);
    mc.min_samples = min_samples;
    mc.perspective = *perspective_from_string(perspective);
    return mc;
  }

  std::shared_ptr<const MonitorAutomaton> automaton() const {
    if (!type_path.empty() && !automaton_path.empty())
      throw std::runtime_error("give either --type or --automaton, not both");
    if (!automaton_path.empty()) return std::make_shared<const MonitorAutomaton>(load_automaton(automaton_path));
    if (type_path.empty()) throw std::runtime_error("--type or --automaton is required");
    return std::make_shared<const MonitorAutomaton>(compile(*load_valid_pst(type_path)));
  }

  Codec codec(const MonitorAutomaton& a) const {
    std::vector<std::string> warnings;
    Codec c = load_codec(codec_path, a, monitor_config().perspective, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << codec_path << ": " << w << "\n";
    return c;
  }

  std::unique_ptr<EventSink> sink() const {
    std::string path = log_path;
    if (path.empty() && !no_log) {
      if (const char* env = std::getenv("PSTMON_LOG")) path = env;
    }
    if (no_log || path.empty()) return std::make_unique<NullEventSink>();
    return std::make_unique<FileEventSink>(path, log_format == "csv" ? LogFormat::Csv : LogFormat::Jsonl);
  }
};

Codec plain_codec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_codec(ss.str());
}

int cmd_check(const std::string& path) {
  TypePtr t;
  try {
    t = parse_pst_file(path);
  } catch (const ParseError& e) {
    std::cerr << path << ":" << e.what() << " [" << to_string(e.kind()) << "]\n";
    return 1;
  }
  auto errors = validate(*t);
  if (!errors.empty()) {
    for (const auto& e : errors)
      std::cerr << path << ":" << e.pos.line << ":" << e.pos.column << ": " << to_string(e.kind) << ": " << e.message
                << "\n";
    return 1;
  }
  MonitorAutomaton a = compile(*t);
  std::cout << a.choice_state_count() << " choice points, " << a.labels().size() << " labels\n";
  for (const auto& s : a.states) {
    if (!s.is_choice()) continue;
    std::cout << "  " << s.choice_point_id << " " << (s.polarity == Polarity::Send ? "!" : "?") << " {";
    for (std::size_t i = 0; i < s.branches.size(); ++i)
      std::cout << (i ? ", " : "") << s.branches[i].label << "[" << s.branches[i].prob << "]";
    std::cout << "}\n";
  }
  return 0;
}

int cmd_generate(const std::string& path, const std::string& out_dir) {
  MonitorAutomaton a = compile(*load_valid_pst(path));
  fs::create_directories(out_dir);
  const fs::path out = fs::path(out_dir) / "automaton.json";
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out.string());
  f << automaton_to_json(a).dump(2) << "\n";
  std::cout << "wrote " << out.string() << " (" << a.states.size() << " states)\n";
  return 0;
}

int cmd_run_proxy(const MonitorFlags& mf, const std::string& listen, const std::string& upstream, bool aggregate,
                  std::int64_t timeout_ms) {
  ProxyConfig cfg;
  cfg.listen = net::parse_endpoint(listen);
  cfg.upstream = net::parse_endpoint(upstream);
  if (cfg.listen == cfg.upstream) throw std::runtime_error("--listen and --upstream must differ");
  cfg.automaton = mf.automaton();
  cfg.codec = mf.codec(*cfg.automaton);
  cfg.monitor = mf.monitor_config();
  cfg.aggregate = aggregate;
  if (timeout_ms > 0) cfg.session_timeout = std::chrono::milliseconds(timeout_ms);
  auto sink = mf.sink();
  install_signal_handlers();
  ProxyServer server(cfg, *sink);
  server.start();
  std::cout << "listening " << cfg.listen.host << ":" << server.port() << std::endl;
  server.run_until(g_interrupted);
  std::size_t violations = 0;
  for (const auto& s : server.summaries()) violations += s.verdict == SessionVerdict::Violation;
  std::cerr << "proxy stopped: " << server.finished_sessions() << " sessions, " << violations << " violations\n";
  return 0;
}

std::vector<std::pair<std::string, double>> parse_weights(const std::string& text) {
  std::vector<std::pair<std::string, double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw std::runtime_error("weights must look like Guess=0.75,Help=0.2,Quit=0.05");
    out.emplace_back(item.substr(0, eq), std::stod(item.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pstmon: runtime monitors from probabilistic session types"};
  app.require_subcommand(1);

  std::string check_path;
  auto* check = app.add_subcommand("check", "Parse and validate a session type");
  check->add_option("pst", check_path, "Session type file")->required()->check(CLI::ExistingFile);

  std::string gen_path, gen_out;
  auto* generate = app.add_subcommand("generate", "Compile a session type and dump the monitor automaton");
  generate->add_option("pst", gen_path, "Session type file")->required()->check(CLI::ExistingFile);
  generate->add_option("-o,--out", gen_out, "Output directory")->required();

  MonitorFlags proxy_flags;
  std::string listen, upstream;
  bool aggregate = false;
  std::int64_t timeout_ms = 0;
  auto* run_proxy = app.add_subcommand("run-proxy", "Run the black-box monitoring proxy");
  run_proxy->add_option("--listen", listen, "Listen address host:port (port 0 = ephemeral)")->required();
  run_proxy->add_option("--upstream", upstream, "Server address host:port")->required();
  run_proxy->add_flag("--aggregate", aggregate, "Also log cross-session counters");
  run_proxy->add_option("--timeout-ms", timeout_ms, "Per-session timeout (0 = none)");
  proxy_flags.add_to(*run_proxy);

  auto* simulate = app.add_subcommand("simulate", "Run scripted components");
  simulate->require_subcommand(1);

  std::string gs_listen = "127.0.0.1:0", gs_codec;
  std::uint64_t gs_seed = 1;
  bool gs_greybox = false;
  MonitorFlags gs_flags;
  auto* game_server = simulate->add_subcommand("game-server", "Guessing-game server");
  game_server->add_option("--listen", gs_listen, "Listen address");
  game_server->add_option("--seed", gs_seed, "Seed for the secret numbers");
  game_server->add_flag("--greybox", gs_greybox, "Embed the monitor in the server");
  gs_flags.add_to(*game_server);

  std::string gc_connect, gc_policy = "iid", gc_weights = "Guess=0.75,Help=0.2,Quit=0.05", gc_sequence, gc_codec;
  std::uint64_t gc_seed = 42, gc_rounds = 100000;
  auto* game_client = simulate->add_subcommand("game-client", "Scripted guessing-game client");
  game_client->add_option("--connect", gc_connect, "Server or proxy address")->required();
  game_client->add_option("--codec", gc_codec, "Codec file")->required()->check(CLI::ExistingFile);
  game_client->add_option("--policy", gc_policy, "iid | balanced | sequence | spammer")
      ->check(CLI::IsMember({"iid", "balanced", "sequence", "spammer"}));
  game_client->add_option("--weights", gc_weights, "Label frequencies for iid/balanced");
  game_client->add_option("--sequence", gc_sequence, "Comma-separated labels for the sequence policy");
  game_client->add_option("--rounds", gc_rounds, "Round cap (spammer: number of Help rounds)");
  game_client->add_option("--seed", gc_seed, "Seed");

  std::string stub_listen = "127.0.0.1:2525";
  auto* smtp_stub = simulate->add_subcommand("smtp-stub", "Stub SMTP server that discards mail");
  smtp_stub->add_option("--listen", stub_listen, "Listen address");

  std::string sc_connect;
  std::uint64_t sc_emails = 1, sc_recipients = 1;
  bool sc_greybox = false;
  MonitorFlags sc_flags;
  auto* smtp_client = simulate->add_subcommand("smtp-client", "Scripted SMTP client; prints response times (ms)");
  smtp_client->add_option("--connect", sc_connect, "Server or proxy address")->required();
  smtp_client->add_option("--emails", sc_emails, "Emails per connection");
  smtp_client->add_option("--recipients", sc_recipients, "Recipients per email");
  smtp_client->add_flag("--greybox", sc_greybox, "Embed the monitor in the client");
  sc_flags.add_to(*smtp_client);

  sim::BenchConfig bench_cfg;
  std::string bench_out = "bench.csv", bench_grid = "10,50,100", bench_scenarios = "unsafe,blackbox,greybox";
  auto* bench = app.add_subcommand("bench", "Overhead benchmark: unsafe vs black-box vs grey-box");
  bench->add_option("--type", bench_cfg.pst, "SMTP session type")->required()->check(CLI::ExistingFile);
  bench->add_option("--codec", bench_cfg.codec, "SMTP codec")->required()->check(CLI::ExistingFile);
  bench->add_option("--grid", bench_grid, "Comma-separated email counts");
  bench->add_option("--reps", bench_cfg.repetitions, "Repetitions per cell");
  bench->add_option("--recipients", bench_cfg.recipients, "Recipients per email");
  bench->add_option("--scenarios", bench_scenarios, "Subset of unsafe,blackbox,greybox");
  bench->add_option("--log-dir", bench_cfg.log_dir, "Where monitor logs go when logging is on");
  bench->add_option("-o,--out", bench_out, "CSV output path");

  std::string pd_log, pd_choice, pd_branch, pd_session, pd_out;
  auto* plot_data = app.add_subcommand("plot-data", "Extract a per-visit series for one branch from a log");
  plot_data->add_option("log", pd_log, "Monitor CSV log")->required()->check(CLI::ExistingFile);
  plot_data->add_option("--choice", pd_choice, "Choice point id, e.g. root")->required();
  plot_data->add_option("--branch", pd_branch, "Branch label, e.g. Help")->required();
  plot_data->add_option("--session", pd_session, "Session id (default: first session with data)");
  plot_data->add_option("-o,--out", pd_out, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return cmd_check(check_path);
    if (*generate) return cmd_generate(gen_path, gen_out);
    if (*run_proxy) return cmd_run_proxy(proxy_flags, listen, upstream, aggregate, timeout_ms);

    if (*game_server) {
      std::optional<sim::GreyBoxSettings> gb;
      std::unique_ptr<EventSink> sink;
      Codec codec;
      if (gs_greybox) {
        if (gs_flags.type_path.empty()) throw std::runtime_error("--greybox needs --type");
        auto t = load_valid_pst(gs_flags.type_path);
        auto a = compile(*t);
        codec = gs_flags.codec(a);
        sink = gs_flags.sink();
        gb = sim::GreyBoxSettings{t, gs_flags.monitor_config(), sink.get()};
      } else {
        codec = plain_codec(gs_flags.codec_path);
      }
      install_signal_handlers();
      sim::GameServer server(net::parse_endpoint(gs_listen), gs_seed, codec, gb);
      server.start();
      std::cout << "listening " << net::parse_endpoint(gs_listen).host << ":" << server.port() << std::endl;
      wait_for_interrupt();
      server.stop();
      return 0;
    }

    if (*game_client) {
      sim::ScriptedBehavior b;
      b.seed = gc_seed;
      b.max_rounds = gc_rounds;
      if (gc_policy == "sequence") {
        b.policy = sim::Sequence{split_commas(gc_sequence)};
      } else if (gc_policy == "spammer") {
        b.policy = sim::HelpSpammer{gc_rounds};
      } else {
        b.policy = sim::FixedFrequencies{parse_weights(gc_weights),
                                         gc_policy == "iid" ? sim::Sampling::Iid : sim::Sampling::Balanced};
      }
      auto trace = sim::run_game_client(net::parse_endpoint(gc_connect), b, plain_codec(gc_codec));
      for (const auto& l : trace.labels) std::cout << l << "\n";
      if (!trace.error.empty()) std::cerr << "client: " << trace.error << "\n";
      return trace.completed ? 0 : 1;
    }

    if (*smtp_stub) {
      install_signal_handlers();
      sim::SmtpStub stub(net::parse_endpoint(stub_listen));
      stub.start();
      std::cout << "listening " << net::parse_endpoint(stub_listen).host << ":" << stub.port() << std::endl;
      wait_for_interrupt();
      stub.stop();
      return 0;
    }

    if (*smtp_client) {
      sim::MailLoop loop{sc_emails, sc_recipients};
      net::Socket sock = net::connect_tcp(net::parse_endpoint(sc_connect));
      sim::SmtpTrace trace;
      std::unique_ptr<EventSink> sink;
      if (sc_greybox) {
        if (sc_flags.type_path.empty()) throw std::runtime_error("--greybox needs --type");
        auto t = load_valid_pst(sc_flags.type_path);
        auto a = compile(*t);
        Codec codec = sc_flags.codec(a);
        sink = sc_flags.sink();
        auto ep = embed(*t, codec, sc_flags.monitor_config(), Direction::FromClient, std::move(sock), *sink);
        trace = sim::run_smtp_client(*ep, loop);
        ep->close();
      } else {
        CodecChannel ch(std::move(sock), plain_codec(sc_flags.codec_path), Direction::FromClient);
        trace = sim::run_smtp_client(ch, loop);
        ch.close();
      }
      std::string out;
      char buf[32];
      for (double ms : trace.response_ms) {
        std::snprintf(buf, sizeof buf, "%.6f\n", ms);
        out += buf;
      }
      std::cout << out << std::flush;
      if (!trace.error.empty()) std::cerr << "smtp-client: " << trace.error << "\n";
      return trace.completed ? 0 : 1;
    }

    if (*bench) {
      bench_cfg.exe = fs::read_symlink("/proc/self/exe").string();
      bench_cfg.emails.clear();
      for (const auto& g : split_commas(bench_grid)) bench_cfg.emails.push_back(std::stoull(g));
      bench_cfg.scenarios.clear();
      for (const auto& s : split_commas(bench_scenarios)) {
        if (s == "unsafe") {
          bench_cfg.scenarios.push_back(sim::Scenario::Unsafe);
        } else if (s == "blackbox") {
          bench_cfg.scenarios.push_back(sim::Scenario::BlackBox);
        } else if (s == "greybox") {
          bench_cfg.scenarios.push_back(sim::Scenario::GreyBox);
        } else {
          throw std::runtime_error("unknown scenario " + s);
        }
      }
      bench_cfg.pst = fs::absolute(bench_cfg.pst).string();
      bench_cfg.codec = fs::absolute(bench_cfg.codec).string();
      fs::create_directories(bench_cfg.log_dir);
      auto results = sim::run_bench(bench_cfg, &std::cerr);
      std::ofstream f(bench_out);
      if (!f) throw std::runtime_error("cannot write " + bench_out);
      sim::write_bench_csv(f, results);
      std::size_t failed = 0;
      for (const auto& r : results) failed += !r.ok;
      std::cout << "wrote " << bench_out << " (" << results.size() << " rows, " << failed << " failed)\n";
      return failed == 0 ? 0 : 1;
    }

    if (*plot_data) {
      std::ifstream in(pd_log);
      auto events = read_csv_log(in);
      auto rows = extract_series(events, pd_choice, pd_branch, pd_session);
      if (pd_out.empty()) {
        write_series_csv(std::cout, rows);
      } else {
        std::ofstream f(pd_out);
        if (!f) throw std::runtime_error("cannot write " + pd_out);
        write_series_csv(f, rows);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "pstmon: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
