#include "pstmon/bench.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pstmon/smtp.hpp"

extern char** environ;

namespace pstmon::sim {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::Unsafe: return "unsafe";
    case Scenario::BlackBox: return "blackbox";
    case Scenario::GreyBox: return "greybox";
  }
  return "?";
}

double BenchResult::mean_response_ms() const {
  if (response_ms.empty()) return 0.0;
  return std::accumulate(response_ms.begin(), response_ms.end(), 0.0) / static_cast<double>(response_ms.size());
}

namespace {

struct Child {
  pid_t pid = -1;
  FILE* out = nullptr;  // child's stdout
};

struct ExitInfo {
  int status = 0;
  double cpu_s = 0.0;
  std::int64_t max_rss_bytes = 0;
};

Child spawn(const std::vector<std::string>& args) {
  int fds[2];
  if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&fa, fds[0]);
  posix_spawn_file_actions_addclose(&fa, fds[1]);
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = -1;
  int rc = posix_spawn(&pid, args[0].c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw std::runtime_error("cannot spawn " + args[0]);
  }
  return {pid, ::fdopen(fds[0], "r")};
}

ExitInfo reap(Child& c) {
  ExitInfo info;
  rusage ru{};
  if (::wait4(c.pid, &info.status, 0, &ru) < 0) throw std::runtime_error("wait4 failed");
  info.cpu_s = static_cast<double>(ru.ru_utime.tv_sec + ru.ru_stime.tv_sec) +
               static_cast<double>(ru.ru_utime.tv_usec + ru.ru_stime.tv_usec) / 1e6;
  info.max_rss_bytes = static_cast<std::int64_t>(ru.ru_maxrss) * 1024;
  if (c.out) std::fclose(c.out);
  c.out = nullptr;
  return info;
}

std::string read_line(FILE* f) {
  std::string line;
  int ch;
  while ((ch = std::fgetc(f)) != EOF && ch != '\n') line += static_cast<char>(ch);
  return line;
}

std::vector<std::string> client_args(const BenchConfig& cfg, std::uint16_t port, std::uint64_t emails) {
  return {cfg.exe,          "simulate",     "smtp-client", "--connect", "127.0.0.1:" + std::to_string(port),
          "--codec",        cfg.codec,      "--emails",    std::to_string(emails),
          "--recipients",   std::to_string(cfg.recipients)};
}

// Reads response times (one per line) until EOF.
std::vector<double> read_times(FILE* f) {
  std::vector<double> out;
  while (true) {
    std::string line = read_line(f);
    if (line.empty()) {
      if (std::feof(f)) break;
      continue;
    }
    out.push_back(std::stod(line));
  }
  return out;
}

BenchResult run_cell(const BenchConfig& cfg, Scenario scenario, bool logging, std::uint64_t emails, int rep) {
  BenchResult r;
  r.scenario = scenario;
  r.logging = scenario == Scenario::Unsafe ? "na" : (logging ? "on" : "off");
  r.emails = emails;
  r.rep = rep;
  const std::string log_path = cfg.log_dir + "/bench_" + std::string(to_string(scenario)) + "_" +
                               std::to_string(emails) + "_" + std::to_string(rep) + ".csv";
  SmtpStub stub;
  stub.start();
  try {
    if (scenario == Scenario::BlackBox) {
      std::vector<std::string> proxy = {cfg.exe,   "run-proxy", "--listen", "127.0.0.1:0",
                                        "--upstream", "127.0.0.1:" + std::to_string(stub.port()),
                                        "--type",  cfg.pst,     "--codec",  cfg.codec};
      if (logging) {
        proxy.insert(proxy.end(), {"--log", log_path});
      } else {
        proxy.push_back("--no-log");
      }
      Child p = spawn(proxy);
      std::string ready = read_line(p.out);
      auto colon = ready.rfind(':');
      if (ready.rfind("listening ", 0) != 0 || colon == std::string::npos) {
        ::kill(p.pid, SIGKILL);
        reap(p);
        throw std::runtime_error("proxy did not start: '" + ready + "'");
      }
      const auto port = static_cast<std::uint16_t>(std::stoul(ready.substr(colon + 1)));
      Child c = spawn(client_args(cfg, port, emails));
      r.response_ms = read_times(c.out);
      ExitInfo ce = reap(c);
      ::kill(p.pid, SIGINT);
      ExitInfo pe = reap(p);
      if (!WIFEXITED(ce.status) || WEXITSTATUS(ce.status) != 0) throw std::runtime_error("client failed");
      r.cpu_s = pe.cpu_s;
      r.max_rss_bytes = pe.max_rss_bytes;
    } else {
      auto args = client_args(cfg, stub.port(), emails);
      if (scenario == Scenario::GreyBox) {
        args.insert(args.end(), {"--greybox", "--type", cfg.pst});
        if (logging) {
          args.insert(args.end(), {"--log", log_path});
        } else {
          args.push_back("--no-log");
        }
      }
      Child c = spawn(args);
      r.response_ms = read_times(c.out);
      ExitInfo ce = reap(c);
      if (!WIFEXITED(ce.status) || WEXITSTATUS(ce.status) != 0) throw std::runtime_error("client failed");
      if (scenario == Scenario::GreyBox) {
        r.cpu_s = ce.cpu_s;
        r.max_rss_bytes = ce.max_rss_bytes;
      }
    }
    // HELO, per email MAIL/RCPT*r/DATA/body, QUIT.
    const std::size_t expected = 2 + emails * (3 + cfg.recipients);
    if (r.response_ms.size() != expected)
      throw std::runtime_error("expected " + std::to_string(expected) + " responses, got " +
                               std::to_string(r.response_ms.size()));
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  stub.stop();
  return r;
}

}  // namespace

std::vector<BenchResult> run_bench(const BenchConfig& config, std::ostream* progress) {
  if (config.exe.empty()) throw std::invalid_argument("bench needs the pstmon executable path");
  std::vector<BenchResult> results;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    for (std::uint64_t emails : config.emails) {
      for (Scenario s : config.scenarios) {
        if (s == Scenario::Unsafe) {
          results.push_back(run_cell(config, s, false, emails, rep));
          if (progress) *progress << to_string(s) << " emails=" << emails << " rep=" << rep << "\n";
          continue;
        }
        for (bool logging : config.logging) {
          results.push_back(run_cell(config, s, logging, emails, rep));
          if (progress)
            *progress << to_string(s) << (logging ? " log=on" : " log=off") << " emails=" << emails
                      << " rep=" << rep << (results.back().ok ? "" : " FAILED: " + results.back().error) << "\n";
        }
      }
    }
  }
  return results;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results) {
  out << kBenchCsvHeader << '\n';
  char buf[64];
  for (const auto& r : results) {
    out << to_string(r.scenario) << ',' << r.logging << ',' << r.emails << ',' << r.rep << ',';
    if (!r.ok) {
      out << "NA,NA,NA\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,", r.mean_response_ms(), r.cpu_s);
    out << buf << r.max_rss_bytes << '\n';
  }
}

}  // namespace pstmon::sim
