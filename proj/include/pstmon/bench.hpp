#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pstmon::sim {

enum class Scenario { Unsafe, BlackBox, GreyBox };
std::string_view to_string(Scenario s);

struct BenchConfig {
  /// Path of the pstmon executable used to spawn proxies and clients.
  std::string exe;
  std::string pst;
  std::string codec;
  std::vector<Scenario> scenarios{Scenario::Unsafe, Scenario::BlackBox, Scenario::GreyBox};
  std::vector<bool> logging{false, true};
  std::vector<std::uint64_t> emails{10, 50, 100};
  std::uint64_t recipients = 1;
  int repetitions = 5;
  /// Directory for monitor logs written while logging is on.
  std::string log_dir = ".";
};

struct BenchResult {
  Scenario scenario = Scenario::Unsafe;
  /// "on", "off", or "na" for the unmonitored scenario.
  std::string logging = "na";
  std::uint64_t emails = 0;
  int rep = 0;
  std::vector<double> response_ms;
  double cpu_s = 0.0;
  std::int64_t max_rss_bytes = 0;
  bool ok = false;
  std::string error;

  double mean_response_ms() const;
};

/// Runs every scenario x logging x email-count cell `repetitions` times.
/// Repetitions are the outer loop so that slow drifts affect all cells alike.
std::vector<BenchResult> run_bench(const BenchConfig& config, std::ostream* progress = nullptr);

inline constexpr const char* kBenchCsvHeader = "scenario,logging,emails,rep,mean_resp_ms,cpu_s,max_rss_bytes";

/// Failed cells are written with `NA` in the measurement columns.
void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results);

}  // namespace pstmon::sim
