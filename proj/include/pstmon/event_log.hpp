#pragma once

#include <fstream>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pstmon/monitor.hpp"

namespace pstmon {

inline constexpr const char* kEventCsvHeader =
    "session_id,seq,direction,choice_point_id,label,n,p_hat,ci_lo,ci_hi,verdict,timestamp_ms";

/// One CSV row (no line terminator). Reals use 6 decimal places.
std::string format_csv_row(const MonitorEvent& e);
std::string format_jsonl_row(const MonitorEvent& e);

enum class LogFormat { Csv, Jsonl };

/// Writes events to a stream, one line each, flushed per event so that logs
/// can be followed while a session runs.
class StreamEventSink : public EventSink {
 public:
  StreamEventSink(std::ostream& out, LogFormat format);
  void write(const MonitorEvent& e) override;

 private:
  std::mutex mu_;
  std::ostream& out_;
  LogFormat format_;
};

class FileEventSink : public EventSink {
 public:
  FileEventSink(const std::string& path, LogFormat format);
  void write(const MonitorEvent& e) override;

 private:
  std::ofstream file_;
  std::unique_ptr<StreamEventSink> inner_;
};

class MemoryEventSink : public EventSink {
 public:
  void write(const MonitorEvent& e) override;
  std::vector<MonitorEvent> events() const;
  std::vector<MonitorEvent> events_for(const std::string& session_id) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<MonitorEvent> events_;
};

class NullEventSink : public EventSink {
 public:
  void write(const MonitorEvent&) override {}
};

class TeeEventSink : public EventSink {
 public:
  TeeEventSink(EventSink& a, EventSink& b) : a_(a), b_(b) {}
  void write(const MonitorEvent& e) override {
    a_.write(e);
    b_.write(e);
  }

 private:
  EventSink& a_;
  EventSink& b_;
};

/// Parses a CSV event log produced by StreamEventSink. Throws on a wrong header.
std::vector<MonitorEvent> read_csv_log(std::istream& in);

struct SeriesRow {
  std::uint64_t n = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  Verdict verdict = Verdict::Ok;
  bool warning = false;
};

/// Per-visit series of one branch at one choice point. When `session` is
/// empty the first session containing the choice point is used.
std::vector<SeriesRow> extract_series(const std::vector<MonitorEvent>& events, const std::string& choice_point_id,
                                      const std::string& branch, const std::string& session = {});

void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows);

}  // namespace pstmon
