#include "pstmon/event_log.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pstmon {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Labels and ids are identifiers; violation rows may carry raw text.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::string format_csv_row(const MonitorEvent& e) {
  std::string row;
  row.reserve(128);
  row += csv_field(e.session_id);
  row += ',';
  row += std::to_string(e.seq);
  row += ',';
  row += to_string(e.direction);
  row += ',';
  row += csv_field(e.choice_point_id);
  row += ',';
  row += csv_field(e.label);
  row += ',';
  row += std::to_string(e.n);
  row += ',';
  row += fixed6(e.p_hat);
  row += ',';
  row += fixed6(e.ci_lo);
  row += ',';
  row += fixed6(e.ci_hi);
  row += ',';
  row += to_string(e.verdict);
  row += ',';
  row += std::to_string(e.timestamp_ms);
  return row;
}

std::string format_jsonl_row(const MonitorEvent& e) {
  nlohmann::ordered_json j;
  j["session_id"] = e.session_id;
  j["seq"] = e.seq;
  j["direction"] = to_string(e.direction);
  j["choice_point_id"] = e.choice_point_id;
  j["label"] = e.label;
  j["n"] = e.n;
  // Same 6-decimal rendering as the CSV.
  j["p_hat"] = std::stod(fixed6(e.p_hat));
  j["ci_lo"] = std::stod(fixed6(e.ci_lo));
  j["ci_hi"] = std::stod(fixed6(e.ci_hi));
  j["verdict"] = to_string(e.verdict);
  j["timestamp_ms"] = e.timestamp_ms;
  if (!e.detail.empty()) j["detail"] = e.detail;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

StreamEventSink::StreamEventSink(std::ostream& out, LogFormat format) : out_(out), format_(format) {
  if (format_ == LogFormat::Csv) {
    out_ << kEventCsvHeader << '\n';
    out_.flush();
  }
}

void StreamEventSink::write(const MonitorEvent& e) {
  std::string line = format_ == LogFormat::Csv ? format_csv_row(e) : format_jsonl_row(e);
  line += '\n';
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
}

FileEventSink::FileEventSink(const std::string& path, LogFormat format) : file_(path, std::ios::binary) {
  if (!file_) throw std::runtime_error("cannot open log file " + path);
  inner_ = std::make_unique<StreamEventSink>(file_, format);
}

void FileEventSink::write(const MonitorEvent& e) {
  inner_->write(e);
}

void MemoryEventSink::write(const MonitorEvent& e) {
  std::lock_guard lock(mu_);
  events_.push_back(e);
}

std::vector<MonitorEvent> MemoryEventSink::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<MonitorEvent> MemoryEventSink::events_for(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  std::vector<MonitorEvent> out;
  for (const auto& e : events_)
    if (e.session_id == session_id) out.push_back(e);
  return out;
}

void MemoryEventSink::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
}

std::vector<MonitorEvent> read_csv_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty event log");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEventCsvHeader) throw std::runtime_error("unexpected event log header: " + line);
  std::vector<MonitorEvent> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 11) throw std::runtime_error("event log line " + std::to_string(lineno) + ": expected 11 fields");
    try {
      MonitorEvent e;
      e.session_id = f[0];
      e.seq = std::stoull(f[1]);
      e.direction = f[2] == "client" ? Direction::FromClient : Direction::FromServer;
      e.choice_point_id = f[3];
      e.label = f[4];
      e.n = std::stoull(f[5]);
      e.p_hat = std::stod(f[6]);
      e.ci_lo = std::stod(f[7]);
      e.ci_hi = std::stod(f[8]);
      auto v = verdict_from_string(f[9]);
      if (!v) throw std::runtime_error("unknown verdict '" + f[9] + "'");
      e.verdict = *v;
      e.timestamp_ms = std::stoll(f[10]);
      out.push_back(std::move(e));
    } catch (const std::logic_error& ex) {
      throw std::runtime_error("event log line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<SeriesRow> extract_series(const std::vector<MonitorEvent>& events, const std::string& choice_point_id,
                                      const std::string& branch, const std::string& session) {
  std::string sid = session;
  if (sid.empty()) {
    for (const auto& e : events) {
      if (e.choice_point_id == choice_point_id && e.label == branch && e.n > 0) {
        sid = e.session_id;
        break;
      }
    }
  }
  std::vector<SeriesRow> rows;
  bool warning = false;
  for (const auto& e : events) {
    if (e.session_id != sid || e.choice_point_id != choice_point_id || e.label != branch || e.n == 0) continue;
    if (e.verdict == Verdict::WarningRaised) warning = true;
    if (e.verdict == Verdict::WarningRetracted) warning = false;
    rows.push_back({e.n, e.p_hat, e.ci_lo, e.ci_hi, e.verdict, warning});
  }
  return rows;
}

void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows) {
  out << "n,p_hat,ci_lo,ci_hi,verdict,warning\n";
  for (const auto& r : rows) {
    out << r.n << ',' << fixed6(r.p_hat) << ',' << fixed6(r.ci_lo) << ',' << fixed6(r.ci_hi) << ','
        << to_string(r.verdict) << ',' << (r.warning ? 1 : 0) << '\n';
  }
}

}  // namespace pstmon
