#include "pstmon/smtp.hpp"

#include <chrono>

namespace pstmon::sim {

namespace {

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.size() >= prefix.size() && std::string_view(s).substr(0, prefix.size()) == prefix;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && std::string_view(s).substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

SmtpStub::SmtpStub(net::Endpoint listen) : listen_(std::move(listen)) {}

SmtpStub::~SmtpStub() {
  stop();
}

void SmtpStub::start() {
  listener_ = std::make_unique<net::Listener>(listen_);
  acceptor_ = std::thread([this] {
    while (!stopping_) {
      std::optional<net::Socket> s;
      try {
        s = listener_->accept(std::chrono::milliseconds(50));
      } catch (const net::NetError&) {
        continue;
      }
      if (!s) continue;
      std::lock_guard lock(mu_);
      sessions_.emplace_back([this, sock = std::move(*s)]() mutable { serve(std::move(sock)); });
    }
  });
}

void SmtpStub::stop() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> sessions;
  {
    std::lock_guard lock(mu_);
    sessions.swap(sessions_);
  }
  for (auto& t : sessions)
    if (t.joinable()) t.join();
  if (listener_) listener_->close();
}

void SmtpStub::serve(net::Socket sock) {
  net::LineReader reader(sock, true);
  auto reply = [&](std::string_view text) {
    std::string line(text);
    line += "\r\n";
    sock.write_all(line);
  };
  try {
    reply("220 stub.local ESMTP ready");
    bool in_data = false;
    while (auto line = reader.read_line()) {
      if (in_data) {
        // Single-line body terminated by an escaped newline and a lone dot.
        if (ends_with(*line, "\\n.")) {
          in_data = false;
          reply("250 OK queued");
        } else {
          reply("500 malformed body line");
        }
      } else if (starts_with(*line, "HELO ")) {
        reply("250 stub.local");
      } else if (starts_with(*line, "MAIL FROM:")) {
        reply("250 OK");
      } else if (starts_with(*line, "RCPT TO:")) {
        reply("250 OK");
      } else if (*line == "DATA") {
        in_data = true;
        reply("354 End data with <CR><LF>.<CR><LF>");
      } else if (*line == "QUIT") {
        reply("221 Bye");
        break;
      } else {
        reply("500 command not recognized");
      }
    }
  } catch (const net::NetError&) {
  }
  ++served_;
  sock.close();
}

SmtpTrace run_smtp_client(TypedChannel& ch, const MailLoop& loop) {
  SmtpTrace trace;
  using clock = std::chrono::steady_clock;
  auto expect = [&](const std::string& label) {
    auto m = ch.receive();
    if (!m) throw std::runtime_error("server closed the connection while waiting for " + label);
    trace.labels.push_back(m->label);
    if (m->label != label) throw std::runtime_error("expected " + label + " but got " + m->label);
  };
  auto request = [&](const std::string& label, std::optional<Value> payload, const std::string& reply) {
    const auto t0 = clock::now();
    ch.send(TypedMessage{Direction::FromClient, label, std::move(payload)});
    trace.labels.push_back(label);
    expect(reply);
    trace.response_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  };
  try {
    expect("M220");
    request("Helo", Value{std::string("client.local")}, "M250");
    for (std::uint64_t e = 0; e < loop.emails; ++e) {
      request("MailFrom", Value{std::string("<sender@client.local>")}, "M250");
      for (std::uint64_t r = 0; r < loop.recipients; ++r)
        request("RcptTo", Value{"<rcpt" + std::to_string(r + 1) + "@stub.local>"}, "M250");
      request("Data", std::nullopt, "M354");
      request("Content", Value{"Subject: message " + std::to_string(e + 1) + "\\n\\nHello from the client."}, "M250");
    }
    request("Quit", std::nullopt, "M221");
    trace.completed = true;
  } catch (const std::exception& e) {
    trace.error = e.what();
  }
  return trace;
}

}  // namespace pstmon::sim
