#pragma once

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "pstmon/session_type.hpp"

namespace testsupport {

inline std::string protocol(const std::string& name) {
  return std::string(PSTMON_PROTOCOLS_DIR) + "/" + name;
}

/// Random well-formed PST source text: at most `max_choices` choice
/// occurrences, at most 4 branches each, probabilities in hundredths
/// summing to exactly 1. Recursion variables only appear under a choice.
class RandomPst {
 public:
  explicit RandomPst(std::uint64_t seed, int max_choices = 4) : rng_(seed), budget_(max_choices) {}

  std::string generate() {
    std::vector<std::string> bound;
    if (coin(0.5)) {
      bound.push_back("X");
      return "rec X." + choice(bound);
    }
    return choice(bound);
  }

 private:
  std::mt19937_64 rng_;
  int budget_;
  int var_counter_ = 0;

  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::vector<int> split_hundred(int k) {
    std::vector<int> cuts;
    while (static_cast<int>(cuts.size()) < k - 1) {
      int c = uniform(1, 99);
      bool dup = false;
      for (int x : cuts) dup |= x == c;
      if (!dup) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<int> parts;
    int prev = 0;
    for (int c : cuts) {
      parts.push_back(c - prev);
      prev = c;
    }
    parts.push_back(100 - prev);
    return parts;
  }

  static std::string prob_text(int hundredths) {
    if (hundredths == 100) return "1";
    char buf[16];
    std::snprintf(buf, sizeof buf, "0.%02d", hundredths);
    return buf;
  }

  std::string choice(std::vector<std::string>& bound) {
    --budget_;
    const int k = uniform(1, 4);
    const bool send = coin(0.5);
    static const char* pool[] = {"A", "B", "C", "D", "E", "F", "G"};
    std::vector<std::string> labels;
    while (static_cast<int>(labels.size()) < k) {
      std::string l = pool[uniform(0, 6)];
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    }
    auto parts = split_hundred(k);
    std::string out = k == 1 ? "" : (send ? "+{" : "&{");
    for (int i = 0; i < k; ++i) {
      if (i) out += ", ";
      out += send ? "!" : "?";
      out += labels[i] + "(";
      switch (uniform(0, 3)) {
        case 1: out += "v: Int"; break;
        case 2: out += "v: String"; break;
        case 3: out += "v: Bool"; break;
        default: break;
      }
      out += ")[" + prob_text(parts[i]) + "]." + continuation(bound);
    }
    if (k > 1) out += "}";
    return out;
  }

  std::string continuation(std::vector<std::string>& bound) {
    const int r = uniform(0, 9);
    if (budget_ > 0 && r < 4) return choice(bound);
    if (budget_ > 0 && r < 5) {
      std::string v = "Y" + std::to_string(var_counter_++);
      bound.push_back(v);
      std::string body = "rec " + v + ".(" + choice(bound) + ")";
      bound.pop_back();
      return body;
    }
    if (!bound.empty() && r < 8) return bound[uniform(0, static_cast<int>(bound.size()) - 1)];
    return "end";
  }
};

}  // namespace testsupport
