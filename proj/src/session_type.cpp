#include "pstmon/session_type.hpp"

#include <cmath>

namespace pstmon {

namespace {

__int128 pow10_128(int k) {
  __int128 r = 1;
  for (int i = 0; i < k; ++i) r *= 10;
  return r;
}

}  // namespace

std::string_view to_string(Sort s) {
  switch (s) {
    case Sort::Int: return "Int";
    case Sort::String: return "String";
    case Sort::Bool: return "Bool";
  }
  return "?";
}

std::optional<Sort> sort_from_string(std::string_view name) {
  if (name == "Int") return Sort::Int;
  if (name == "String") return Sort::String;
  if (name == "Bool") return Sort::Bool;
  return std::nullopt;
}

Probability::Probability(std::int64_t units, int scale) : units_(units), scale_(scale) {
  if (scale < 0 || scale > kMaxScale || units < 0)
    throw std::invalid_argument("probability out of representable range");
  while (scale_ > 0 && units_ % 10 == 0) {
    units_ /= 10;
    --scale_;
  }
  if (static_cast<__int128>(units_) > pow10_128(scale_))
    throw std::invalid_argument("probability greater than 1");
}

Probability Probability::parse(std::string_view text) {
  std::size_t i = 0;
  std::int64_t units = 0;
  int scale = 0;
  bool digits = false;
  for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) {
    if (units > 1) throw std::invalid_argument("probability greater than 1: " + std::string(text));
    units = units * 10 + (text[i] - '0');
    digits = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) {
      if (scale == kMaxScale) throw std::invalid_argument("too many decimal digits: " + std::string(text));
      units = units * 10 + (text[i] - '0');
      ++scale;
      digits = true;
    }
  }
  if (!digits || i != text.size()) throw std::invalid_argument("malformed probability: " + std::string(text));
  return Probability(units, scale);
}

double Probability::value() const {
  return static_cast<double>(units_) / std::pow(10.0, scale_);
}

std::string Probability::to_string() const {
  if (scale_ == 0) return std::to_string(units_);
  std::string digits = std::to_string(units_);
  if (static_cast<int>(digits.size()) <= scale_)
    digits.insert(0, static_cast<std::size_t>(scale_) - digits.size() + 1, '0');
  digits.insert(digits.size() - static_cast<std::size_t>(scale_), ".");
  return digits;
}

bool operator==(const Probability& a, const Probability& b) {
  return a.units_ == b.units_ && a.scale_ == b.scale_;
}

void DecimalSum::add(const Probability& p) {
  if (p.scale() > scale) {
    units *= pow10_128(p.scale() - scale);
    scale = p.scale();
  }
  units += static_cast<__int128>(p.units()) * pow10_128(scale - p.scale());
}

double DecimalSum::value() const {
  return static_cast<double>(units) / std::pow(10.0, scale);
}

bool DecimalSum::near_one(double tolerance) const {
  const __int128 one = pow10_128(scale);
  const __int128 diff = units > one ? units - one : one - units;
  // diff / 10^scale <= tolerance; both sides are small enough for long double.
  return static_cast<long double>(diff) <= static_cast<long double>(tolerance) * static_cast<long double>(one);
}

TypePtr SessionType::make_end(SourcePos pos) {
  auto t = std::make_shared<SessionType>();
  t->kind = Kind::End;
  t->pos = pos;
  return t;
}

TypePtr SessionType::make_var(std::string name, SourcePos pos) {
  auto t = std::make_shared<SessionType>();
  t->kind = Kind::Var;
  t->var = std::move(name);
  t->pos = pos;
  return t;
}

TypePtr SessionType::make_rec(std::string name, TypePtr body, SourcePos pos) {
  auto t = std::make_shared<SessionType>();
  t->kind = Kind::Rec;
  t->var = std::move(name);
  t->body = std::move(body);
  t->pos = pos;
  return t;
}

TypePtr SessionType::make_choice(ChoiceKind kind, std::vector<Branch> branches, SourcePos pos) {
  auto t = std::make_shared<SessionType>();
  t->kind = Kind::Choice;
  t->choice = kind;
  t->branches = std::move(branches);
  t->pos = pos;
  return t;
}

bool structurally_equal(const SessionType& a, const SessionType& b) {
  // Iterative over the spine so long chains of prefixes do not exhaust the stack.
  std::vector<std::pair<const SessionType*, const SessionType*>> work{{&a, &b}};
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    if (x->kind != y->kind) return false;
    switch (x->kind) {
      case SessionType::Kind::End:
        break;
      case SessionType::Kind::Var:
        if (x->var != y->var) return false;
        break;
      case SessionType::Kind::Rec:
        if (x->var != y->var) return false;
        work.emplace_back(x->body.get(), y->body.get());
        break;
      case SessionType::Kind::Choice:
        if (x->choice != y->choice || x->branches.size() != y->branches.size()) return false;
        for (std::size_t i = 0; i < x->branches.size(); ++i) {
          const Branch& p = x->branches[i];
          const Branch& q = y->branches[i];
          if (p.polarity != q.polarity || p.label != q.label || p.payload != q.payload || !(p.prob == q.prob))
            return false;
          work.emplace_back(p.cont.get(), q.cont.get());
        }
        break;
    }
  }
  return true;
}

namespace {

void print_branch(const Branch& b, std::string& out);

void print_type(const SessionType& t, std::string& out) {
  switch (t.kind) {
    case SessionType::Kind::End:
      out += "end";
      return;
    case SessionType::Kind::Var:
      out += t.var;
      return;
    case SessionType::Kind::Rec:
      out += "rec ";
      out += t.var;
      out += ".(";
      print_type(*t.body, out);
      out += ")";
      return;
    case SessionType::Kind::Choice:
      if (t.branches.size() == 1) {
        print_branch(t.branches.front(), out);
        return;
      }
      out += t.choice == ChoiceKind::External ? "&{" : "+{";
      for (std::size_t i = 0; i < t.branches.size(); ++i) {
        if (i) out += ", ";
        print_branch(t.branches[i], out);
      }
      out += "}";
      return;
  }
}

void print_branch(const Branch& b, std::string& out) {
  out += b.polarity == Polarity::Send ? '!' : '?';
  out += b.label;
  out += '(';
  if (b.payload) {
    out += b.payload->var;
    out += ": ";
    out += to_string(b.payload->sort);
  }
  out += ")[";
  out += b.prob.to_string();
  out += "].";
  print_type(*b.cont, out);
}

}  // namespace

std::string pretty_print(const SessionType& t) {
  std::string out;
  print_type(t, out);
  return out;
}

ParseError::ParseError(Kind kind, SourcePos pos, const std::string& msg)
    : std::runtime_error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + msg),
      kind_(kind),
      pos_(pos) {}

std::string_view to_string(ParseError::Kind k) {
  switch (k) {
    case ParseError::Kind::Syntax: return "Syntax";
    case ParseError::Kind::UnknownSort: return "UnknownSort";
    case ParseError::Kind::BadProbability: return "BadProbability";
    case ParseError::Kind::MultiPayload: return "MultiPayload";
  }
  return "?";
}

std::string_view to_string(WellFormednessError::Kind k) {
  switch (k) {
    case WellFormednessError::Kind::ProbSum: return "ProbSum";
    case WellFormednessError::Kind::DuplicateLabel: return "DuplicateLabel";
    case WellFormednessError::Kind::UnguardedRec: return "UnguardedRec";
    case WellFormednessError::Kind::UnboundVar: return "UnboundVar";
    case WellFormednessError::Kind::MixedPolarity: return "MixedPolarity";
  }
  return "?";
}

}  // namespace pstmon
