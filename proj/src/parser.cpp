#include <cctype>
#include <fstream>
#include <sstream>

#include "pstmon/session_type.hpp"

namespace pstmon {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  // document = [ IDENT "=" ] type ; the optional name is how types are written down (`S_game = ...`).
  TypePtr parse_document() {
    skip_ws();
    std::size_t save_i = i_;
    int save_line = line_, save_col = col_;
    if (is_letter(peek())) {
      std::string name = ident();
      skip_ws();
      if (peek() == '=' && name != "rec" && name != "end") {
        advance();
      } else {
        i_ = save_i;
        line_ = save_line;
        col_ = save_col;
      }
    }
    TypePtr t = parse_type();
    skip_ws();
    if (!at_end()) fail("unexpected trailing input");
    return t;
  }

 private:
  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;

  bool at_end() const { return i_ >= src_.size(); }
  char peek() const { return at_end() ? '\0' : src_[i_]; }
  SourcePos pos() const { return {line_, col_}; }

  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  [[noreturn]] void fail(const std::string& msg, ParseError::Kind kind = ParseError::Kind::Syntax) const {
    fail_at(pos(), msg, kind);
  }
  [[noreturn]] static void fail_at(SourcePos p, const std::string& msg,
                                   ParseError::Kind kind = ParseError::Kind::Syntax) {
    throw ParseError(kind, p, msg);
  }

  void skip_ws() {
    while (!at_end()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
        while (!at_end() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) {
      if (at_end()) fail(std::string("expected '") + c + "' but reached end of input");
      fail(std::string("expected '") + c + "' but found '" + peek() + "'");
    }
    advance();
  }

  static bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
  static bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
  }

  std::string ident() {
    skip_ws();
    if (!is_letter(peek())) fail("expected identifier");
    std::size_t start = i_;
    while (!at_end() && is_ident_char(peek())) advance();
    return std::string(src_.substr(start, i_ - start));
  }

  TypePtr parse_type() {
    skip_ws();
    SourcePos p = pos();
    char c = peek();
    if (c == '(') {
      advance();
      TypePtr inner = parse_type();
      expect(')');
      return inner;
    }
    if (c == '+' || c == '&') return parse_choice();
    if (c == '!' || c == '?') {
      Branch b = parse_branch();
      ChoiceKind k = b.polarity == Polarity::Send ? ChoiceKind::Internal : ChoiceKind::External;
      std::vector<Branch> bs;
      bs.push_back(std::move(b));
      return SessionType::make_choice(k, std::move(bs), p);
    }
    if (is_letter(c)) {
      std::string word = ident();
      if (word == "end") return SessionType::make_end(p);
      if (word == "rec") {
        std::string var = ident();
        if (var == "end" || var == "rec") fail_at(p, "reserved word used as recursion variable");
        expect('.');
        TypePtr body = parse_type();
        return SessionType::make_rec(std::move(var), std::move(body), p);
      }
      return SessionType::make_var(std::move(word), p);
    }
    if (at_end()) fail("expected a session type but reached end of input");
    fail(std::string("unexpected character '") + c + "'");
  }

  TypePtr parse_choice() {
    SourcePos p = pos();
    ChoiceKind k = peek() == '+' ? ChoiceKind::Internal : ChoiceKind::External;
    advance();
    expect('{');
    std::vector<Branch> bs;
    bs.push_back(parse_branch());
    skip_ws();
    while (peek() == ',') {
      advance();
      bs.push_back(parse_branch());
      skip_ws();
    }
    expect('}');
    return SessionType::make_choice(k, std::move(bs), p);
  }

  Branch parse_branch() {
    skip_ws();
    Branch b;
    b.pos = pos();
    if (peek() == '!') {
      b.polarity = Polarity::Send;
    } else if (peek() == '?') {
      b.polarity = Polarity::Receive;
    } else {
      fail("expected '!' or '?' to start a branch");
    }
    advance();
    b.label = ident();
    expect('(');
    skip_ws();
    if (peek() != ')') {
      Payload pl;
      pl.var = ident();
      expect(':');
      skip_ws();
      SourcePos sp = pos();
      std::string sort_name = is_letter(peek()) ? ident() : std::string();
      auto sort = sort_from_string(sort_name);
      if (!sort) fail_at(sp, "unknown sort '" + sort_name + "'", ParseError::Kind::UnknownSort);
      pl.sort = *sort;
      b.payload = std::move(pl);
      skip_ws();
      if (peek() == ',') fail("at most one payload per message", ParseError::Kind::MultiPayload);
    }
    expect(')');
    expect('[');
    skip_ws();
    SourcePos pp = pos();
    std::size_t start = i_;
    while (!at_end() && peek() != ']' && !std::isspace(static_cast<unsigned char>(peek()))) advance();
    std::string_view lit = src_.substr(start, i_ - start);
    try {
      b.prob = Probability::parse(lit);
    } catch (const std::invalid_argument& e) {
      fail_at(pp, e.what(), ParseError::Kind::BadProbability);
    }
    expect(']');
    expect('.');
    b.cont = parse_type();
    return b;
  }
};

}  // namespace

TypePtr parse_pst(std::string_view source) {
  return Parser(source).parse_document();
}

TypePtr parse_pst_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pst(ss.str());
}

TypePtr load_valid_pst(const std::string& path) {
  TypePtr t;
  try {
    t = parse_pst_file(path);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ":" + e.what());
  }
  auto errors = validate(*t);
  if (!errors.empty()) {
    std::string msg = path + ": invalid session type";
    for (const auto& e : errors) {
      msg += "\n  " + std::to_string(e.pos.line) + ":" + std::to_string(e.pos.column) + ": " +
             std::string(to_string(e.kind)) + ": " + e.message;
    }
    throw std::runtime_error(msg);
  }
  return t;
}

}  // namespace pstmon
