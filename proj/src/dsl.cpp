#include "specsyn/dsl.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "specsyn/text.hpp"

namespace specsyn::dsl {

namespace {

constexpr std::array<std::string_view, kRelationCount> kRelationNames = {
    "eq", "neq", "gt", "lt", "interval", "set", "use", "with", "prefer", "format", "recommend"};
constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "quantitative", "utilization", "interrelation", "attribute", "generic"};
constexpr std::array<std::string_view, 5> kReserved = {"in", "and", "or", "true", "false"};

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool is_ident_start(char c, char next) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') return true;
  // `--plugin` style names; `-5` is a number.
  return c == '-' && (next == '-' || (next >= 'a' && next <= 'z') || (next >= 'A' && next <= 'Z') || next == '_');
}

bool is_ident_char(char c) { return text::is_word_char(c) || c == '.' || c == '-'; }

enum class Tok {
  Ident,
  Number,
  String,
  Op,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  LParen,
  RParen,
  Comma,
  Percent,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;  // identifier / operator / decoded string contents
  double number = 0.0;
  std::size_t pos = 0;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End:
      return "end of input";
    case Tok::String:
      return "string";
    default:
      return "'" + t.text + "'";
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (i_ >= src_.size()) {
        out.push_back({Tok::End, "", 0.0, i_});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  void skip_space() {
    while (i_ < src_.size() && text::is_space(src_[i_])) ++i_;
  }

  char peek(std::size_t k = 0) const { return i_ + k < src_.size() ? src_[i_ + k] : '\0'; }

  Token next() {
    const std::size_t start = i_;
    const char c = peek();
    auto single = [&](Tok kind) {
      ++i_;
      return Token{kind, std::string(1, c), 0.0, start};
    };
    switch (c) {
      case '[': return single(Tok::LBracket);
      case ']': return single(Tok::RBracket);
      case '{': return single(Tok::LBrace);
      case '}': return single(Tok::RBrace);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case ',': return single(Tok::Comma);
      case '%': return single(Tok::Percent);
      case '>': return single(Tok::Op);
      case '<': return single(Tok::Op);
      case '=':
      case '!':
        if (peek(1) == '=') {
          i_ += 2;
          return Token{Tok::Op, std::string{c, '='}, 0.0, start};
        }
        throw SyntaxError(start, {"'=='", "'!='"}, std::string(1, c));
      case '"': return string_literal();
      default: break;
    }
    if (text::is_digit(c) || (c == '-' && text::is_digit(peek(1))) ||
        (c == '.' && text::is_digit(peek(1)))) {
      return number();
    }
    if (is_ident_start(c, peek(1))) {
      while (i_ < src_.size() && is_ident_char(src_[i_])) ++i_;
      return Token{Tok::Ident, std::string(src_.substr(start, i_ - start)), 0.0, start};
    }
    throw SyntaxError(start, {"keyword", "value", "operator"}, std::string(1, c));
  }

  Token number() {
    const std::size_t start = i_;
    if (peek() == '-') ++i_;
    while (text::is_digit(peek())) ++i_;
    if (peek() == '.' && text::is_digit(peek(1))) {
      ++i_;
      while (text::is_digit(peek())) ++i_;
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (text::is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && text::is_digit(peek(2))))) {
      i_ += 2;
      while (text::is_digit(peek())) ++i_;
    }
    const std::string_view lexeme = src_.substr(start, i_ - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), v);
    if (ec != std::errc{} || ptr != lexeme.data() + lexeme.size() || !std::isfinite(v)) {
      throw SyntaxError(start, {"finite number"}, std::string(lexeme));
    }
    return Token{Tok::Number, std::string(lexeme), v, start};
  }

  Token string_literal() {
    const std::size_t start = i_;
    ++i_;
    std::string out;
    while (true) {
      if (i_ >= src_.size()) throw SyntaxError(i_, {"'\"'"}, "end of input");
      const char c = src_[i_++];
      if (c == '"') break;
      if (c == '\\') {
        if (i_ >= src_.size()) throw SyntaxError(i_, {"escape character"}, "end of input");
        const char e = src_[i_++];
        if (e != '"' && e != '\\') throw SyntaxError(i_ - 1, {"'\"'", "'\\\\'"}, std::string(1, e));
        out.push_back(e);
        continue;
      }
      out.push_back(c);
    }
    return Token{Tok::String, out, 0.0, start};
  }

  std::string_view src_;
  std::size_t i_ = 0;
};

bool is_function_name(std::string_view s) {
  return s == "use" || s == "recommend" || s == "with" || s == "prefer" || s == "format";
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).run()) {}

  Specification run() {
    Specification spec;
    spec.rules.push_back(rule());
    while (is_word("and") || is_word("or")) {
      spec.connectives.push_back(cur().text == "and" ? Connective::And : Connective::Or);
      ++k_;
      spec.rules.push_back(rule());
    }
    if (cur().kind != Tok::End) fail({"'and'", "'or'", "end of input"});
    validate(spec);
    return spec;
  }

 private:
  const Token& cur() const { return toks_[k_]; }
  const Token& ahead(std::size_t n) const { return toks_[std::min(k_ + n, toks_.size() - 1)]; }
  bool is_word(std::string_view w) const { return cur().kind == Tok::Ident && cur().text == w; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw SyntaxError(cur().pos, std::move(expected), describe(cur()));
  }

  void expect(Tok kind, std::string_view what) {
    if (cur().kind != kind) fail({std::string(what)});
    ++k_;
  }

  std::string key() {
    if (cur().kind != Tok::Ident || is_reserved_word(cur().text)) fail({"keyword"});
    return toks_[k_++].text;
  }

  Rule rule() {
    if (cur().kind == Tok::Ident && is_function_name(cur().text) && ahead(1).kind == Tok::LParen) {
      return function_rule();
    }
    Rule r;
    r.keyword = key();
    if (cur().kind == Tok::Op) {
      const std::string op = toks_[k_++].text;
      if (op == "==") r.relation = Relation::Eq;
      else if (op == "!=") r.relation = Relation::Neq;
      else if (op == ">") r.relation = Relation::Gt;
      else r.relation = Relation::Lt;
      if (r.relation == Relation::Gt || r.relation == Relation::Lt) {
        if (cur().kind != Tok::Number) fail({"number"});
      }
      r.values.push_back(value());
      return r;
    }
    if (is_word("in")) {
      ++k_;
      if (cur().kind == Tok::LBracket) {
        ++k_;
        r.relation = Relation::Interval;
        r.values = value_list(Tok::RBracket, "']'", /*numbers_only=*/true);
        if (r.values.size() != 2) {
          throw ArityError("interval for '" + r.keyword + "' needs exactly 2 bounds, got " +
                           std::to_string(r.values.size()));
        }
        return r;
      }
      if (cur().kind == Tok::LBrace) {
        ++k_;
        r.relation = Relation::SetMembership;
        r.values = value_list(Tok::RBrace, "'}'", false);
        if (r.values.size() < 2) {
          throw ArityError("set for '" + r.keyword + "' needs at least 2 members, got " +
                           std::to_string(r.values.size()));
        }
        return r;
      }
      fail({"'['", "'{'"});
    }
    fail({"'=='", "'!='", "'>'", "'<'", "'in'"});
  }

  std::vector<Value> value_list(Tok close, std::string_view close_name, bool numbers_only) {
    std::vector<Value> vals;
    while (true) {
      if (numbers_only && cur().kind != Tok::Number) fail({"number"});
      vals.push_back(value());
      if (cur().kind == Tok::Comma) {
        ++k_;
        continue;
      }
      if (cur().kind == close) {
        ++k_;
        return vals;
      }
      fail({"','", std::string(close_name)});
    }
  }

  Rule function_rule() {
    const std::string name = toks_[k_++].text;
    ++k_;  // '('
    Rule r;
    r.keyword = key();
    if (name == "use" || name == "recommend") {
      r.relation = name == "use" ? Relation::Use : Relation::Recommend;
    } else if (name == "with" || name == "prefer") {
      r.relation = name == "with" ? Relation::With : Relation::Prefer;
      expect(Tok::Comma, "','");
      r.values.push_back(KeywordRef{key()});
    } else {
      r.relation = Relation::StringFormat;
      expect(Tok::Comma, "','");
      if (cur().kind != Tok::String) fail({"string"});
      r.values.push_back(FormatClass{toks_[k_++].text});
    }
    expect(Tok::RParen, "')'");
    return r;
  }

  Value value() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Number: {
        ++k_;
        Number n{t.number, std::nullopt};
        if (cur().kind == Tok::Percent) {
          n.unit = "%";
          ++k_;
        } else if (cur().kind == Tok::Ident && !is_reserved_word(cur().text)) {
          n.unit = toks_[k_++].text;
        }
        return n;
      }
      case Tok::String:
        ++k_;
        return Text{t.text};
      case Tok::Ident:
        if (t.text == "true" || t.text == "false") {
          ++k_;
          return Boolean{t.text == "true"};
        }
        if (!is_reserved_word(t.text)) {
          ++k_;
          return KeywordRef{t.text};
        }
        break;
      default:
        break;
    }
    fail({"number", "'true'", "'false'", "keyword", "string"});
  }

  std::vector<Token> toks_;
  std::size_t k_ = 0;
};

bool valid_unit(std::string_view u) { return u == "%" || is_valid_keyword(u); }

bool valid_string(std::string_view s) {
  for (char c : s) {
    if (static_cast<unsigned char>(c) < 0x20) return false;
  }
  return true;
}

void check_value(const Rule& r, const Value& v, bool allow_keyword, bool allow_text, bool allow_bool) {
  const std::string where = "rule on '" + r.keyword + "' (" + std::string(to_string(r.relation)) + ")";
  if (const auto* n = std::get_if<Number>(&v)) {
    if (!std::isfinite(n->magnitude)) throw ValidationError(where + ": non-finite number");
    if (n->unit && !valid_unit(*n->unit)) throw ValidationError(where + ": invalid unit '" + *n->unit + "'");
  } else if (const auto* b = std::get_if<Boolean>(&v)) {
    (void)b;
    if (!allow_bool) throw ValidationError(where + ": boolean value not allowed");
  } else if (const auto* k = std::get_if<KeywordRef>(&v)) {
    if (!allow_keyword) throw ValidationError(where + ": keyword value not allowed");
    if (!is_valid_keyword(k->keyword)) throw ValidationError(where + ": invalid keyword '" + k->keyword + "'");
  } else if (const auto* t = std::get_if<Text>(&v)) {
    if (!allow_text) throw ValidationError(where + ": text value not allowed");
    if (!valid_string(t->text)) throw ValidationError(where + ": control character in text");
  } else {
    throw ValidationError(where + ": format class only allowed in format()");
  }
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string print_value(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Number>) {
          std::string s = format_number(x.magnitude);
          if (x.unit) s += " " + *x.unit;
          return s;
        } else if constexpr (std::is_same_v<T, Boolean>) {
          return x.value ? "true" : "false";
        } else if constexpr (std::is_same_v<T, KeywordRef>) {
          return x.keyword;
        } else if constexpr (std::is_same_v<T, FormatClass>) {
          return quote(x.name);
        } else {
          return quote(x.text);
        }
      },
      v);
}

}  // namespace

SyntaxError::SyntaxError(std::size_t position, std::vector<std::string> expected, const std::string& found)
    : Error("syntax error at position " + std::to_string(position) + ": expected " + join(expected, " or ") +
            ", found " + found),
      position_(position),
      expected_(std::move(expected)) {}

std::string_view to_string(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(Connective c) { return c == Connective::And ? "and" : "or"; }
std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::optional<Category> category_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == s) return static_cast<Category>(i);
  }
  return std::nullopt;
}

bool is_reserved_word(std::string_view s) {
  for (auto r : kReserved) {
    if (r == s) return true;
  }
  return false;
}

bool is_valid_keyword(std::string_view s) {
  if (s.empty() || is_reserved_word(s)) return false;
  if (!is_ident_start(s[0], s.size() > 1 ? s[1] : '\0')) return false;
  for (char c : s) {
    if (!is_ident_char(c)) return false;
  }
  return true;
}

void validate(const Rule& r) {
  if (!is_valid_keyword(r.keyword)) throw ValidationError("invalid keyword '" + r.keyword + "'");
  const auto n = r.values.size();
  auto arity = [&](bool ok, std::string_view want) {
    if (!ok) {
      throw ArityError(std::string(to_string(r.relation)) + " on '" + r.keyword + "' takes " + std::string(want) +
                       " value(s), got " + std::to_string(n));
    }
  };
  switch (r.relation) {
    case Relation::Eq:
    case Relation::Neq:
      arity(n == 1, "1");
      check_value(r, r.values[0], true, true, true);
      break;
    case Relation::Gt:
    case Relation::Lt:
      arity(n == 1, "1");
      if (!std::holds_alternative<Number>(r.values[0])) throw ValidationError("'" + r.keyword + "': comparison needs a number");
      check_value(r, r.values[0], false, false, false);
      break;
    case Relation::Interval: {
      arity(n == 2, "2");
      const auto* lo = std::get_if<Number>(&r.values[0]);
      const auto* hi = std::get_if<Number>(&r.values[1]);
      if (!lo || !hi) throw ValidationError("'" + r.keyword + "': interval bounds must be numbers");
      check_value(r, r.values[0], false, false, false);
      check_value(r, r.values[1], false, false, false);
      if (lo->unit != hi->unit) throw UnitMismatchError("'" + r.keyword + "': interval bounds have different units");
      if (!(lo->magnitude <= hi->magnitude)) {
        throw IntervalOrderError("'" + r.keyword + "': interval lower bound " + format_number(lo->magnitude) +
                                 " exceeds upper bound " + format_number(hi->magnitude));
      }
      break;
    }
    case Relation::SetMembership:
      arity(n >= 2, "at least 2");
      for (const auto& v : r.values) check_value(r, v, true, true, true);
      break;
    case Relation::Use:
    case Relation::Recommend:
      arity(n == 0, "0");
      break;
    case Relation::With:
    case Relation::Prefer:
      arity(n == 1, "1");
      if (!std::holds_alternative<KeywordRef>(r.values[0])) throw ValidationError("'" + r.keyword + "': expects a keyword");
      check_value(r, r.values[0], true, false, false);
      break;
    case Relation::StringFormat: {
      arity(n == 1, "1");
      const auto* f = std::get_if<FormatClass>(&r.values[0]);
      if (!f) throw ValidationError("'" + r.keyword + "': format() expects a format class");
      if (!valid_string(f->name)) throw ValidationError("'" + r.keyword + "': control character in format class");
      break;
    }
  }
}

void validate(const Specification& spec) {
  if (spec.rules.empty()) throw ValidationError("specification has no rules");
  if (spec.connectives.size() != spec.rules.size() - 1) {
    throw ValidationError("specification with " + std::to_string(spec.rules.size()) + " rules needs " +
                          std::to_string(spec.rules.size() - 1) + " connectives");
  }
  for (const auto& r : spec.rules) validate(r);
}

Specification parse_spec(std::string_view text) { return Parser(text).run(); }

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::string print_rule(const Rule& r) {
  switch (r.relation) {
    case Relation::Eq: return r.keyword + " == " + print_value(r.values[0]);
    case Relation::Neq: return r.keyword + " != " + print_value(r.values[0]);
    case Relation::Gt: return r.keyword + " > " + print_value(r.values[0]);
    case Relation::Lt: return r.keyword + " < " + print_value(r.values[0]);
    case Relation::Interval:
      return r.keyword + " in [" + print_value(r.values[0]) + ", " + print_value(r.values[1]) + "]";
    case Relation::SetMembership: {
      std::string s = r.keyword + " in {";
      for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (i) s += ", ";
        s += print_value(r.values[i]);
      }
      return s + "}";
    }
    case Relation::Use: return "use(" + r.keyword + ")";
    case Relation::Recommend: return "recommend(" + r.keyword + ")";
    case Relation::With: return "with(" + r.keyword + ", " + print_value(r.values[0]) + ")";
    case Relation::Prefer: return "prefer(" + r.keyword + ", " + print_value(r.values[0]) + ")";
    case Relation::StringFormat: return "format(" + r.keyword + ", " + print_value(r.values[0]) + ")";
  }
  return {};
}

std::string print_spec(const Specification& spec) {
  std::string out;
  for (std::size_t i = 0; i < spec.rules.size(); ++i) {
    if (i) {
      out += ' ';
      out += to_string(spec.connectives[i - 1]);
      out += ' ';
    }
    out += print_rule(spec.rules[i]);
  }
  return out;
}

Category category_of(Relation r) {
  switch (r) {
    case Relation::Use: return Category::Utilization;
    case Relation::With:
    case Relation::Prefer: return Category::Interrelation;
    case Relation::StringFormat: return Category::Attribute;
    case Relation::Recommend: return Category::Generic;
    default: return Category::Quantitative;
  }
}

Category infer_category(const Specification& spec) { return category_of(spec.rules.front().relation); }

Rule make_rule(std::string keyword, Relation relation, std::vector<Value> values) {
  return Rule{std::move(keyword), relation, std::move(values)};
}

Specification single(Rule rule) { return Specification{{std::move(rule)}, {}}; }

std::vector<SpecLine> parse_spec_file(std::string_view contents) {
  if (!text::is_valid_utf8(contents)) throw DecodeError("spec file is not valid UTF-8");
  std::vector<SpecLine> out;
  const auto lines = text::split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto t = text::trim(lines[i]);
    if (t.empty() || t.front() == '#') continue;
    try {
      out.push_back({parse_spec(t), i + 1});
    } catch (const Error& e) {
      throw Error("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace specsyn::dsl
