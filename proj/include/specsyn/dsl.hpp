#pragma once

// Specification rule language.
//
// A specification is a non-empty list of rules joined by `and` / `or`
// connectives. Each rule constrains one configuration keyword:
//
//   rule := KEY op value                      op ∈ {==, !=, >, <}
//         | KEY "in" "[" value "," value "]"   closed interval
//         | KEY "in" "{" value ("," value)+ "}"
//         | "use(" KEY ")" | "recommend(" KEY ")"
//         | "with(" KEY "," KEY ")" | "prefer(" KEY "," KEY ")"
//         | "format(" KEY "," STRING ")"
//   spec := rule (("and" | "or") rule)*
//
// Values are numbers with an optional unit token (`64 mb`, `80 %`), the
// literals `true` / `false`, bare keyword references, or double-quoted text.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "specsyn/error.hpp"

namespace specsyn::dsl {

enum class Relation {
  Eq,
  Neq,
  Gt,
  Lt,
  Interval,
  SetMembership,
  Use,
  With,
  Prefer,
  StringFormat,
  Recommend,
};
inline constexpr std::size_t kRelationCount = 11;

enum class Connective { And, Or };

enum class Category { Quantitative, Utilization, Interrelation, Attribute, Generic };
inline constexpr std::size_t kCategoryCount = 5;

std::string_view to_string(Relation r);
std::string_view to_string(Connective c);
std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);

struct Number {
  double magnitude = 0.0;
  std::optional<std::string> unit;
  friend bool operator==(const Number&, const Number&) = default;
};

struct Boolean {
  bool value = false;
  friend bool operator==(const Boolean&, const Boolean&) = default;
};

struct KeywordRef {
  std::string keyword;
  friend bool operator==(const KeywordRef&, const KeywordRef&) = default;
};

struct FormatClass {
  std::string name;
  friend bool operator==(const FormatClass&, const FormatClass&) = default;
};

struct Text {
  std::string text;
  friend bool operator==(const Text&, const Text&) = default;
};

using Value = std::variant<Number, Boolean, KeywordRef, FormatClass, Text>;

struct Rule {
  std::string keyword;
  Relation relation = Relation::Eq;
  std::vector<Value> values;
  friend bool operator==(const Rule&, const Rule&) = default;
};

struct Specification {
  std::vector<Rule> rules;
  std::vector<Connective> connectives;  // rules.size() - 1 entries
  friend bool operator==(const Specification&, const Specification&) = default;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::vector<std::string> expected, const std::string& found);
  std::size_t position() const { return position_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::vector<std::string> expected_;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

class IntervalOrderError : public Error {
 public:
  using Error::Error;
};

// Interval bounds carry different units.
class UnitMismatchError : public Error {
 public:
  using Error::Error;
};

// Any other structural invariant (empty keyword, wrong value kind, bad
// connective count, non-finite number).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Throws one of the errors above when `spec` breaks a type invariant.
void validate(const Specification& spec);
void validate(const Rule& rule);

// True for identifiers usable as KEY / unit / keyword-reference tokens.
bool is_valid_keyword(std::string_view s);
bool is_reserved_word(std::string_view s);

Specification parse_spec(std::string_view text);
std::string print_spec(const Specification& spec);
std::string print_rule(const Rule& rule);
std::string format_number(double v);

// Structural mapping from relation to category; multi-rule specifications
// take the category of their first rule.
Category infer_category(const Specification& spec);
Category category_of(Relation r);

// Convenience constructors used throughout tests and the synthesizer.
Rule make_rule(std::string keyword, Relation relation, std::vector<Value> values = {});
Specification single(Rule rule);

// One entry of a `.spec` file: the parsed specification and its 1-based line.
struct SpecLine {
  Specification spec;
  std::size_t line = 0;
};

// Parses a spec file: one specification per line, `#` comment lines and
// blank lines ignored. Errors are rethrown with the line number prefixed.
std::vector<SpecLine> parse_spec_file(std::string_view contents);

}  // namespace specsyn::dsl
