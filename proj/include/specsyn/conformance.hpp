#pragma once

// Checks configuration files against specifications.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specsyn/dsl.hpp"
#include "specsyn/tagger.hpp"

namespace specsyn::conformance {

enum class ConfigFormat { KeyValue, Ini };

std::optional<ConfigFormat> config_format_from_string(std::string_view s);  // "kv" | "ini"

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;            // line the value came from
  std::vector<std::size_t> lines;  // every line that set the key
};

struct MalformedLine {
  std::size_t line = 0;
  std::string message;
};

class ConfigMap {
 public:
  const std::vector<ConfigEntry>& entries() const { return entries_; }
  // Lookup ignores ASCII case.
  const ConfigEntry* find(std::string_view key) const;
  void set(std::string key, std::string value, std::size_t line);

 private:
  std::vector<ConfigEntry> entries_;
};

struct ParsedConfig {
  ConfigMap map;
  std::vector<MalformedLine> errors;
};

// `key = value` or `key value` lines; `#` and `;` start comment lines. Ini
// files add `[section]` headers, flattened to `section.key`.
ParsedConfig parse_config(std::string_view text, ConfigFormat format);

enum class Verdict { ValueOutOfRange, WrongType, MissingKey, FormatMismatch, AdvisoryOnly };
std::string_view to_string(Verdict v);

struct Violation {
  std::size_t spec_index = 0;
  dsl::Rule rule;
  std::string key;
  std::optional<std::string> observed;
  std::optional<std::size_t> line;
  Verdict verdict = Verdict::ValueOutOfRange;
};

// Result of one rule: nullopt when satisfied.
std::optional<Violation> check_rule(const dsl::Rule& rule, const ConfigMap& config, const tagger::Lexicons& lexicons);

// `and` binds tighter than `or`; a specification is violated when every
// `or` alternative holds a hard violation. Advisory findings are always
// reported and count as satisfied.
std::vector<Violation> check(const ConfigMap& config, const std::vector<dsl::Specification>& specs,
                             const tagger::Lexicons& lexicons);

bool spec_violated(const dsl::Specification& spec, const ConfigMap& config, const tagger::Lexicons& lexicons);

// 0 when clean or advisory-only, 1 on any hard violation.
int exit_status(const std::vector<Violation>& violations);

// Syntactic checker for a format class; unknown classes accept anything.
bool matches_format(std::string_view format_class, std::string_view value);
bool known_format(std::string_view format_class);

std::string violations_json(const std::vector<Violation>& violations);
std::string violations_table(const std::vector<Violation>& violations);

}  // namespace specsyn::conformance
