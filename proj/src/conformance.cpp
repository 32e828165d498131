#include "specsyn/conformance.hpp"

#include <charconv>
#include <cstdio>

#include <json.hpp>

#include "specsyn/text.hpp"

namespace specsyn::conformance {

namespace {

bool iequals(std::string_view a, std::string_view b) { return text::to_lower(a) == text::to_lower(b); }

std::string_view unquote(std::string_view v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) return v.substr(1, v.size() - 2);
  return v;
}

struct ObservedNumber {
  double value = 0.0;
  std::string unit;
};

std::optional<ObservedNumber> coerce_number(std::string_view raw) {
  const std::string v = std::string(text::trim(unquote(text::trim(raw))));
  const std::size_t n = tagger::match_number(v, 0);
  if (n == 0) return std::nullopt;
  const std::string digits = tagger::normalize_number(std::string_view(v).substr(0, n));
  ObservedNumber out;
  const char* first = digits.data();
  const char* last = digits.data() + digits.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out.value);
  if (ec != std::errc() || ptr != last) return std::nullopt;  // dotted versions are not numbers
  out.unit = text::trim(std::string_view(v).substr(n));
  for (char c : out.unit) {
    if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '%')) return std::nullopt;
  }
  out.unit = text::to_lower(out.unit);
  return out;
}

std::optional<bool> coerce_bool(std::string_view raw, const tagger::Lexicons& lex) {
  return lex.bool_value(text::to_lower(text::trim(unquote(text::trim(raw)))));
}

// nullopt: the observed value cannot be read as the kind of `expected`.
std::optional<int> compare(const dsl::Value& expected, std::string_view observed, const tagger::Lexicons& lex) {
  if (const auto* num = std::get_if<dsl::Number>(&expected)) {
    auto o = coerce_number(observed);
    if (!o) return std::nullopt;
    if (num->unit && !o->unit.empty() && !iequals(*num->unit, o->unit)) return std::nullopt;
    return o->value < num->magnitude ? -1 : (o->value > num->magnitude ? 1 : 0);
  }
  if (const auto* b = std::get_if<dsl::Boolean>(&expected)) {
    auto o = coerce_bool(observed, lex);
    if (!o) return std::nullopt;
    return *o == b->value ? 0 : 1;
  }
  const std::string o = std::string(text::trim(unquote(text::trim(observed))));
  if (const auto* k = std::get_if<dsl::KeywordRef>(&expected)) return iequals(k->keyword, o) ? 0 : 1;
  if (const auto* t = std::get_if<dsl::Text>(&expected)) return t->text == o ? 0 : 1;
  return std::nullopt;
}

Violation make(const dsl::Rule& rule, const std::string& key, const ConfigEntry* e, Verdict v) {
  Violation out;
  out.rule = rule;
  out.key = key;
  if (e) {
    out.observed = e->value;
    out.line = e->line;
  }
  out.verdict = v;
  return out;
}

bool is_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!text::is_digit(c)) return false;
  }
  return true;
}

bool is_ipv4(std::string_view s) {
  int parts = 0;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = s.find('.', start);
    const std::string_view part = s.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (!is_digits(part) || part.size() > 3 || (part.size() > 1 && part[0] == '0') || std::stoi(std::string(part)) > 255) {
      return false;
    }
    ++parts;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts == 4;
}

bool is_ipv6(std::string_view s) {
  if (s.size() < 2) return false;
  const std::size_t dc = s.find("::");
  if (dc != std::string_view::npos && s.find("::", dc + 1) != std::string_view::npos) return false;
  int groups = 0;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t colon = s.find(':', start);
    const std::string_view g = s.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start);
    if (!g.empty()) {
      if (g.size() > 4) return false;
      for (char c : g) {
        if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
      }
      ++groups;
    }
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  return dc == std::string_view::npos ? groups == 8 : groups < 8;
}

bool is_domain(std::string_view s) {
  if (s.empty() || s.size() > 253) return false;
  if (s.back() == '.') s.remove_suffix(1);
  int labels = 0;
  std::string_view last;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = s.find('.', start);
    const std::string_view l = s.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (l.empty() || l.size() > 63 || l.front() == '-' || l.back() == '-') return false;
    for (char c : l) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-')) return false;
    }
    ++labels;
    last = l;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (labels < 2) return false;
  for (char c : last) {
    if (!std::isalpha(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

bool is_url(std::string_view s) {
  const std::size_t sep = s.find("://");
  if (sep == std::string_view::npos || sep == 0) return false;
  const std::string_view scheme = s.substr(0, sep);
  if (!std::isalpha(static_cast<unsigned char>(scheme[0]))) return false;
  for (char c : scheme) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '.' || c == '-')) return false;
  }
  std::string_view rest = s.substr(sep + 3);
  const std::size_t end = rest.find_first_of("/?#");
  std::string_view host = rest.substr(0, end);
  if (const std::size_t at = host.rfind('@'); at != std::string_view::npos) host = host.substr(at + 1);
  if (host.starts_with('[')) {
    const std::size_t close = host.find(']');
    return close != std::string_view::npos && is_ipv6(host.substr(1, close - 1));
  }
  if (const std::size_t colon = host.rfind(':'); colon != std::string_view::npos) {
    if (!is_digits(host.substr(colon + 1))) return false;
    host = host.substr(0, colon);
  }
  return host == "localhost" || is_ipv4(host) || is_domain(host);
}

bool has_space(std::string_view s) {
  for (char c : s) {
    if (text::is_space(c)) return true;
  }
  return false;
}

bool is_absolute_path(std::string_view s) {
  if (s.empty()) return false;
  if (s[0] == '/' || s[0] == '\\') return true;
  return s.size() >= 3 && std::isalpha(static_cast<unsigned char>(s[0])) && s[1] == ':' && (s[2] == '\\' || s[2] == '/');
}

}  // namespace

std::optional<ConfigFormat> config_format_from_string(std::string_view s) {
  if (s == "kv") return ConfigFormat::KeyValue;
  if (s == "ini") return ConfigFormat::Ini;
  return std::nullopt;
}

const ConfigEntry* ConfigMap::find(std::string_view key) const {
  for (const auto& e : entries_) {
    if (iequals(e.key, key)) return &e;
  }
  return nullptr;
}

void ConfigMap::set(std::string key, std::string value, std::size_t line) {
  for (auto& e : entries_) {
    if (iequals(e.key, key)) {
      e.value = std::move(value);
      e.line = line;
      e.lines.push_back(line);
      return;
    }
  }
  entries_.push_back({std::move(key), std::move(value), line, {line}});
}

ParsedConfig parse_config(std::string_view input, ConfigFormat format) {
  if (!text::is_valid_utf8(input)) throw DecodeError("configuration is not valid UTF-8");
  ParsedConfig out;
  std::string section;
  const auto lines = text::split_lines(input);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t no = i + 1;
    const std::string line = std::string(text::trim(lines[i]));
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      if (format != ConfigFormat::Ini) {
        out.errors.push_back({no, "section header in a key-value file"});
      } else if (line.back() != ']' || text::trim(std::string_view(line).substr(1, line.size() - 2)).empty()) {
        out.errors.push_back({no, "malformed section header"});
      } else {
        section = text::trim(std::string_view(line).substr(1, line.size() - 2));
      }
      continue;
    }
    std::string key, value;
    if (const std::size_t eq = line.find('='); eq != std::string::npos) {
      key = text::trim(std::string_view(line).substr(0, eq));
      value = text::trim(std::string_view(line).substr(eq + 1));
    } else {
      std::size_t sp = 0;
      while (sp < line.size() && !text::is_space(line[sp])) ++sp;
      key = line.substr(0, sp);
      value = text::trim(std::string_view(line).substr(sp));
    }
    if (key.empty() || has_space(key)) {
      out.errors.push_back({no, "expected 'key = value' or 'key value'"});
      continue;
    }
    if (format == ConfigFormat::Ini && !section.empty()) key = section + "." + key;
    out.map.set(std::move(key), std::move(value), no);
  }
  return out;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::ValueOutOfRange: return "ValueOutOfRange";
    case Verdict::WrongType: return "WrongType";
    case Verdict::MissingKey: return "MissingKey";
    case Verdict::FormatMismatch: return "FormatMismatch";
    case Verdict::AdvisoryOnly: return "AdvisoryOnly";
  }
  return "?";
}

bool known_format(std::string_view f) {
  for (const char* k : {"absolute path", "relative path", "email address", "email", "domain name", "domain", "url",
                        "ip address", "ip"}) {
    if (f == k) return true;
  }
  return false;
}

bool matches_format(std::string_view f, std::string_view raw) {
  const std::string v = std::string(text::trim(unquote(text::trim(raw))));
  if (f == "absolute path") return is_absolute_path(v);
  if (f == "relative path") return !v.empty() && !is_absolute_path(v) && v.find("://") == std::string::npos;
  if (f == "email address" || f == "email") {
    const std::size_t at = v.find('@');
    return at != std::string::npos && v.find('@', at + 1) == std::string::npos && at > 0 && at + 1 < v.size() &&
           !has_space(v);
  }
  if (f == "domain name" || f == "domain") return is_domain(v);
  if (f == "url") return is_url(v);
  if (f == "ip address" || f == "ip") return is_ipv4(v) || is_ipv6(v);
  return true;
}

std::optional<Violation> check_rule(const dsl::Rule& rule, const ConfigMap& config, const tagger::Lexicons& lex) {
  using dsl::Relation;
  const ConfigEntry* e = config.find(rule.keyword);
  switch (rule.relation) {
    case Relation::Use:
    case Relation::Recommend:
      if (!e) return make(rule, rule.keyword, nullptr, Verdict::AdvisoryOnly);
      return std::nullopt;
    case Relation::With:
    case Relation::Prefer: {
      const auto& other = std::get<dsl::KeywordRef>(rule.values.at(0)).keyword;
      const ConfigEntry* o = config.find(other);
      if (!e || o) return std::nullopt;
      return make(rule, other, nullptr, rule.relation == Relation::With ? Verdict::MissingKey : Verdict::AdvisoryOnly);
    }
    case Relation::StringFormat: {
      if (!e) return std::nullopt;
      const auto& f = std::get<dsl::FormatClass>(rule.values.at(0)).name;
      if (matches_format(f, e->value)) return std::nullopt;
      return make(rule, rule.keyword, e, Verdict::FormatMismatch);
    }
    default: break;
  }
  if (!e) return make(rule, rule.keyword, nullptr, Verdict::MissingKey);
  auto bad = [&](Verdict v) { return std::optional<Violation>(make(rule, rule.keyword, e, v)); };
  switch (rule.relation) {
    case Relation::Eq:
    case Relation::Neq:
    case Relation::Gt:
    case Relation::Lt: {
      const auto c = compare(rule.values.at(0), e->value, lex);
      if (!c) return bad(Verdict::WrongType);
      const bool ok = rule.relation == Relation::Eq    ? *c == 0
                      : rule.relation == Relation::Neq ? *c != 0
                      : rule.relation == Relation::Gt  ? *c > 0
                                                       : *c < 0;
      return ok ? std::nullopt : bad(Verdict::ValueOutOfRange);
    }
    case Relation::Interval: {
      const auto lo = compare(rule.values.at(0), e->value, lex);
      const auto hi = compare(rule.values.at(1), e->value, lex);
      if (!lo || !hi) return bad(Verdict::WrongType);
      return *lo >= 0 && *hi <= 0 ? std::nullopt : bad(Verdict::ValueOutOfRange);
    }
    case Relation::SetMembership: {
      bool any_readable = false;
      for (const auto& v : rule.values) {
        const auto c = compare(v, e->value, lex);
        if (!c) continue;
        any_readable = true;
        if (*c == 0) return std::nullopt;
      }
      return bad(any_readable ? Verdict::ValueOutOfRange : Verdict::WrongType);
    }
    default: break;
  }
  return std::nullopt;
}

namespace {

struct SpecResult {
  bool violated = false;
  std::vector<Violation> findings;
};

SpecResult evaluate_spec(const dsl::Specification& spec, const ConfigMap& config, const tagger::Lexicons& lex) {
  SpecResult r;
  std::vector<Violation> hard;
  bool all_groups_violated = true;
  bool group_violated = false;
  for (std::size_t i = 0; i < spec.rules.size(); ++i) {
    if (auto v = check_rule(spec.rules[i], config, lex)) {
      if (v->verdict == Verdict::AdvisoryOnly) {
        r.findings.push_back(std::move(*v));
      } else {
        group_violated = true;
        hard.push_back(std::move(*v));
      }
    }
    const bool group_ends = i + 1 == spec.rules.size() || spec.connectives[i] == dsl::Connective::Or;
    if (group_ends) {
      all_groups_violated = all_groups_violated && group_violated;
      group_violated = false;
    }
  }
  r.violated = all_groups_violated;
  if (r.violated) r.findings.insert(r.findings.end(), hard.begin(), hard.end());
  return r;
}

}  // namespace

bool spec_violated(const dsl::Specification& spec, const ConfigMap& config, const tagger::Lexicons& lexicons) {
  return evaluate_spec(spec, config, lexicons).violated;
}

std::vector<Violation> check(const ConfigMap& config, const std::vector<dsl::Specification>& specs,
                             const tagger::Lexicons& lexicons) {
  std::vector<Violation> out;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    auto r = evaluate_spec(specs[s], config, lexicons);
    for (auto& v : r.findings) {
      v.spec_index = s;
      out.push_back(std::move(v));
    }
  }
  return out;
}

int exit_status(const std::vector<Violation>& violations) {
  for (const auto& v : violations) {
    if (v.verdict != Verdict::AdvisoryOnly) return 1;
  }
  return 0;
}

std::string violations_json(const std::vector<Violation>& violations) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& v : violations) {
    nlohmann::ordered_json j;
    j["spec"] = v.spec_index;
    j["rule"] = dsl::print_rule(v.rule);
    j["key"] = v.key;
    j["observed"] = v.observed ? nlohmann::ordered_json(*v.observed) : nlohmann::ordered_json(nullptr);
    j["line"] = v.line ? nlohmann::ordered_json(*v.line) : nlohmann::ordered_json(nullptr);
    j["verdict"] = std::string(to_string(v.verdict));
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string violations_table(const std::vector<Violation>& violations) {
  std::string out;
  char buf[512];
  for (const auto& v : violations) {
    std::snprintf(buf, sizeof buf, "%-16s %-24s line %-5s observed %-12s rule %s\n",
                  std::string(to_string(v.verdict)).c_str(), v.key.c_str(),
                  v.line ? std::to_string(*v.line).c_str() : "-", v.observed ? v.observed->c_str() : "-",
                  dsl::print_rule(v.rule).c_str());
    out += buf;
  }
  return out;
}

}  // namespace specsyn::conformance
