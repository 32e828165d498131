#include "specsyn/tagger.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>

#include "specsyn/dsl.hpp"
#include "specsyn/text.hpp"

namespace specsyn::tagger {

namespace {

constexpr std::array<std::string_view, kTagClassCount> kClassNames = {"bool", "num", "unit", "keyword", "format"};

// Precedence when two classes match the same length.
constexpr std::array<TagClass, kTagClassCount> kPrecedence = {TagClass::Keyword, TagClass::Format, TagClass::Num,
                                                              TagClass::Unit, TagClass::Bool};

std::size_t match_phrase(std::string_view lowered, std::size_t pos, std::string_view phrase, bool need_left_boundary) {
  if (phrase.empty() || lowered.compare(pos, phrase.size(), phrase) != 0) return 0;
  const std::size_t end = pos + phrase.size();
  if (need_left_boundary) {
    if (!corpus::at_word_boundary(lowered, pos, end)) return 0;
  } else if (end < lowered.size() && text::is_word_char(lowered[end - 1]) && text::is_word_char(lowered[end])) {
    return 0;
  }
  return phrase.size();
}

}  // namespace

std::string_view to_string(TagClass c) { return kClassNames[static_cast<std::size_t>(c)]; }

std::string TagId::name() const { return std::string(to_string(cls)) + std::to_string(index); }
std::string TagId::token() const { return "<" + name() + ">"; }

std::optional<TagId> parse_tag_name(std::string_view name) {
  for (std::size_t c = 0; c < kClassNames.size(); ++c) {
    const auto cls = kClassNames[c];
    if (name.size() <= cls.size() || name.compare(0, cls.size(), cls) != 0) continue;
    const std::string_view digits = name.substr(cls.size());
    if (digits.front() == '0') continue;
    int idx = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || idx < 1) continue;
    return TagId{static_cast<TagClass>(c), idx};
  }
  return std::nullopt;
}

std::optional<TagId> parse_tag_token(std::string_view token) {
  if (token.size() < 3 || token.front() != '<' || token.back() != '>') return std::nullopt;
  return parse_tag_name(token.substr(1, token.size() - 2));
}

const TagEntry* TagMap::find(const TagId& id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const TagEntry* TagMap::find_surface(TagClass cls, std::string_view surface) const {
  for (const auto& e : entries_) {
    if (e.id.cls == cls && e.surface == surface) return &e;
  }
  return nullptr;
}

TagId TagMap::intern(TagClass cls, std::string_view surface) {
  if (const auto* e = find_surface(cls, surface)) return e->id;
  int next = 1;
  for (const auto& e : entries_) {
    if (e.id.cls == cls) next = std::max(next, e.id.index + 1);
  }
  entries_.push_back({TagId{cls, next}, std::string(surface)});
  return entries_.back().id;
}

void TagMap::insert(TagId id, std::string surface) {
  if (find(id)) throw Error("duplicate tag id " + id.name());
  entries_.push_back({id, std::move(surface)});
}

std::string Lexicons::default_dir() {
  if (const char* env = std::getenv("SPECSYN_LEXICON_DIR"); env && *env) return env;
  return std::string(SPECSYN_DATA_DIR) + "/lexicon";
}

Lexicons Lexicons::load(const std::string& dir) {
  Lexicons lex;
  for (const auto& line : text::read_list_file(dir + "/bool.lex")) {
    // "<surface> <true|false>"
    const auto sp = line.find_last_of(" \t");
    if (sp == std::string::npos) throw Error(dir + "/bool.lex: missing polarity on '" + line + "'");
    const auto value = text::trim(std::string_view(line).substr(sp + 1));
    if (value != "true" && value != "false") throw Error(dir + "/bool.lex: bad polarity on '" + line + "'");
    lex.bools.push_back({text::to_lower(text::trim(std::string_view(line).substr(0, sp))), value == "true"});
  }
  for (const auto& line : text::read_list_file(dir + "/unit.lex")) lex.units.push_back(text::to_lower(line));
  for (const auto& line : text::read_list_file(dir + "/format.lex")) {
    lex.formats.push_back(text::collapse_whitespace(text::to_lower(line)));
  }
  auto longest_first = [](auto& v, auto key) {
    std::stable_sort(v.begin(), v.end(), [&](const auto& a, const auto& b) { return key(a).size() > key(b).size(); });
  };
  longest_first(lex.bools, [](const BoolSurface& b) -> const std::string& { return b.surface; });
  longest_first(lex.units, [](const std::string& s) -> const std::string& { return s; });
  longest_first(lex.formats, [](const std::string& s) -> const std::string& { return s; });
  return lex;
}

std::optional<bool> Lexicons::bool_value(std::string_view surface) const {
  const std::string lowered = text::to_lower(surface);
  for (const auto& b : bools) {
    if (b.surface == lowered) return b.value;
  }
  return std::nullopt;
}

std::size_t match_number(std::string_view t, std::size_t pos) {
  if (pos >= t.size()) return 0;
  if (pos > 0 && (text::is_word_char(t[pos - 1]) || t[pos - 1] == '.')) return 0;
  std::size_t i = pos;
  if (t[i] == '-') {
    const bool sign_ok = pos == 0 || text::is_space(t[pos - 1]) || t[pos - 1] == '(' || t[pos - 1] == '[';
    if (!sign_ok) return 0;
    ++i;
  }
  if (i >= t.size() || !text::is_digit(t[i])) return 0;
  const std::size_t digits_start = i;
  while (i < t.size() && text::is_digit(t[i])) ++i;
  // Thousands separators: 1-3 leading digits then one or more ",ddd" groups.
  if (i - digits_start <= 3) {
    std::size_t j = i;
    std::size_t groups = 0;
    while (j + 3 < t.size() && t[j] == ',' && text::is_digit(t[j + 1]) && text::is_digit(t[j + 2]) &&
           text::is_digit(t[j + 3]) && (j + 4 >= t.size() || !text::is_digit(t[j + 4]))) {
      j += 4;
      ++groups;
    }
    if (groups > 0) i = j;
  }
  // Decimal part and dotted version tails ("11.7.8").
  while (i + 1 < t.size() && t[i] == '.' && text::is_digit(t[i + 1])) {
    ++i;
    while (i < t.size() && text::is_digit(t[i])) ++i;
  }
  return i - pos;
}

std::string normalize_number(std::string_view surface) {
  std::string out;
  for (char c : surface) {
    if (c != ',') out.push_back(c);
  }
  return out;
}

Tagger::Tagger(const corpus::KeywordSet& keywords, Lexicons lexicons)
    : keywords_(&keywords), lexicons_(std::move(lexicons)) {}

Tagger::Match Tagger::best_match(std::string_view original, std::string_view lowered, std::size_t pos,
                                 bool unit_follows_number) const {
  std::array<Match, kTagClassCount> found{};
  auto set = [&](TagClass cls, std::size_t len, std::string surface) {
    auto& m = found[static_cast<std::size_t>(cls)];
    if (len > m.length) m = Match{len, cls, std::move(surface)};
  };

  std::string kw;
  if (std::size_t len = keywords_->match_at(lowered, pos, &kw)) set(TagClass::Keyword, len, kw);

  for (const auto& f : lexicons_.formats) {
    if (std::size_t len = match_phrase(lowered, pos, f, true)) {
      set(TagClass::Format, len, f);
      break;
    }
  }

  if (std::size_t len = match_number(lowered, pos)) {
    const std::size_t end = pos + len;
    bool ok = end >= lowered.size() || !text::is_word_char(lowered[end]);
    if (!ok) {
      for (const auto& u : lexicons_.units) {
        if (match_phrase(lowered, end, u, false)) {
          ok = true;
          break;
        }
      }
    }
    if (ok) set(TagClass::Num, len, std::string(original.substr(pos, len)));
  }

  for (const auto& u : lexicons_.units) {
    if (std::size_t len = match_phrase(lowered, pos, u, !unit_follows_number)) {
      set(TagClass::Unit, len, u);
      break;
    }
  }

  for (const auto& b : lexicons_.bools) {
    if (std::size_t len = match_phrase(lowered, pos, b.surface, true)) {
      set(TagClass::Bool, len, b.surface);
      break;
    }
  }

  Match best;
  for (TagClass cls : kPrecedence) {
    const auto& m = found[static_cast<std::size_t>(cls)];
    if (m.length > best.length) best = m;
  }
  return best;
}

TaggedCandidate Tagger::tag(const corpus::CandidateText& candidate) const {
  TaggedCandidate out;
  out.origin = candidate;
  const std::string& original = candidate.text;
  const std::string lowered = text::to_lower(original);
  std::size_t unit_slot = std::string::npos;  // position right after a number
  std::size_t i = 0;
  while (i < lowered.size()) {
    const bool mid_word = i > 0 && text::is_word_char(lowered[i]) && text::is_word_char(lowered[i - 1]);
    if (!mid_word || i == unit_slot) {
      Match m = best_match(original, lowered, i, i == unit_slot);
      if (m.length > 0) {
        out.text += out.tags.intern(m.cls, m.surface).token();
        i += m.length;
        unit_slot = m.cls == TagClass::Num ? i : std::string::npos;
        continue;
      }
    }
    out.text.push_back(lowered[i]);
    ++i;
  }
  return out;
}

TaggedCandidate Tagger::tag_text(std::string_view t) const {
  corpus::CandidateText c;
  c.text = std::string(t);
  c.keywords = keywords_->matched(t);
  return tag(c);
}

std::string detag(const std::vector<std::string>& tokens, const TagMap& tags, const Lexicons& lexicons) {
  std::string joined;
  for (const auto& tok : tokens) {
    std::string piece = tok;
    if (auto id = parse_tag_token(tok)) {
      const TagEntry* e = tags.find(*id);
      if (!e) throw UnknownTagError("tag " + tok + " has no entry in the tag map");
      switch (id->cls) {
        case TagClass::Num:
          piece = normalize_number(e->surface);
          break;
        case TagClass::Bool: {
          const auto v = lexicons.bool_value(e->surface);
          if (!v) throw NonParsingOutput("boolean surface '" + e->surface + "' is not in the bool lexicon");
          piece = *v ? "true" : "false";
          break;
        }
        case TagClass::Format: {
          piece = "\"";
          for (char c : e->surface) {
            if (c == '"' || c == '\\') piece.push_back('\\');
            piece.push_back(c);
          }
          piece += "\"";
          break;
        }
        case TagClass::Keyword:
        case TagClass::Unit:
          piece = e->surface;
          break;
      }
    }
    if (!joined.empty()) joined.push_back(' ');
    joined += piece;
  }
  try {
    return dsl::print_spec(dsl::parse_spec(joined));
  } catch (const Error& e) {
    throw NonParsingOutput("reconstructed '" + joined + "' does not parse: " + e.what());
  }
}

std::vector<std::string> tokenize(std::string_view t) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto wordish = [](char c) { return text::is_word_char(c) || (static_cast<unsigned char>(c) & 0x80); };
  while (i < t.size()) {
    const char c = t[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    if (c == '<') {
      const auto close = t.find('>', i);
      if (close != std::string_view::npos && parse_tag_token(t.substr(i, close - i + 1))) {
        out.emplace_back(t.substr(i, close - i + 1));
        i = close + 1;
        continue;
      }
    }
    if (wordish(c)) {
      std::size_t j = i;
      while (j < t.size() && wordish(t[j])) ++j;
      out.emplace_back(t.substr(i, j - i));
      i = j;
      continue;
    }
    out.emplace_back(1, c);
    ++i;
  }
  return out;
}

}  // namespace specsyn::tagger
