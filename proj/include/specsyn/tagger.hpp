#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specsyn/corpus.hpp"
#include "specsyn/error.hpp"

namespace specsyn::tagger {

enum class TagClass { Bool, Num, Unit, Keyword, Format };
inline constexpr std::size_t kTagClassCount = 5;

std::string_view to_string(TagClass c);

struct TagId {
  TagClass cls = TagClass::Num;
  int index = 1;  // 1-based within the class
  std::string token() const;  // "<num1>"
  std::string name() const;   // "num1"
  friend bool operator==(const TagId&, const TagId&) = default;
};

// Parses "<num1>" into a TagId; nullopt for any other token.
std::optional<TagId> parse_tag_token(std::string_view token);
// Parses "num1".
std::optional<TagId> parse_tag_name(std::string_view name);

struct TagEntry {
  TagId id;
  std::string surface;
};

// Tag id → surface string, in order of first occurrence in the text.
class TagMap {
 public:
  const std::vector<TagEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  const TagEntry* find(const TagId& id) const;
  // Existing id for (class, surface), or nullptr.
  const TagEntry* find_surface(TagClass cls, std::string_view surface) const;
  // Returns the id for (class, surface), allocating the next index if new.
  TagId intern(TagClass cls, std::string_view surface);
  // Appends an entry verbatim (used when reading datasets); the id must be new.
  void insert(TagId id, std::string surface);

  friend bool operator==(const TagMap&, const TagMap&) = default;

 private:
  std::vector<TagEntry> entries_;
};

// Surface lexicons for the <bool>, <unit> and <format> classes, loaded from
// `bool.lex`, `unit.lex` and `format.lex` in one directory.
struct Lexicons {
  struct BoolSurface {
    std::string surface;
    bool value = false;
  };
  std::vector<BoolSurface> bools;
  std::vector<std::string> units;
  std::vector<std::string> formats;

  static Lexicons load(const std::string& dir);
  // $SPECSYN_LEXICON_DIR if set, otherwise the shipped data/lexicon.
  static std::string default_dir();
  static Lexicons load_default() { return load(default_dir()); }

  std::optional<bool> bool_value(std::string_view surface) const;
};

struct TaggedCandidate {
  std::string text;  // C
  TagMap tags;       // T
  corpus::CandidateText origin;
};

class UnknownTagError : public Error {
 public:
  using Error::Error;
};

class NonParsingOutput : public Error {
 public:
  using Error::Error;
};

class Tagger {
 public:
  Tagger(const corpus::KeywordSet& keywords, Lexicons lexicons);

  TaggedCandidate tag(const corpus::CandidateText& candidate) const;
  // Tags free text (the origin is filled with the text itself).
  TaggedCandidate tag_text(std::string_view text) const;

  const Lexicons& lexicons() const { return lexicons_; }
  const corpus::KeywordSet& keywords() const { return *keywords_; }

 private:
  struct Match {
    std::size_t length = 0;
    TagClass cls = TagClass::Num;
    std::string surface;
  };
  Match best_match(std::string_view original, std::string_view lowered, std::size_t pos, bool unit_follows_number) const;

  const corpus::KeywordSet* keywords_;
  Lexicons lexicons_;
};

// Length of the number at `pos` of `text` (0 if none). Integers and decimals
// with optional sign, thousands separators and dotted version tails.
std::size_t match_number(std::string_view text, std::size_t pos);

// Strips thousands separators: "10,240" → "10240".
std::string normalize_number(std::string_view surface);

// Replaces tag tokens by their surfaces and returns the canonical DSL text.
std::string detag(const std::vector<std::string>& tokens, const TagMap& tags, const Lexicons& lexicons);

// Splits tagged text into model tokens: tag atoms, [a-z0-9_] runs, and single
// punctuation characters.
std::vector<std::string> tokenize(std::string_view tagged_text);

}  // namespace specsyn::tagger
