#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specsyn/corpus.hpp"
#include "specsyn/dsl.hpp"
#include "specsyn/model.hpp"
#include "specsyn/rng.hpp"
#include "specsyn/synthdata.hpp"
#include "specsyn/tagger.hpp"

namespace testing {

inline std::string data(const std::string& name) { return std::string(SPECSYN_DATA_DIR) + "/" + name; }

inline const specsyn::corpus::KeywordSet& keywords() {
  static const auto k = specsyn::corpus::KeywordSet::load(data("keywords.txt"));
  return k;
}

inline const specsyn::tagger::Lexicons& lexicons() {
  static const auto l = specsyn::tagger::Lexicons::load(data("lexicon"));
  return l;
}

inline const specsyn::synthdata::Composer& composer() {
  static const specsyn::synthdata::Composer c(keywords(), lexicons(),
                                              specsyn::synthdata::load_distractors(data("distractors.txt")),
                                              specsyn::synthdata::load_negatives(data("negatives.json")));
  return c;
}

inline const std::vector<specsyn::synthdata::SeedTemplate>& seeds() {
  static const auto s = specsyn::synthdata::load_seeds(data("seeds.json"));
  return s;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("specsyn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Small network over a toy vocabulary.
inline specsyn::model::ModelConfig tiny_config(int vocab_size) {
  specsyn::model::ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 16;
  c.layers = 1;
  c.heads = 4;
  c.max_len = 16;
  c.pooled = 16;
  return c;
}

inline std::vector<specsyn::model::Example> random_examples(int n, int vocab_size, std::uint64_t seed, int max_len = 12) {
  specsyn::Rng rng(seed);
  std::vector<specsyn::model::Example> out;
  for (int i = 0; i < n; ++i) {
    specsyn::model::Example ex;
    ex.input.push_back(specsyn::model::Vocab::kCls);
    const auto len = rng.uniform_int(2, max_len - 1);
    for (std::int64_t t = 0; t < len; ++t) ex.input.push_back(static_cast<int>(rng.uniform_int(5, vocab_size - 1)));
    ex.label = i % 2;
    if (ex.label) {
      for (int t = 0; t < 3; ++t) ex.target.push_back(static_cast<int>(rng.uniform_int(5, vocab_size - 1)));
      ex.category = i % 5;
    }
    out.push_back(std::move(ex));
  }
  return out;
}


inline std::string random_word(specsyn::Rng& rng, std::size_t min_len = 1) {
  static const std::string first = "abcdefghijklmnopqrstuvwxyz_";
  static const std::string rest = "abcdefghijklmnopqrstuvwxyz_0123456789";
  for (;;) {
    std::string w(1, first[rng.index(first.size())]);
    const auto len = rng.uniform_int(static_cast<std::int64_t>(min_len), 10);
    while (static_cast<std::int64_t>(w.size()) < len) w += rest[rng.index(rest.size())];
    if (specsyn::dsl::is_valid_keyword(w) && !specsyn::dsl::is_reserved_word(w) && w != "use" && w != "with" &&
        w != "prefer" && w != "format" && w != "recommend") {
      return w;
    }
  }
}

inline specsyn::dsl::Number random_number(specsyn::Rng& rng, const std::optional<std::string>& unit) {
  double v = static_cast<double>(rng.uniform_int(-100000, 100000));
  if (rng.bernoulli(0.3)) v += static_cast<double>(rng.uniform_int(1, 99)) / 100.0;
  return {v, unit};
}

inline std::optional<std::string> random_unit(specsyn::Rng& rng) {
  static const std::vector<std::string> units = {"mb", "kb", "gb", "seconds", "ms", "%", "bytes"};
  if (rng.bernoulli(0.5)) return std::nullopt;
  return units[rng.index(units.size())];
}

inline specsyn::dsl::Value random_scalar(specsyn::Rng& rng) {
  using namespace specsyn::dsl;
  switch (rng.index(4)) {
    case 0: return random_number(rng, random_unit(rng));
    case 1: return Boolean{rng.bernoulli(0.5)};
    case 2: return KeywordRef{random_word(rng)};
    default: return Text{random_word(rng) + " " + random_word(rng)};
  }
}

// Random valid specification; `relation` picks the first rule's relation.
inline specsyn::dsl::Specification random_spec(specsyn::Rng& rng, std::optional<specsyn::dsl::Relation> relation = {}) {
  using namespace specsyn::dsl;
  Specification s;
  const auto n = rng.uniform_int(1, 3);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rel = i == 0 && relation ? *relation : static_cast<Relation>(rng.index(kRelationCount));
    Rule r;
    r.keyword = random_word(rng);
    r.relation = rel;
    switch (rel) {
      case Relation::Eq:
      case Relation::Neq:
        r.values = {random_scalar(rng)};
        break;
      case Relation::Gt:
      case Relation::Lt:
        r.values = {random_number(rng, random_unit(rng))};
        break;
      case Relation::Interval: {
        const auto unit = random_unit(rng);
        auto a = random_number(rng, unit), b = random_number(rng, unit);
        if (b.magnitude < a.magnitude) std::swap(a, b);
        r.values = {a, b};
        break;
      }
      case Relation::SetMembership: {
        const auto k = rng.uniform_int(2, 4);
        for (std::int64_t j = 0; j < k; ++j) r.values.push_back(random_scalar(rng));
        break;
      }
      case Relation::Use:
      case Relation::Recommend:
        break;
      case Relation::With:
      case Relation::Prefer:
        r.values = {KeywordRef{random_word(rng)}};
        break;
      case Relation::StringFormat:
        r.values = {FormatClass{rng.bernoulli(0.5) ? "absolute path" : random_word(rng)}};
        break;
    }
    s.rules.push_back(std::move(r));
    if (i > 0) s.connectives.push_back(rng.bernoulli(0.5) ? Connective::And : Connective::Or);
  }
  return s;
}

}  // namespace testing
