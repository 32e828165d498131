#include "specsyn/synthdata.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <cmath>
#include <set>

#include <json.hpp>

#include "specsyn/text.hpp"

namespace specsyn::synthdata {

namespace {

using json = nlohmann::ordered_json;

constexpr int kMaxResample = 100;
constexpr std::int64_t kDefaultNumLo = 0;
constexpr std::int64_t kDefaultNumHi = 65535;

enum class SlotKind { Keyword, Num, Bool, Unit, Format, Version };

std::optional<SlotKind> slot_kind(std::string_view slot) {
  auto starts = [&](std::string_view p) {
    return slot.size() > p.size() && slot.compare(0, p.size(), p) == 0 &&
           std::all_of(slot.begin() + static_cast<std::ptrdiff_t>(p.size()), slot.end(), text::is_digit);
  };
  if (starts("kw")) return SlotKind::Keyword;
  if (starts("num")) return SlotKind::Num;
  if (starts("bool")) return SlotKind::Bool;
  if (starts("unit")) return SlotKind::Unit;
  if (starts("fmt")) return SlotKind::Format;
  if (starts("ver")) return SlotKind::Version;
  return std::nullopt;
}

tagger::TagClass tag_class(SlotKind k) {
  switch (k) {
    case SlotKind::Keyword: return tagger::TagClass::Keyword;
    case SlotKind::Bool: return tagger::TagClass::Bool;
    case SlotKind::Unit: return tagger::TagClass::Unit;
    case SlotKind::Format: return tagger::TagClass::Format;
    default: return tagger::TagClass::Num;
  }
}

// "{kw1}" → "kw1"; anything else → nullopt.
std::optional<std::string> placeholder(std::string_view token) {
  if (token.size() < 3 || token.front() != '{' || token.back() != '}') return std::nullopt;
  return std::string(token.substr(1, token.size() - 2));
}

std::string with_thousands(std::int64_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  const std::size_t n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

corpus::ExtractionType parse_type(const json& j, const std::string& where) {
  const auto t = corpus::extraction_type_from_string(j.get<std::string>());
  if (!t) throw Error(where + ": unknown extraction type '" + j.get<std::string>() + "'");
  return *t;
}

std::vector<std::string> string_list(const json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && text::is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !text::is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

json parse_json_file(const std::string& path) {
  const std::string raw = text::read_file(path);
  if (!text::is_valid_utf8(raw)) throw DecodeError(path + ": not valid UTF-8");
  try {
    return json::parse(raw);
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

// Largest-remainder apportionment of n over the given weights.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<std::size_t>& weights) {
  std::size_t total = 0;
  for (auto w : weights) total += w;
  std::vector<std::size_t> out(weights.size(), 0);
  if (total == 0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(n) * static_cast<double>(weights[i]) / static_cast<double>(total);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++out[rem[k % rem.size()].second];
  return out;
}

}  // namespace

std::vector<std::string> slots_in(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while ((i = s.find('{', i)) != std::string_view::npos) {
    const auto close = s.find('}', i);
    if (close == std::string_view::npos) break;
    std::string name(s.substr(i + 1, close - i - 1));
    if (slot_kind(name) && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    i = close + 1;
  }
  return out;
}

void validate(const SeedTemplate& seed) {
  const std::string where = "seed '" + seed.id + "'";
  if (seed.sentences.empty()) throw Error(where + ": no sentences");
  if (seed.target.empty()) throw Error(where + ": empty target");
  std::set<std::string> in_text;
  for (const auto& s : seed.sentences) {
    for (auto& slot : slots_in(s)) in_text.insert(slot);
  }
  std::set<std::string> in_target;
  for (const auto& tok : seed.target) {
    if (auto p = placeholder(tok)) {
      if (!slot_kind(*p)) throw Error(where + ": unknown slot {" + *p + "}");
      in_target.insert(*p);
    }
  }
  for (const auto& slot : in_text) {
    if (slot_kind(slot) == SlotKind::Version) throw Error(where + ": version slots are for negative templates only");
  }
  if (in_text != in_target) throw Error(where + ": template and target use different slots");
  const bool has_kw = std::any_of(in_text.begin(), in_text.end(),
                                  [](const std::string& s) { return slot_kind(s) == SlotKind::Keyword; });
  if (!has_kw) throw Error(where + ": template has no keyword slot");
}

std::vector<SeedTemplate> load_seeds(const std::string& path) {
  const json root = parse_json_file(path);
  std::vector<SeedTemplate> out;
  for (const auto& j : root) {
    SeedTemplate s;
    s.id = j.at("id").get<std::string>();
    const std::string where = path + ": seed '" + s.id + "'";
    s.type = parse_type(j.at("type"), where);
    const auto cat = dsl::category_from_string(j.at("category").get<std::string>());
    if (!cat) throw Error(where + ": unknown category");
    s.category = *cat;
    s.sentences = string_list(j.at("template"));
    for (auto& tok : split_ws(j.at("target").get<std::string>())) s.target.push_back(std::move(tok));
    if (j.contains("ranges")) {
      for (const auto& [slot, r] : j.at("ranges").items()) {
        s.ranges[slot] = {r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>()};
      }
    }
    if (j.contains("choices")) {
      for (const auto& [slot, c] : j.at("choices").items()) s.choices[slot] = c.get<std::vector<std::string>>();
    }
    validate(s);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw InsufficientSeeds(path + ": no seed templates");
  return out;
}

std::vector<NegativeTemplate> load_negatives(const std::string& path) {
  const json root = parse_json_file(path);
  std::vector<NegativeTemplate> out;
  for (const auto& j : root) {
    NegativeTemplate n;
    n.id = j.at("id").get<std::string>();
    n.type = parse_type(j.at("type"), path + ": negative '" + n.id + "'");
    n.sentences = string_list(j.at("template"));
    bool has_kw = false;
    for (const auto& s : n.sentences) {
      for (const auto& slot : slots_in(s)) has_kw |= slot_kind(slot) == SlotKind::Keyword;
    }
    if (!has_kw) throw Error(path + ": negative '" + n.id + "' has no keyword slot");
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<std::string> load_distractors(const std::string& path) {
  auto out = text::read_list_file(path);
  if (out.empty()) throw Error(path + ": distractor pool is empty");
  return out;
}

std::string concrete_spec(const SeedTemplate& seed, const SlotFillers& fillers, const tagger::Lexicons& lexicons) {
  std::string joined;
  for (const auto& tok : seed.target) {
    std::string piece = tok;
    if (auto p = placeholder(tok)) {
      const auto it = fillers.values.find(*p);
      if (it == fillers.values.end()) throw Error("seed '" + seed.id + "': no filler for {" + *p + "}");
      switch (*slot_kind(*p)) {
        case SlotKind::Num: piece = tagger::normalize_number(it->second); break;
        case SlotKind::Bool: {
          const auto v = lexicons.bool_value(it->second);
          if (!v) throw Error("seed '" + seed.id + "': '" + it->second + "' is not a boolean surface");
          piece = *v ? "true" : "false";
          break;
        }
        case SlotKind::Format: piece = "\"" + text::to_lower(it->second) + "\""; break;
        case SlotKind::Unit: piece = text::to_lower(it->second); break;
        default: piece = it->second; break;
      }
    }
    if (!joined.empty()) joined.push_back(' ');
    joined += piece;
  }
  return dsl::print_spec(dsl::parse_spec(joined));
}

Composer::Composer(const corpus::KeywordSet& keywords, tagger::Lexicons lexicons, std::vector<std::string> distractors,
                   std::vector<NegativeTemplate> negatives)
    : keywords_(&keywords),
      tagger_(keywords, std::move(lexicons)),
      distractors_(std::move(distractors)),
      negatives_(std::move(negatives)) {
  if (distractors_.empty()) throw Error("distractor pool is empty");
}

namespace {

SlotFillers draw_once(const std::vector<std::string>& slots, const SeedTemplate* seed, const corpus::KeywordSet& keywords,
                      const tagger::Lexicons& lex, Rng& rng) {
  SlotFillers f;
  std::vector<std::string> used_keywords;
  for (const auto& slot : slots) {
    const auto kind = *slot_kind(slot);
    if (seed) {
      if (auto c = seed->choices.find(slot); c != seed->choices.end() && !c->second.empty()) {
        f.values[slot] = c->second[rng.index(c->second.size())];
        continue;
      }
    }
    switch (kind) {
      case SlotKind::Keyword: {
        if (keywords.size() <= used_keywords.size()) throw SlotRangeError("not enough distinct keywords");
        std::string k;
        do {
          k = keywords.keywords()[rng.index(keywords.size())];
        } while (std::find(used_keywords.begin(), used_keywords.end(), k) != used_keywords.end());
        used_keywords.push_back(k);
        f.values[slot] = k;
        break;
      }
      case SlotKind::Num: {
        auto [lo, hi] = std::pair{kDefaultNumLo, kDefaultNumHi};
        if (seed) {
          if (auto r = seed->ranges.find(slot); r != seed->ranges.end()) std::tie(lo, hi) = r->second;
        }
        const std::int64_t v = rng.uniform_int(lo, hi);
        f.values[slot] = (v >= 1000 && rng.bernoulli(0.25)) ? with_thousands(v) : std::to_string(v);
        break;
      }
      case SlotKind::Bool: f.values[slot] = lex.bools[rng.index(lex.bools.size())].surface; break;
      case SlotKind::Unit: f.values[slot] = lex.units[rng.index(lex.units.size())]; break;
      case SlotKind::Format: f.values[slot] = lex.formats[rng.index(lex.formats.size())]; break;
      case SlotKind::Version:
        f.values[slot] = std::to_string(rng.uniform_int(1, 12)) + "." + std::to_string(rng.uniform_int(0, 9)) + "." +
                         std::to_string(rng.uniform_int(0, 40));
        break;
    }
  }
  return f;
}

std::vector<std::string> all_slots(const std::vector<std::string>& sentences) {
  std::vector<std::string> out;
  for (const auto& s : sentences) {
    for (auto& slot : slots_in(s)) {
      if (std::find(out.begin(), out.end(), slot) == out.end()) out.push_back(std::move(slot));
    }
  }
  return out;
}

}  // namespace

SlotFillers Composer::draw_fillers(const SeedTemplate& seed, Rng& rng) const {
  const auto slots = all_slots(seed.sentences);
  for (int attempt = 0; attempt < kMaxResample; ++attempt) {
    SlotFillers f = draw_once(slots, &seed, *keywords_, tagger_.lexicons(), rng);
    try {
      concrete_spec(seed, f, tagger_.lexicons());
      return f;
    } catch (const dsl::IntervalOrderError&) {
      continue;
    }
  }
  throw SlotRangeError("seed '" + seed.id + "': no valid slot assignment after " + std::to_string(kMaxResample) +
                       " draws");
}

std::string Composer::fill(std::string_view sentence, const SlotFillers& fillers) const {
  std::string out;
  std::size_t i = 0;
  while (i < sentence.size()) {
    if (sentence[i] == '{') {
      const auto close = sentence.find('}', i);
      if (close != std::string_view::npos) {
        const std::string name(sentence.substr(i + 1, close - i - 1));
        if (auto it = fillers.values.find(name); it != fillers.values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(sentence[i++]);
  }
  return out;
}

std::vector<std::string> Composer::surround(std::vector<std::string> block, Rng& rng) const {
  const std::size_t k = static_cast<std::size_t>(rng.uniform_int(0, std::min<std::int64_t>(2, static_cast<std::int64_t>(distractors_.size()))));
  std::vector<std::size_t> picks;
  while (picks.size() < k) {
    const std::size_t idx = rng.index(distractors_.size());
    if (std::find(picks.begin(), picks.end(), idx) == picks.end()) picks.push_back(idx);
  }
  const std::size_t at = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k)));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < at; ++i) out.push_back(distractors_[picks[i]]);
  for (auto& s : block) out.push_back(std::move(s));
  for (std::size_t i = at; i < k; ++i) out.push_back(distractors_[picks[i]]);
  return out;
}

LabeledSample Composer::compose_positive(const SeedTemplate& seed, std::uint64_t rng_seed) const {
  Rng rng(rng_seed);
  const SlotFillers fillers = draw_fillers(seed, rng);
  return compose_positive(seed, fillers, rng.next());
}

LabeledSample Composer::compose_positive(const SeedTemplate& seed, const SlotFillers& fillers,
                                         std::uint64_t rng_seed) const {
  Rng rng(rng_seed);
  std::vector<std::string> block;
  for (const auto& s : seed.sentences) block.push_back(fill(s, fillers));
  const auto sentences = surround(std::move(block), rng);

  corpus::CandidateText cand;
  for (const auto& s : sentences) {
    if (!cand.text.empty()) cand.text.push_back(' ');
    cand.text += s;
  }
  cand.source = "synthetic:" + seed.id;
  cand.type = seed.type;
  cand.keywords = keywords_->matched(cand.text);
  cand.sentence_count = sentences.size();

  LabeledSample out;
  out.candidate = tagger_.tag(cand);
  out.has_spec = true;
  out.category = seed.category;
  out.type = seed.type;
  out.template_id = seed.id;
  out.concrete_spec = concrete_spec(seed, fillers, tagger_.lexicons());
  for (const auto& tok : seed.target) {
    auto p = placeholder(tok);
    if (!p) {
      out.target.push_back(tok);
      continue;
    }
    const auto kind = *slot_kind(*p);
    std::string surface = fillers.values.at(*p);
    if (kind == SlotKind::Bool || kind == SlotKind::Unit || kind == SlotKind::Format) surface = text::to_lower(surface);
    const auto* e = out.candidate.tags.find_surface(tag_class(kind), surface);
    if (!e) {
      throw Error("seed '" + seed.id + "': filler '" + surface + "' for {" + *p + "} was not tagged as <" +
                  std::string(tagger::to_string(tag_class(kind))) + ">");
    }
    out.target.push_back(e->id.token());
  }
  return out;
}

LabeledSample Composer::compose_negative(corpus::ExtractionType type, std::uint64_t rng_seed) const {
  std::vector<const NegativeTemplate*> pool;
  for (const auto& n : negatives_) {
    if (n.type == type) pool.push_back(&n);
  }
  if (pool.empty()) {
    throw InsufficientSeeds("no negative template of type " + std::string(corpus::to_string(type)));
  }
  Rng rng(rng_seed);
  const NegativeTemplate& tpl = *pool[rng.index(pool.size())];
  const auto slots = all_slots(tpl.sentences);
  SlotFillers fillers = draw_once(slots, nullptr, *keywords_, tagger_.lexicons(), rng);
  // Page and section numbers stay small.
  for (const auto& slot : slots) {
    if (slot_kind(slot) == SlotKind::Num) fillers.values[slot] = std::to_string(rng.uniform_int(1, 999));
  }
  std::vector<std::string> block;
  for (const auto& s : tpl.sentences) block.push_back(fill(s, fillers));
  const auto sentences = surround(std::move(block), rng);

  corpus::CandidateText cand;
  for (const auto& s : sentences) {
    if (!cand.text.empty()) cand.text.push_back(' ');
    cand.text += s;
  }
  cand.source = "synthetic:" + tpl.id;
  cand.type = type;
  cand.keywords = keywords_->matched(cand.text);
  cand.sentence_count = sentences.size();

  LabeledSample out;
  out.candidate = tagger_.tag(cand);
  out.has_spec = false;
  out.type = type;
  out.template_id = tpl.id;
  return out;
}

LabeledSample Composer::compose_negative(std::uint64_t rng_seed) const {
  if (negatives_.empty()) throw InsufficientSeeds("no negative templates");
  Rng rng(rng_seed);
  const auto type = negatives_[rng.index(negatives_.size())].type;
  return compose_negative(type, rng.next());
}

namespace {

std::vector<LabeledSample> make_split(const Composer& composer, const std::vector<const SeedTemplate*>& seeds,
                                      std::size_t n, const DatasetConfig& cfg, std::uint64_t split_id) {
  std::vector<LabeledSample> out;
  if (n == 0) return out;
  if (seeds.empty()) throw InsufficientSeeds("no seed templates available for this split");

  std::array<std::vector<const SeedTemplate*>, corpus::kExtractionTypeCount> by_type;
  for (const auto* s : seeds) by_type[static_cast<std::size_t>(s->type)].push_back(s);
  std::vector<std::size_t> weights;
  for (const auto& v : by_type) weights.push_back(v.size());

  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.positive_fraction));
  const std::size_t n_neg = n - n_pos;
  const auto pos_alloc = apportion(n_pos, weights);
  const auto neg_alloc = apportion(n_neg, weights);

  for (std::size_t t = 0; t < corpus::kExtractionTypeCount; ++t) {
    if (neg_alloc[t] == 0) continue;
    const auto type = static_cast<corpus::ExtractionType>(t);
    const bool have = std::any_of(composer.negatives().begin(), composer.negatives().end(),
                                  [&](const NegativeTemplate& nt) { return nt.type == type; });
    if (!have) throw InsufficientSeeds("no negative template of type " + std::string(corpus::to_string(type)));
  }

  std::uint64_t index = 0;
  for (std::size_t t = 0; t < corpus::kExtractionTypeCount; ++t) {
    for (std::size_t j = 0; j < pos_alloc[t]; ++j, ++index) {
      const SeedTemplate& seed = *by_type[t][j % by_type[t].size()];
      out.push_back(composer.compose_positive(seed, derive_seed(cfg.rng_seed, {split_id, 0, index})));
    }
  }
  index = 0;
  for (std::size_t t = 0; t < corpus::kExtractionTypeCount; ++t) {
    for (std::size_t j = 0; j < neg_alloc[t]; ++j, ++index) {
      out.push_back(composer.compose_negative(static_cast<corpus::ExtractionType>(t),
                                              derive_seed(cfg.rng_seed, {split_id, 1, index})));
    }
  }
  Rng order(derive_seed(cfg.rng_seed, {split_id, 2}));
  order.shuffle(out);
  return out;
}

json counts_json(const SplitCounts& c) {
  json j;
  j["total"] = c.total;
  j["positive"] = c.positive;
  j["negative"] = c.negative;
  j["by_type"] = c.by_type;
  j["by_category"] = c.by_category;
  return j;
}

}  // namespace

Dataset build_dataset(const Composer& composer, const std::vector<SeedTemplate>& seeds, const DatasetConfig& cfg) {
  if (seeds.empty()) throw InsufficientSeeds("no seed templates");
  if (cfg.n_total < 10) throw Error("n_total must be at least 10");
  if (!(cfg.positive_fraction > 0.0 && cfg.positive_fraction < 1.0)) {
    throw Error("positive fraction must lie strictly between 0 and 1");
  }
  std::vector<const SeedTemplate*> train_seeds;
  std::vector<const SeedTemplate*> test_seeds;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const bool held_out = cfg.holdout_every > 0 && i % cfg.holdout_every == cfg.holdout_every - 1;
    if (!held_out) train_seeds.push_back(&seeds[i]);
    if (held_out || cfg.holdout_every == 0) test_seeds.push_back(&seeds[i]);
  }
  if (train_seeds.empty()) throw InsufficientSeeds("hold-out leaves no training seeds");
  Dataset d;
  d.train = make_split(composer, train_seeds, cfg.n_total, cfg, 0);
  d.test = make_split(composer, test_seeds, cfg.n_test, cfg, 1);
  return d;
}

SplitCounts count(const std::vector<LabeledSample>& samples) {
  SplitCounts c;
  for (const auto& s : samples) {
    ++c.total;
    ++(s.has_spec ? c.positive : c.negative);
    ++c.by_type[std::string(corpus::to_string(s.type))];
    if (s.has_spec && s.category) ++c.by_category[std::string(dsl::to_string(*s.category))];
  }
  return c;
}

std::string to_jsonl(const std::vector<LabeledSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    json j;
    j["text"] = s.candidate.text;
    json tags = json::object();
    for (const auto& e : s.candidate.tags.entries()) tags[e.id.name()] = e.surface;
    j["tags"] = std::move(tags);
    j["label"] = s.has_spec ? 1 : 0;
    j["target"] = s.target;
    j["category"] = s.category ? json(std::string(dsl::to_string(*s.category))) : json(nullptr);
    j["type"] = std::string(corpus::to_string(s.type));
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<LabeledSample> from_jsonl(std::string_view jsonl) {
  if (!text::is_valid_utf8(jsonl)) throw DecodeError("dataset is not valid UTF-8");
  std::vector<LabeledSample> out;
  const auto lines = text::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const std::string where = "dataset line " + std::to_string(i + 1);
    try {
      const json j = json::parse(lines[i]);
      LabeledSample s;
      s.candidate.text = j.at("text").get<std::string>();
      s.candidate.origin.text = s.candidate.text;
      for (const auto& [name, surface] : j.at("tags").items()) {
        const auto id = tagger::parse_tag_name(name);
        if (!id) throw Error(where + ": bad tag id '" + name + "'");
        s.candidate.tags.insert(*id, surface.get<std::string>());
      }
      s.has_spec = j.at("label").get<int>() != 0;
      s.target = j.at("target").get<std::vector<std::string>>();
      if (!j.at("category").is_null()) {
        s.category = dsl::category_from_string(j.at("category").get<std::string>());
        if (!s.category) throw Error(where + ": unknown category");
      }
      s.type = parse_type(j.at("type"), where);
      if (s.has_spec == s.target.empty()) throw Error(where + ": label and target disagree");
      s.candidate.origin.type = s.type;
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(where + ": " + e.what());
    }
  }
  return out;
}

std::string manifest_json(const Dataset& d, const DatasetConfig& cfg) {
  json j;
  j["rng_seed"] = cfg.rng_seed;
  j["n_train"] = d.train.size();
  j["n_test"] = d.test.size();
  j["positive_fraction"] = cfg.positive_fraction;
  j["positive_fraction_note"] = "assumed class ratio; source data gives no ratio";
  j["holdout_every"] = cfg.holdout_every;
  j["train"] = counts_json(count(d.train));
  j["test"] = counts_json(count(d.test));
  return j.dump(2) + "\n";
}

}  // namespace specsyn::synthdata
