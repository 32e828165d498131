#pragma once

// Composition of labeled training samples: seed specification templates are
// instantiated with random slot fillers and embedded among distractor
// sentences; keyword-bearing non-specification templates provide negatives.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specsyn/corpus.hpp"
#include "specsyn/dsl.hpp"
#include "specsyn/error.hpp"
#include "specsyn/rng.hpp"
#include "specsyn/tagger.hpp"

namespace specsyn::synthdata {

// Slot names are `kw<N>`, `num<N>`, `bool<N>`, `unit<N>`, `fmt<N>` and, in
// negative templates only, `ver<N>` (dotted version strings).
struct SeedTemplate {
  std::string id;
  corpus::ExtractionType type = corpus::ExtractionType::Simple;
  dsl::Category category = dsl::Category::Quantitative;
  std::vector<std::string> sentences;  // with {slot} placeholders
  std::vector<std::string> target;     // DSL tokens with {slot} placeholders
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> ranges;  // num slot → [lo, hi]
  std::map<std::string, std::vector<std::string>> choices;              // slot → allowed fillers
};

struct NegativeTemplate {
  std::string id;
  corpus::ExtractionType type = corpus::ExtractionType::Simple;
  std::vector<std::string> sentences;
};

class SlotRangeError : public Error {
 public:
  using Error::Error;
};

class InsufficientSeeds : public Error {
 public:
  using Error::Error;
};

// Placeholders used in `s`, in order of first appearance.
std::vector<std::string> slots_in(std::string_view s);

// Throws Error when the template breaks its invariants (slot sets differ,
// no keyword slot, unknown slot kinds).
void validate(const SeedTemplate& seed);

std::vector<SeedTemplate> load_seeds(const std::string& path);
std::vector<NegativeTemplate> load_negatives(const std::string& path);
std::vector<std::string> load_distractors(const std::string& path);

struct LabeledSample {
  tagger::TaggedCandidate candidate;
  bool has_spec = false;
  std::vector<std::string> target;  // tagged DSL tokens; empty iff !has_spec
  std::optional<dsl::Category> category;
  corpus::ExtractionType type = corpus::ExtractionType::Simple;
  std::string template_id;
  std::string concrete_spec;  // canonical DSL computed straight from the fillers
};

struct SlotFillers {
  std::map<std::string, std::string> values;  // slot → surface text
};

// Canonical DSL encoded by `seed` under `fillers`, built without the tagger.
std::string concrete_spec(const SeedTemplate& seed, const SlotFillers& fillers, const tagger::Lexicons& lexicons);

class Composer {
 public:
  Composer(const corpus::KeywordSet& keywords, tagger::Lexicons lexicons, std::vector<std::string> distractors,
           std::vector<NegativeTemplate> negatives);

  // Draws fillers for every slot of `seed`, retrying up to 100 times when an
  // interval slot pair comes out of order.
  SlotFillers draw_fillers(const SeedTemplate& seed, Rng& rng) const;

  LabeledSample compose_positive(const SeedTemplate& seed, std::uint64_t rng_seed) const;
  LabeledSample compose_positive(const SeedTemplate& seed, const SlotFillers& fillers, std::uint64_t rng_seed) const;
  LabeledSample compose_negative(corpus::ExtractionType type, std::uint64_t rng_seed) const;
  LabeledSample compose_negative(std::uint64_t rng_seed) const;

  const tagger::Tagger& tagger() const { return tagger_; }
  const std::vector<NegativeTemplate>& negatives() const { return negatives_; }

 private:
  std::string fill(std::string_view sentence, const SlotFillers& fillers) const;
  std::vector<std::string> surround(std::vector<std::string> block, Rng& rng) const;

  const corpus::KeywordSet* keywords_;
  tagger::Tagger tagger_;
  std::vector<std::string> distractors_;
  std::vector<NegativeTemplate> negatives_;
};

struct DatasetConfig {
  std::size_t n_total = 3000;   // training samples
  std::size_t n_test = 0;       // held-out samples
  double positive_fraction = 0.3;
  std::uint64_t rng_seed = 42;
  // When > 0, every k-th seed is reserved for the test split (held-out-template
  // evaluation); otherwise both splits draw from all seeds.
  std::size_t holdout_every = 0;
};

struct Dataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

Dataset build_dataset(const Composer& composer, const std::vector<SeedTemplate>& seeds, const DatasetConfig& config);

// Per-class counts of a split, as recorded in the manifest.
struct SplitCounts {
  std::size_t total = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::map<std::string, std::size_t> by_type;      // all samples
  std::map<std::string, std::size_t> by_category;  // positives only
};

SplitCounts count(const std::vector<LabeledSample>& samples);

// JSONL (de)serialization. Fields: text, tags, label, target, category, type.
std::string to_jsonl(const std::vector<LabeledSample>& samples);
std::vector<LabeledSample> from_jsonl(std::string_view jsonl);
// Manifest JSON with per-class counts and the generation settings.
std::string manifest_json(const Dataset& dataset, const DatasetConfig& config);

}  // namespace specsyn::synthdata
