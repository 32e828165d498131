#include "specsyn/pipeline.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace specsyn::pipeline {

std::vector<std::string> input_tokens(const tagger::TaggedCandidate& candidate) {
  return tagger::tokenize(candidate.text);
}

model::SpecModel build_model(const std::vector<synthdata::LabeledSample>& train, model::ModelConfig base,
                             std::uint64_t seed) {
  std::vector<std::vector<std::string>> seqs;
  std::size_t longest = 0;
  for (const auto& s : train) {
    seqs.push_back(input_tokens(s.candidate));
    longest = std::max(longest, seqs.back().size() + 1);
    seqs.push_back(s.target);
  }
  base.max_len = std::max(base.max_len, static_cast<int>(longest));
  return model::SpecModel::create(model::Vocab::build(seqs), base, seed);
}

std::vector<model::Example> to_examples(const model::SpecModel& model,
                                        const std::vector<synthdata::LabeledSample>& samples) {
  std::vector<model::Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(model.example(input_tokens(s.candidate), s.has_spec, s.target,
                                s.category ? static_cast<int>(*s.category) : -1));
  }
  return out;
}

std::string gold_spec(const synthdata::LabeledSample& sample, const tagger::Lexicons& lexicons) {
  if (!sample.concrete_spec.empty()) return sample.concrete_spec;
  return tagger::detag(sample.target, sample.candidate.tags, lexicons);
}

namespace {

struct Decoded {
  std::optional<std::string> spec;
  std::string raw;
  std::string error;
};

Decoded decode(const model::Prediction& p, const tagger::TaggedCandidate& c, const tagger::Lexicons& lexicons) {
  Decoded d;
  for (const auto& t : p.tokens) d.raw += (d.raw.empty() ? "" : " ") + t;
  if (p.truncated) {
    d.error = "generation hit the length limit";
    return d;
  }
  try {
    d.spec = tagger::detag(p.tokens, c.tags, lexicons);
  } catch (const Error& e) {
    d.error = e.what();
  }
  return d;
}

}  // namespace

SynthesisResult synthesize(const model::SpecModel& model, const tagger::Tagger& tagger,
                           const std::vector<corpus::CandidateText>& candidates, int max_gen_len) {
  SynthesisResult r;
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    CandidateResult cr;
    cr.tagged = tagger.tag(c);
    const model::Prediction p = model.predict(input_tokens(cr.tagged), cr.tagged.tags, max_gen_len);
    cr.p_spec = p.detection[1];
    cr.detected = p.has_spec;
    if (p.has_spec) {
      ++r.detections;
      cr.category = std::string(dsl::to_string(p.category));
      cr.tokens = p.tokens;
      Decoded d = decode(p, cr.tagged, tagger.lexicons());
      cr.spec = d.spec;
      cr.error = d.error;
      if (cr.spec && seen.insert(*cr.spec).second) r.specs.push_back(*cr.spec);
    }
    r.candidates.push_back(std::move(cr));
  }
  return r;
}

std::string specs_text(const SynthesisResult& result) {
  std::string out;
  for (const auto& s : result.specs) out += s + "\n";
  return out;
}

std::string synthesis_report_json(const SynthesisResult& result) {
  nlohmann::ordered_json j;
  j["candidates"] = result.candidates.size();
  j["detections"] = result.detections;
  j["specifications"] = result.specs.size();
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& c : result.candidates) {
    nlohmann::ordered_json it;
    it["source"] = c.tagged.origin.source;
    it["type"] = std::string(corpus::to_string(c.tagged.origin.type));
    it["tagged"] = c.tagged.text;
    it["p_spec"] = c.p_spec;
    it["detected"] = c.detected;
    if (c.detected) {
      it["category"] = c.category;
      std::string gen;
      for (const auto& t : c.tokens) gen += (gen.empty() ? "" : " ") + t;
      it["generated"] = gen;
      it["spec"] = c.spec ? nlohmann::ordered_json(*c.spec) : nlohmann::ordered_json(nullptr);
      if (!c.error.empty()) it["error"] = c.error;
    }
    items.push_back(std::move(it));
  }
  j["items"] = std::move(items);
  return j.dump(2) + "\n";
}

std::vector<eval::SampleOutcome> predict_samples(const model::SpecModel& model, const tagger::Lexicons& lexicons,
                                                 const std::vector<synthdata::LabeledSample>& samples,
                                                 int max_gen_len) {
  std::vector<eval::SampleOutcome> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const model::Prediction p = model.predict(input_tokens(s.candidate), s.candidate.tags, max_gen_len);
    eval::SampleOutcome o;
    o.id = "sample#" + std::to_string(i) + (s.template_id.empty() ? "" : " (" + s.template_id + ")");
    o.gold = s.has_spec;
    o.predicted = p.has_spec;
    o.type = std::string(corpus::to_string(s.type));
    if (s.has_spec) {
      o.gold_spec = gold_spec(s, lexicons);
      if (s.category) o.gold_category = std::string(dsl::to_string(*s.category));
    }
    if (p.has_spec) {
      Decoded d = decode(p, s.candidate, lexicons);
      o.predicted_spec = d.spec ? *d.spec : d.raw;
      o.predicted_category = std::string(dsl::to_string(p.category));
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace specsyn::pipeline
