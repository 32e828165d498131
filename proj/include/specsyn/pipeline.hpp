#pragma once

// End-to-end glue between the dataset, the network and the evaluator.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specsyn/corpus.hpp"
#include "specsyn/eval.hpp"
#include "specsyn/model.hpp"
#include "specsyn/synthdata.hpp"
#include "specsyn/tagger.hpp"

namespace specsyn::pipeline {

std::vector<std::string> input_tokens(const tagger::TaggedCandidate& candidate);

// Vocabulary from the training split; L_max = max(base.max_len, longest input).
model::SpecModel build_model(const std::vector<synthdata::LabeledSample>& train, model::ModelConfig base,
                             std::uint64_t seed);

std::vector<model::Example> to_examples(const model::SpecModel& model,
                                        const std::vector<synthdata::LabeledSample>& samples);

// Canonical gold specification of a positive sample.
std::string gold_spec(const synthdata::LabeledSample& sample, const tagger::Lexicons& lexicons);

struct CandidateResult {
  tagger::TaggedCandidate tagged;
  double p_spec = 0.0;
  bool detected = false;
  std::string category;
  std::vector<std::string> tokens;  // generated tagged-spec tokens
  std::optional<std::string> spec;  // detagged canonical DSL
  std::string error;                // why a detection produced no spec
};

struct SynthesisResult {
  std::vector<CandidateResult> candidates;
  std::vector<std::string> specs;  // distinct, in order of first emission
  std::size_t detections = 0;
};

// tag → detect → generate → detag, per candidate.
SynthesisResult synthesize(const model::SpecModel& model, const tagger::Tagger& tagger,
                           const std::vector<corpus::CandidateText>& candidates, int max_gen_len = 24);

std::string specs_text(const SynthesisResult& result);
std::string synthesis_report_json(const SynthesisResult& result);

// Predicts every sample and scores the predictions.
std::vector<eval::SampleOutcome> predict_samples(const model::SpecModel& model, const tagger::Lexicons& lexicons,
                                                 const std::vector<synthdata::LabeledSample>& samples,
                                                 int max_gen_len = 24);

}  // namespace specsyn::pipeline
