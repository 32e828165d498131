#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "specsyn/error.hpp"

namespace specsyn::eval {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

Metrics metrics_from(const ConfusionCounts& c);
double f1_from(double precision, double recall);

struct DetectionScore {
  ConfusionCounts counts;
  Metrics metrics;
};

DetectionScore score_detection(const std::vector<bool>& predictions, const std::vector<bool>& labels);

struct GenerationScore {
  std::size_t matched = 0;
  std::size_t total = 0;  // gold positives the detector flagged
  double rate = 0.0;      // matched / total, 0 when total == 0
};

// True when both texts parse and the specifications are structurally equal.
bool same_spec(const std::string& a, const std::string& b);

// An entry with no prediction was not flagged by the detector; an entry with
// no gold specification is a gold negative.
GenerationScore score_generation(const std::vector<std::optional<std::string>>& predicted,
                                 const std::vector<std::optional<std::string>>& gold);

struct SampleOutcome {
  std::string id;
  bool gold = false;
  bool predicted = false;
  std::optional<std::string> gold_spec;
  std::optional<std::string> predicted_spec;
  std::string type;
  std::optional<std::string> gold_category;
  std::optional<std::string> predicted_category;
};

enum class GroupKey { Type, Category };

struct GroupReport {
  std::string name;
  std::size_t samples = 0;
  ConfusionCounts counts;
  Metrics metrics;
  GenerationScore generation;
};

// Per-group scores. By category, gold positives fall in their gold category
// and false positives in their predicted category; true negatives carry no
// category and are left out. Empty groups are omitted.
std::vector<GroupReport> breakdown(const std::vector<SampleOutcome>& samples, GroupKey key);

struct ErrorEntry {
  std::string id;
  std::string expected;
  std::string got;
};

struct EvaluationReport {
  std::size_t samples = 0;
  ConfusionCounts confusion;
  Metrics overall;
  GenerationScore generation;
  std::vector<GroupReport> by_type;
  std::vector<GroupReport> by_category;
  std::vector<ErrorEntry> errors;
};

EvaluationReport evaluate(const std::vector<SampleOutcome>& samples);

std::string report_json(const EvaluationReport& report);
std::string report_table(const EvaluationReport& report);

}  // namespace specsyn::eval
