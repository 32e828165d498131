#include "specsyn/eval.hpp"

#include <cstdio>
#include <map>

#include <json.hpp>

#include "specsyn/dsl.hpp"

namespace specsyn::eval {

namespace {

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

void tally(ConfusionCounts& c, bool predicted, bool gold) {
  if (predicted && gold) {
    ++c.tp;
  } else if (predicted) {
    ++c.fp;
  } else if (gold) {
    ++c.fn;
  } else {
    ++c.tn;
  }
}

struct GroupAcc {
  std::size_t samples = 0;
  ConfusionCounts counts;
  std::vector<std::optional<std::string>> predicted, gold;
};

void add_outcome(GroupAcc& g, const SampleOutcome& s) {
  ++g.samples;
  tally(g.counts, s.predicted, s.gold);
  g.predicted.push_back(s.predicted ? std::optional<std::string>(s.predicted_spec.value_or("")) : std::nullopt);
  g.gold.push_back(s.gold ? s.gold_spec : std::nullopt);
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

nlohmann::ordered_json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp},
          {"fp", c.fp},
          {"fn", c.fn},
          {"tn", c.tn},
          {"by_predicted", {{"tp", ratio(c.tp, c.tp + c.fp)}, {"fp", ratio(c.fp, c.tp + c.fp)}}},
          {"by_gold", {{"tp", ratio(c.tp, c.tp + c.fn)}, {"fn", ratio(c.fn, c.tp + c.fn)}}}};
}

nlohmann::ordered_json generation_json(const GenerationScore& g) {
  return {{"matched", g.matched}, {"total", g.total}, {"exact_match", g.rate}};
}

nlohmann::ordered_json groups_json(const std::vector<GroupReport>& groups) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& g : groups) {
    nlohmann::ordered_json j = metrics_json(g.metrics);
    j["samples"] = g.samples;
    j["confusion"] = counts_json(g.counts);
    j["generation"] = generation_json(g.generation);
    out[g.name] = std::move(j);
  }
  return out;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

double f1_from(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics metrics_from(const ConfusionCounts& c) {
  Metrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = f1_from(m.precision, m.recall);
  return m;
}

DetectionScore score_detection(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) throw LengthMismatch("predictions and labels differ in length");
  if (predictions.empty()) throw LengthMismatch("nothing to score");
  DetectionScore s;
  for (std::size_t i = 0; i < labels.size(); ++i) tally(s.counts, predictions[i], labels[i]);
  s.metrics = metrics_from(s.counts);
  return s;
}

bool same_spec(const std::string& a, const std::string& b) {
  try {
    return dsl::parse_spec(a) == dsl::parse_spec(b);
  } catch (const Error&) {
    return false;
  }
}

GenerationScore score_generation(const std::vector<std::optional<std::string>>& predicted,
                                 const std::vector<std::optional<std::string>>& gold) {
  if (predicted.size() != gold.size()) throw LengthMismatch("predicted and gold specifications differ in length");
  GenerationScore g;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!gold[i] || !predicted[i]) continue;
    ++g.total;
    if (same_spec(*predicted[i], *gold[i])) ++g.matched;
  }
  g.rate = ratio(g.matched, g.total);
  return g;
}

std::vector<GroupReport> breakdown(const std::vector<SampleOutcome>& samples, GroupKey key) {
  std::map<std::string, GroupAcc> groups;
  for (const auto& s : samples) {
    if (key == GroupKey::Type) {
      add_outcome(groups[s.type], s);
    } else if (s.gold) {
      if (!s.gold_category) throw Error("gold-positive sample '" + s.id + "' has no category");
      add_outcome(groups[*s.gold_category], s);
    } else if (s.predicted) {
      add_outcome(groups[s.predicted_category.value_or("unknown")], s);
    }
  }
  std::vector<GroupReport> out;
  for (auto& [name, acc] : groups) {
    GroupReport r;
    r.name = name;
    r.samples = acc.samples;
    r.counts = acc.counts;
    r.metrics = metrics_from(acc.counts);
    r.generation = score_generation(acc.predicted, acc.gold);
    out.push_back(std::move(r));
  }
  return out;
}

EvaluationReport evaluate(const std::vector<SampleOutcome>& samples) {
  EvaluationReport r;
  GroupAcc all;
  for (const auto& s : samples) {
    add_outcome(all, s);
    const bool gen_miss = s.gold && s.predicted && !same_spec(s.predicted_spec.value_or(""), s.gold_spec.value_or(""));
    if (s.gold != s.predicted || gen_miss) {
      r.errors.push_back({s.id, s.gold ? s.gold_spec.value_or("") : "none",
                          s.predicted ? s.predicted_spec.value_or("") : "none"});
    }
  }
  r.samples = all.samples;
  r.confusion = all.counts;
  r.overall = metrics_from(all.counts);
  r.generation = score_generation(all.predicted, all.gold);
  r.by_type = breakdown(samples, GroupKey::Type);
  r.by_category = breakdown(samples, GroupKey::Category);
  return r;
}

std::string report_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["precision"] = r.overall.precision;
  j["recall"] = r.overall.recall;
  j["f1"] = r.overall.f1;
  j["generation"] = generation_json(r.generation);
  j["confusion"] = counts_json(r.confusion);
  j["by_type"] = groups_json(r.by_type);
  j["by_category"] = groups_json(r.by_category);
  nlohmann::ordered_json errors = nlohmann::ordered_json::array();
  for (const auto& e : r.errors) errors.push_back({{"id", e.id}, {"expected", e.expected}, {"got", e.got}});
  j["errors"] = std::move(errors);
  return j.dump(2) + "\n";
}

std::string report_table(const EvaluationReport& r) {
  std::string out;
  char buf[256];
  auto row = [&](const std::string& name, std::size_t n, const Metrics& m, const GenerationScore& g) {
    std::snprintf(buf, sizeof buf, "%-16s %7zu %9.3f %7.3f %7.3f %10.3f (%zu/%zu)\n", name.c_str(), n, m.precision,
                  m.recall, m.f1, g.rate, g.matched, g.total);
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-16s %7s %9s %7s %7s %10s\n", "group", "samples", "precision", "recall", "f1",
                "generation");
  out += buf;
  row("total", r.samples, r.overall, r.generation);
  out += "-- by type\n";
  for (const auto& g : r.by_type) row(g.name, g.samples, g.metrics, g.generation);
  out += "-- by category\n";
  for (const auto& g : r.by_category) row(g.name, g.samples, g.metrics, g.generation);
  std::snprintf(buf, sizeof buf, "confusion: tp=%zu fp=%zu fn=%zu tn=%zu\n", r.confusion.tp, r.confusion.fp,
                r.confusion.fn, r.confusion.tn);
  out += buf;
  return out;
}

}  // namespace specsyn::eval
