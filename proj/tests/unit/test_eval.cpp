#include <doctest.h>

#include <json.hpp>

#include "specsyn/eval.hpp"
#include "support.hpp"

using namespace specsyn;
using namespace specsyn::eval;

namespace {

// Counts for a target precision/recall over 100 positives.
ConfusionCounts counts_for(double p, double r) {
  ConfusionCounts c;
  c.tp = static_cast<std::size_t>(std::llround(100 * r));
  c.fn = 100 - c.tp;
  c.fp = static_cast<std::size_t>(std::llround(static_cast<double>(c.tp) * (1 - p) / p));
  return c;
}

struct Brute {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0, matched = 0, total = 0;
};

Brute brute(const std::vector<SampleOutcome>& s) {
  Brute b;
  for (const auto& x : s) {
    if (x.gold && x.predicted) ++b.tp;
    if (!x.gold && x.predicted) ++b.fp;
    if (x.gold && !x.predicted) ++b.fn;
    if (!x.gold && !x.predicted) ++b.tn;
    if (x.gold && x.predicted) {
      ++b.total;
      if (x.predicted_spec && dsl::print_spec(dsl::parse_spec(*x.predicted_spec)) ==
                                  dsl::print_spec(dsl::parse_spec(*x.gold_spec))) {
        ++b.matched;
      }
    }
  }
  return b;
}

std::vector<SampleOutcome> random_outcomes(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> types = {"simple", "complex_single", "complex_multi"};
  static const std::vector<std::string> cats = {"quantitative", "utilization", "interrelation", "attribute", "generic"};
  static const std::vector<std::string> specs = {"a > 1", "b in [1, 2]", "use(c)", "d == true", "with(e, f)"};
  Rng rng(seed);
  std::vector<SampleOutcome> out;
  for (std::size_t i = 0; i < n; ++i) {
    SampleOutcome o;
    o.id = "s" + std::to_string(i);
    o.gold = rng.bernoulli(0.5);
    o.predicted = rng.bernoulli(0.5);
    o.type = types[rng.index(types.size())];
    if (o.gold) {
      o.gold_spec = specs[rng.index(specs.size())];
      o.gold_category = cats[rng.index(cats.size())];
    }
    if (o.predicted) {
      o.predicted_spec = rng.bernoulli(0.5) && o.gold_spec ? std::string("  ") + *o.gold_spec : specs[rng.index(specs.size())];
      o.predicted_category = cats[rng.index(cats.size())];
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace

TEST_CASE("metrics from counts") {
  const auto m = metrics_from({94, 6, 21, 0});
  CHECK(m.precision == doctest::Approx(0.94).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(94.0 / 115.0).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(0.8174).epsilon(0.0005));

  const auto p = metrics_from(counts_for(0.92, 0.81));
  CHECK(p.precision == doctest::Approx(0.92).epsilon(0.005));
  CHECK(p.recall == doctest::Approx(0.81).epsilon(1e-12));
  CHECK(std::abs(p.f1 - 0.86) <= 0.005);
  CHECK(std::abs(f1_from(0.92, 0.81) - 0.8615) < 1e-4);

  const auto perfect = metrics_from({10, 0, 0, 5});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  const auto none = metrics_from({0, 0, 0, 5});
  CHECK(none.f1 == 0.0);
}

TEST_CASE("detection scoring") {
  const auto s = score_detection({true, true, false, false, true}, {true, false, true, false, true});
  CHECK(s.counts == ConfusionCounts{2, 1, 1, 1});
  CHECK_THROWS_AS(score_detection({true}, {true, false}), LengthMismatch);
}

TEST_CASE("generation scoring") {
  using Opt = std::optional<std::string>;
  auto g = score_generation({Opt("a > 1"), Opt("b  in [1,2]"), std::nullopt, Opt("x > 1")},
                            {Opt("a > 1"), Opt("b in [1, 2]"), Opt("c > 3"), std::nullopt});
  CHECK(g.total == 2);
  CHECK(g.matched == 2);
  CHECK(g.rate == 1.0);
  g = score_generation({Opt("a > 2"), Opt("not a spec")}, {Opt("a > 1"), Opt("b > 1")});
  CHECK(g.matched == 0);
  CHECK(g.total == 2);
  CHECK(same_spec("a>1", "a > 1"));
  CHECK(!same_spec("a > 1", "???"));
}

TEST_CASE("mixed batch against a brute-force scorer") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = random_outcomes(20, seed);
    const auto r = evaluate(s);
    const auto b = brute(s);
    CHECK(r.confusion == ConfusionCounts{b.tp, b.fp, b.fn, b.tn});
    CHECK(r.generation.matched == b.matched);
    CHECK(r.generation.total == b.total);
  }
}

TEST_CASE("per-group breakdown") {
  const auto s = random_outcomes(30, 99);
  const auto r = evaluate(s);

  ConfusionCounts sum;
  for (const auto& g : r.by_type) {
    std::vector<SampleOutcome> part;
    for (const auto& x : s) {
      if (x.type == g.name) part.push_back(x);
    }
    const auto b = brute(part);
    CHECK(g.samples == part.size());
    CHECK(g.counts == ConfusionCounts{b.tp, b.fp, b.fn, b.tn});
    CHECK(g.generation.matched == b.matched);
    sum += g.counts;
  }
  CHECK(sum == r.confusion);

  ConfusionCounts cat_sum;
  for (const auto& g : r.by_category) {
    std::vector<SampleOutcome> part;
    for (const auto& x : s) {
      const auto& c = x.gold ? x.gold_category : x.predicted_category;
      if (c && *c == g.name) part.push_back(x);
    }
    const auto b = brute(part);
    CHECK(g.counts == ConfusionCounts{b.tp, b.fp, b.fn, b.tn});
    cat_sum += g.counts;
  }
  CHECK(cat_sum.tp == r.confusion.tp);
  CHECK(cat_sum.fp == r.confusion.fp);
  CHECK(cat_sum.fn == r.confusion.fn);

  std::vector<SampleOutcome> one = s;
  for (auto& x : one) x.type = "simple";
  const auto single = evaluate(one);
  REQUIRE(single.by_type.size() == 1);
  CHECK(single.by_type[0].counts == single.confusion);
  CHECK(single.by_type[0].metrics.f1 == single.overall.f1);
}

TEST_CASE("report json") {
  const auto r = evaluate(random_outcomes(12, 5));
  const auto j = nlohmann::json::parse(report_json(r));
  for (const char* k : {"samples", "precision", "recall", "f1", "generation", "confusion", "by_type", "by_category", "errors"}) {
    CHECK(j.contains(k));
  }
  CHECK(j["samples"] == 12);
  CHECK(!report_table(r).empty());
}
