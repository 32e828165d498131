// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 when any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specsyn/conformance.hpp"
#include "specsyn/dsl.hpp"
#include "specsyn/eval.hpp"
#include "specsyn/model.hpp"
#include "specsyn/text.hpp"
#include "unit/support.hpp"

namespace fs = std::filesystem;
using namespace specsyn;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli;
fs::path g_dir;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

int cli(const std::vector<std::string>& args) {
  std::string cmd = quote(g_cli) + " -q";
  for (const auto& a : args) cmd += " " + quote(a);
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string path(const std::string& name) { return (g_dir / name).string(); }
std::string fixture(const std::string& name) { return testing::data("fixtures/" + name); }
std::string slurp(const std::string& p) { return fs::exists(p) ? text::read_file(p) : std::string("<missing>"); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome dsl_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(1);
  std::size_t failures = 0;
  std::vector<bool> seen(dsl::kRelationCount, false);
  for (int i = 0; i < 1000; ++i) {
    const auto s = testing::random_spec(rng, static_cast<dsl::Relation>(static_cast<std::size_t>(i) % dsl::kRelationCount));
    for (const auto& r : s.rules) seen[static_cast<std::size_t>(r.relation)] = true;
    try {
      if (!(dsl::parse_spec(dsl::print_spec(s)) == s)) ++failures;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  const double t = seconds_since(t0);
  const bool all = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  std::ostringstream d;
  d << "1000 specs, " << failures << " failures, all relations " << (all ? "covered" : "NOT covered") << ", " << t
    << " s";
  return {failures == 0 && all && t < 5.0, d.str()};
}

Outcome tag_detag() {
  std::size_t failures = 0, total = 0;
  const auto& seeds = testing::seeds();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (std::uint64_t i = 0; i < 10; ++i, ++total) {
      const auto sample = testing::composer().compose_positive(seeds[s], derive_seed(2024, {s, i}));
      try {
        if (tagger::detag(sample.target, sample.candidate.tags, testing::lexicons()) != sample.concrete_spec) ++failures;
      } catch (const std::exception&) {
        ++failures;
      }
    }
  }
  std::ostringstream d;
  d << seeds.size() << " seeds x 10 = " << total << " instantiations, " << failures << " failures";
  return {seeds.size() == 50 && failures == 0, d.str()};
}

Outcome loss_exactness() {
  const std::vector<double> p{0.5, 0.5};
  const double a = model::weighted_ce(p, 1, std::vector<double>{1, 1});
  const double b = model::weighted_ce(p, 1, std::vector<double>{1, 3});
  const double ea = std::abs(a - std::log(2.0)), eb = std::abs(b - 3 * std::log(2.0));
  std::ostringstream d;
  d.precision(12);
  d << "w=(1,1): " << a << ", w=(1,3): " << b;
  return {ea < 1e-9 && eb < 1e-9, d.str()};
}

Outcome metrics() {
  // 100 gold positives at recall 0.81; false positives chosen for precision 0.92.
  eval::ConfusionCounts c;
  c.tp = 81;
  c.fn = 19;
  c.fp = 7;
  std::vector<bool> pred, gold;
  for (std::size_t i = 0; i < c.tp; ++i) pred.push_back(true), gold.push_back(true);
  for (std::size_t i = 0; i < c.fn; ++i) pred.push_back(false), gold.push_back(true);
  for (std::size_t i = 0; i < c.fp; ++i) pred.push_back(true), gold.push_back(false);
  const auto s = eval::score_detection(pred, gold);
  const auto m2 = eval::metrics_from({94, 6, 21, 0});
  std::ostringstream d;
  d.precision(4);
  d << "P=" << s.metrics.precision << " R=" << s.metrics.recall << " F1=" << s.metrics.f1 << "; tp94/fp6/fn21: P="
    << m2.precision << " R=" << m2.recall;
  const bool ok = std::abs(s.metrics.precision - 0.92) < 0.005 && std::abs(s.metrics.recall - 0.81) < 1e-12 &&
                  std::abs(s.metrics.f1 - 0.86) <= 0.005 && std::abs(m2.precision - 0.94) < 1e-12 &&
                  std::abs(m2.recall - 0.8174) <= 0.0005;
  return {ok, d.str()};
}

Outcome gradient() {
  const auto t0 = Clock::now();
  const int vocab = 60;
  const auto cfg = testing::tiny_config(vocab);
  const auto params = model::Params::init(cfg, 7);
  auto batch = testing::random_examples(4, vocab, 8);
  batch[1].input.insert(batch[1].input.begin() + 2, model::Vocab::kPad);
  const auto r = model::grad_check(cfg, params, batch, model::LossWeights::from_counts(2, 2));
  const double t = seconds_since(t0);
  std::ostringstream d;
  d << r.checked << " entries in " << r.per_tensor.size() << " tensors, max relative error " << r.max_relative_error
    << " (" << r.worst_tensor << "), " << t << " s";
  return {r.checked == params.count() && r.max_relative_error < 1e-4 && t < 120.0, d.str()};
}

Outcome synthetic_protocol() {
  const auto t0 = Clock::now();
  if (cli({"compose", "--n", "3000", "--test-n", "250", "--seed", "42", "--out", path("train.jsonl"), "--test-out",
           path("test.jsonl")}) != 0) {
    return {false, "compose failed"};
  }
  if (cli({"train", "--data", path("train.jsonl"), "--epochs", "100", "--out", path("model.spsy"), "--log",
           path("loss.csv")}) != 0) {
    return {false, "train failed"};
  }
  if (cli({"eval", "--model", path("model.spsy"), "--data", path("test.jsonl"), "--report", path("report.json")}) != 0) {
    return {false, "eval failed"};
  }
  const double t = seconds_since(t0);
  const auto j = nlohmann::json::parse(text::read_file(path("report.json")));
  const double f1 = j["f1"].get<double>();
  double simple = 0.0;
  std::size_t cm = 0, ct = 0;
  for (const auto& [name, g] : j["by_type"].items()) {
    const auto matched = g["generation"]["matched"].get<std::size_t>();
    const auto total = g["generation"]["total"].get<std::size_t>();
    if (name == "simple") {
      simple = total ? static_cast<double>(matched) / static_cast<double>(total) : 0.0;
    } else {
      cm += matched;
      ct += total;
    }
  }
  const double complex = ct ? static_cast<double>(cm) / static_cast<double>(ct) : 0.0;
  std::ostringstream d;
  d.precision(4);
  d << "detection F1 " << f1 << ", simple exact-match " << simple << ", complex exact-match " << complex << " (" << cm
    << "/" << ct << "), " << t / 60.0 << " min";
  return {f1 >= 0.90 && simple >= 0.95 && complex >= 0.80 && t <= 15 * 60.0, d.str()};
}

Outcome two_step() {
  if (!fs::exists(path("model.spsy"))) return {false, "no trained model"};
  const auto run = [](const std::string& input, const std::string& out) {
    return cli({"synthesize", "--model", path("model.spsy"), "--input", fixture(input), "--keywords",
                fixture("keywords.txt"), "--out", path(out), "--report", path(out + ".json")});
  };
  if (run("false_positive.txt", "fp.spec") != 0 || run("user_port.txt", "user_port.spec") != 0) {
    return {false, "synthesize failed"};
  }
  const auto fp = slurp(path("fp.spec"));
  const auto up = slurp(path("user_port.spec"));
  const auto fp_report = nlohmann::json::parse(text::read_file(path("fp.spec.json")));
  std::ostringstream d;
  d << "false-positive fixture: " << fp_report["candidates"].get<std::size_t>() << " candidate(s), "
    << fp_report["detections"].get<std::size_t>() << " detection(s), specs '" << text::trim(fp)
    << "'; user_port fixture: '" << text::trim(up) << "'";
  return {fp.empty() && fp_report["candidates"].get<std::size_t>() >= 1 && up == "user_port > 1500\n", d.str()};
}

Outcome conformance_table() {
  using namespace conformance;
  const auto& lex = testing::lexicons();
  const auto conj = dsl::parse_spec("a > 1 and b > 1");
  const auto disj = dsl::parse_spec("a > 1 or b > 1");
  std::size_t rows = 0, wrong = 0;
  for (int ca = 0; ca < 3; ++ca) {
    for (int cb = 0; cb < 3; ++cb) {
      // 0 = present and satisfied, 1 = present and out of range, 2 = absent.
      const std::string text = std::string(ca == 0 ? "a = 5\n" : ca == 1 ? "a = 0\n" : "") +
                               (cb == 0 ? "b = 5\n" : cb == 1 ? "b = 0\n" : "");
      const auto m = parse_config(text, ConfigFormat::KeyValue).map;
      const bool va = ca != 0, vb = cb != 0;
      wrong += spec_violated(conj, m, lex) != (va || vb);
      wrong += spec_violated(disj, m, lex) != (va && vb);
      wrong += (exit_status(check(m, {conj}, lex)) == 1) != (va || vb);
      wrong += (exit_status(check(m, {disj}, lex)) == 1) != (va && vb);
      ++rows;
    }
  }
  const int rc = cli({"check", "--specs", fixture("user_port.spec"), "--config", fixture("user_port.conf"), "--report",
                      path("violations.json")});
  const auto v = nlohmann::json::parse(slurp(path("violations.json")), nullptr, false);
  const bool one = v.is_array() && v.size() == 1 && v[0]["verdict"] == "ValueOutOfRange";
  std::ostringstream d;
  d << rows << " combinations x 2 connectives, " << wrong << " mismatches; user_port=1433: "
    << (v.is_array() ? v.size() : 0) << " violation(s), exit status " << rc;
  return {wrong == 0 && one && rc == 1, d.str()};
}

Outcome determinism() {
  std::vector<std::string> diffs;
  for (const char* r : {"r1", "r2"}) {
    const std::string p = std::string(r) + "_";
    if (cli({"compose", "--n", "300", "--test-n", "30", "--seed", "7", "--out", path(p + "train.jsonl"), "--test-out",
             path(p + "test.jsonl"), "--manifest", path(p + "manifest.json")}) != 0 ||
        cli({"train", "--data", path(p + "train.jsonl"), "--epochs", "3", "--seed", "5", "--out", path(p + "m.spsy"),
             "--log", path(p + "loss.csv")}) != 0 ||
        cli({"synthesize", "--model", path(p + "m.spsy"), "--input", fixture("manual.txt"), "--keywords",
             fixture("keywords.txt"), "--out", path(p + "out.spec"), "--report", path(p + "out.json")}) != 0) {
      return {false, std::string("run ") + r + " failed"};
    }
  }
  for (const char* f : {"train.jsonl", "test.jsonl", "manifest.json", "m.spsy", "loss.csv", "out.spec", "out.json"}) {
    if (slurp(path(std::string("r1_") + f)) != slurp(path(std::string("r2_") + f))) diffs.push_back(f);
  }
  std::string d = "compose/train/synthesize twice: ";
  if (diffs.empty()) {
    d += "all 7 outputs byte-identical";
  } else {
    d += "differs in";
    for (const auto& f : diffs) d += " " + f;
  }
  return {diffs.empty(), d};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") g_cli = argv[i + 1];
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: specsyn_acceptance --cli <path to specsyn>\n");
    return 2;
  }
  g_dir = fs::temp_directory_path() / "specsyn_acceptance";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"DSL round-trip", dsl_round_trip},
      {"tag/detag inverse", tag_detag},
      {"loss exactness", loss_exactness},
      {"metric reproduction", metrics},
      {"gradient verification", gradient},
      {"synthetic protocol", synthetic_protocol},
      {"two-step contract", two_step},
      {"conformance truth table", conformance_table},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
