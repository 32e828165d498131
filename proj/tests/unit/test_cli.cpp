#include <doctest.h>

#include <json.hpp>

#include "specsyn/cli.hpp"
#include "specsyn/text.hpp"
#include "support.hpp"

using namespace specsyn;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "specsyn");
  args.insert(args.begin() + 1, "-q");
  return cli::run(args);
}

std::string fixture(const std::string& name) { return testing::data("fixtures/" + name); }

}  // namespace

TEST_CASE("compose is byte-identical across runs") {
  const auto dir = testing::scratch("cli_compose");
  for (const char* name : {"a", "b"}) {
    const auto out = (dir / (std::string(name) + ".jsonl")).string();
    REQUIRE(run_cli({"compose", "--n", "10", "--seed", "7", "--out", out, "--test-out",
                 (dir / (std::string(name) + "_test.jsonl")).string(), "--test-n", "10", "--manifest",
                 (dir / (std::string(name) + "_manifest.json")).string()}) == 0);
  }
  CHECK(text::read_file((dir / "a.jsonl").string()) == text::read_file((dir / "b.jsonl").string()));
  CHECK(text::read_file((dir / "a_test.jsonl").string()) == text::read_file((dir / "b_test.jsonl").string()));
  CHECK(text::read_file((dir / "a_manifest.json").string()) == text::read_file((dir / "b_manifest.json").string()));
  CHECK(std::filesystem::exists(dir / "compose.config.json"));
}

TEST_CASE("check exit codes") {
  const auto dir = testing::scratch("cli_check");
  const auto report = (dir / "violations.json").string();
  CHECK(run_cli({"check", "--specs", fixture("user_port.spec"), "--config", fixture("user_port.conf"), "--report", report}) ==
        1);
  const auto j = nlohmann::json::parse(text::read_file(report));
  REQUIRE(j.size() == 1);
  CHECK(j[0]["verdict"] == "ValueOutOfRange");

  text::write_file((dir / "ok.conf").string(), "user_port = 3306\n");
  CHECK(run_cli({"check", "--specs", fixture("user_port.spec"), "--config", (dir / "ok.conf").string()}) == 0);

  CHECK(run_cli({"check", "--specs", (dir / "missing.spec").string(), "--config", fixture("user_port.conf")}) == 2);
  CHECK(run_cli({"nonsense"}) == 2);
  CHECK(run_cli({}) == 2);
}

TEST_CASE("ingest writes candidates") {
  const auto dir = testing::scratch("cli_ingest");
  const auto out = (dir / "candidates.jsonl").string();
  REQUIRE(run_cli({"ingest", "--input", fixture("manual.txt"), "--keywords", fixture("keywords.txt"), "--window", "2",
               "--out", out}) == 0);
  const auto lines = text::split_lines(text::read_file(out));
  std::size_t n = 0;
  for (const auto& l : lines) n += !text::trim(l).empty();
  CHECK(n >= 3);
}

TEST_CASE("train, synthesize and eval on a tiny model") {
  const auto dir = testing::scratch("cli_pipeline");
  const auto train = (dir / "train.jsonl").string();
  const auto test = (dir / "test.jsonl").string();
  REQUIRE(run_cli({"compose", "--n", "60", "--seed", "3", "--out", train, "--test-out", test, "--test-n", "20"}) == 0);
  const auto model = (dir / "m.spsy").string();
  REQUIRE(run_cli({"train", "--data", train, "--out", model, "--log", (dir / "loss.csv").string(), "--epochs", "2",
               "--d-model", "16", "--layers", "1", "--pooled", "16"}) == 0);
  CHECK(text::read_file((dir / "loss.csv").string()).rfind("epoch,loss,detection,generation,category\n", 0) == 0);
  const auto specs = (dir / "out.spec").string();
  CHECK(run_cli({"synthesize", "--model", model, "--input", fixture("manual.txt"), "--keywords", fixture("keywords.txt"),
             "--out", specs, "--report", (dir / "synth.json").string()}) == 0);
  CHECK(std::filesystem::exists(specs));
  const auto report = (dir / "report.json").string();
  CHECK(run_cli({"eval", "--model", model, "--data", test, "--report", report}) == 0);
  CHECK(nlohmann::json::parse(text::read_file(report))["samples"] == 20);
}
