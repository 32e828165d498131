#include "specsyn/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "specsyn/checkpoint.hpp"
#include "specsyn/conformance.hpp"
#include "specsyn/corpus.hpp"
#include "specsyn/eval.hpp"
#include "specsyn/pipeline.hpp"
#include "specsyn/synthdata.hpp"
#include "specsyn/text.hpp"
#include "specsyn/trainer.hpp"

namespace specsyn::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string data_path(const std::string& name) { return std::string(SPECSYN_DATA_DIR) + "/" + name; }

struct Common {
  std::string lexicon_dir;
  int verbosity = 1;
};

void log(const Common& c, int level, const std::string& msg) {
  if (c.verbosity >= level) std::cerr << msg << "\n";
}

// Effective settings of a run, written next to its primary output.
void write_config(const std::string& subcommand, const std::string& primary_output, json settings) {
  fs::path dir = fs::path(primary_output).parent_path();
  if (dir.empty()) dir = ".";
  json j;
  j["subcommand"] = subcommand;
  j["settings"] = std::move(settings);
  text::write_file((dir / (subcommand + ".config.json")).string(), j.dump(2) + "\n");
}

std::string jsonl_candidates(const std::vector<corpus::CandidateText>& cands) {
  std::string out;
  for (const auto& c : cands) {
    json j;
    j["text"] = c.text;
    j["source"] = c.source;
    j["type"] = std::string(corpus::to_string(c.type));
    j["keywords"] = c.keywords;
    j["sentence_count"] = c.sentence_count;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<corpus::CandidateText> read_candidates(const std::string& path, const corpus::KeywordSet& kws,
                                                   const std::string& format, std::size_t window) {
  const auto fmt = corpus::document_format_from_string(format);
  if (!fmt) throw Error("unknown document format '" + format + "' (expected plain, html or comments)");
  const auto sentences = corpus::ingest(text::read_file(path), *fmt);
  return corpus::extract_candidates(sentences, kws, window, fs::path(path).filename().string());
}

struct IngestOpts {
  std::string input, format = "plain", keywords = data_path("keywords.txt"), out;
  std::size_t window = corpus::kDefaultWindow;
};

int do_ingest(const IngestOpts& o, const Common& c) {
  const auto kws = corpus::KeywordSet::load(o.keywords);
  const auto cands = read_candidates(o.input, kws, o.format, o.window);
  text::write_file(o.out, jsonl_candidates(cands));
  write_config("ingest", o.out,
               {{"input", o.input}, {"format", o.format}, {"keywords", o.keywords}, {"window", o.window}, {"out", o.out}});
  log(c, 1, "ingest: " + std::to_string(cands.size()) + " candidates");
  return 0;
}

struct ComposeOpts {
  std::string seeds = data_path("seeds.json"), distractors = data_path("distractors.txt"),
              negatives = data_path("negatives.json"), keywords = data_path("keywords.txt"), out, test_out, manifest;
  std::size_t n = 3000, test_n = 250, holdout_every = 0;
  double pos_frac = 0.3;
  std::uint64_t seed = 42;
};

int do_compose(const ComposeOpts& o, const Common& c) {
  const auto kws = corpus::KeywordSet::load(o.keywords);
  const auto lex = tagger::Lexicons::load(c.lexicon_dir);
  synthdata::Composer composer(kws, lex, synthdata::load_distractors(o.distractors),
                               synthdata::load_negatives(o.negatives));
  synthdata::DatasetConfig cfg;
  cfg.n_total = o.n;
  cfg.n_test = o.test_out.empty() ? 0 : o.test_n;
  cfg.positive_fraction = o.pos_frac;
  cfg.rng_seed = o.seed;
  cfg.holdout_every = o.holdout_every;
  const auto ds = synthdata::build_dataset(composer, synthdata::load_seeds(o.seeds), cfg);
  text::write_file(o.out, synthdata::to_jsonl(ds.train));
  if (!o.test_out.empty()) text::write_file(o.test_out, synthdata::to_jsonl(ds.test));
  const std::string manifest =
      o.manifest.empty() ? (fs::path(o.out).parent_path() / "manifest.json").string() : o.manifest;
  text::write_file(manifest, synthdata::manifest_json(ds, cfg));
  write_config("compose", o.out,
               {{"seeds", o.seeds},
                {"distractors", o.distractors},
                {"negatives", o.negatives},
                {"keywords", o.keywords},
                {"lexicon", c.lexicon_dir},
                {"n", o.n},
                {"test_n", cfg.n_test},
                {"pos_frac", o.pos_frac},
                {"seed", o.seed},
                {"holdout_every", o.holdout_every},
                {"out", o.out},
                {"test_out", o.test_out},
                {"manifest", manifest}});
  log(c, 1, "compose: " + std::to_string(ds.train.size()) + " training, " + std::to_string(ds.test.size()) +
                " test samples");
  return 0;
}

struct TrainOpts {
  std::string data, out, log_path;
  model::TrainConfig train;
  model::ModelConfig model;
};

int do_train(const TrainOpts& o, const Common& c) {
  const auto samples = synthdata::from_jsonl(text::read_file(o.data));
  auto m = pipeline::build_model(samples, o.model, o.train.seed);
  const auto examples = pipeline::to_examples(m, samples);
  log(c, 1, "train: " + std::to_string(examples.size()) + " samples, vocabulary " + std::to_string(m.vocab.size()) +
                ", L_max " + std::to_string(m.config.max_len) + ", " + std::to_string(m.params.count()) +
                " parameters");
  const auto result = model::train(m, examples, o.train, [&](const model::EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %3d  loss %.5f  (detect %.5f  generate %.5f  category %.5f)", e.epoch,
                  e.loss, e.detection, e.generation, e.category);
    log(c, 2, buf);
  });
  checkpoint::save(m, o.out);
  if (!o.log_path.empty()) text::write_file(o.log_path, model::loss_csv(result.log));
  const auto& mc = m.config;
  write_config("train", o.out,
               {{"data", o.data},
                {"out", o.out},
                {"log", o.log_path},
                {"epochs", o.train.epochs},
                {"batch", o.train.batch},
                {"lr", o.train.lr},
                {"beta1", o.train.beta1},
                {"beta2", o.train.beta2},
                {"schedule", o.train.schedule == model::LrSchedule::Cosine ? "cosine" : "constant"},
                {"clip_norm", o.train.clip_norm},
                {"seed", o.train.seed},
                {"loss_coefficients",
                 {{"detection", o.train.coefs.detection},
                  {"generation", o.train.coefs.generation},
                  {"category", o.train.coefs.category}}},
                {"class_weights", {result.weights.w[0], result.weights.w[1]}},
                {"model",
                 {{"vocab_size", mc.vocab_size},
                  {"d_model", mc.d_model},
                  {"layers", mc.layers},
                  {"heads", mc.heads},
                  {"max_len", mc.max_len},
                  {"pooled", mc.pooled},
                  {"head_hidden", mc.head_hidden},
                  {"gen_hidden", mc.gen_hidden},
                  {"gen_embed", mc.gen_embed}}}});
  if (!result.log.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "train: final loss %.5f", result.log.back().loss);
    log(c, 1, buf);
  }
  return 0;
}

struct SynthOpts {
  std::string model, input, format = "plain", keywords = data_path("keywords.txt"), out, report;
  std::size_t window = corpus::kDefaultWindow;
  int max_gen_len = 24;
};

int do_synthesize(const SynthOpts& o, const Common& c) {
  const auto m = checkpoint::load(o.model);
  const auto kws = corpus::KeywordSet::load(o.keywords);
  tagger::Tagger tg(kws, tagger::Lexicons::load(c.lexicon_dir));
  const auto cands = read_candidates(o.input, kws, o.format, o.window);
  const auto r = pipeline::synthesize(m, tg, cands, o.max_gen_len);
  for (const auto& cr : r.candidates) {
    if (cr.detected && !cr.spec) log(c, 1, "synthesize: dropped generation for " + cr.tagged.origin.source + ": " + cr.error);
  }
  text::write_file(o.out, pipeline::specs_text(r));
  if (!o.report.empty()) text::write_file(o.report, pipeline::synthesis_report_json(r));
  write_config("synthesize", o.out,
               {{"model", o.model},
                {"input", o.input},
                {"format", o.format},
                {"keywords", o.keywords},
                {"lexicon", c.lexicon_dir},
                {"window", o.window},
                {"max_gen_len", o.max_gen_len},
                {"out", o.out},
                {"report", o.report}});
  log(c, 1, "synthesize: " + std::to_string(r.candidates.size()) + " candidates, " + std::to_string(r.detections) +
                " detections, " + std::to_string(r.specs.size()) + " specifications");
  return 0;
}

struct EvalOpts {
  std::string model, data, report;
  int max_gen_len = 24;
};

int do_eval(const EvalOpts& o, const Common& c) {
  const auto m = checkpoint::load(o.model);
  const auto lex = tagger::Lexicons::load(c.lexicon_dir);
  const auto samples = synthdata::from_jsonl(text::read_file(o.data));
  const auto report = eval::evaluate(pipeline::predict_samples(m, lex, samples, o.max_gen_len));
  text::write_file(o.report, eval::report_json(report));
  write_config("eval", o.report,
               {{"model", o.model}, {"data", o.data}, {"lexicon", c.lexicon_dir}, {"max_gen_len", o.max_gen_len},
                {"report", o.report}});
  log(c, 1, eval::report_table(report));
  return 0;
}

struct CheckOpts {
  std::string specs, config, format = "kv", report;
};

int do_check(const CheckOpts& o, const Common& c) {
  const auto fmt = conformance::config_format_from_string(o.format);
  if (!fmt) throw Error("unknown config format '" + o.format + "' (expected kv or ini)");
  std::vector<dsl::Specification> specs;
  for (auto& l : dsl::parse_spec_file(text::read_file(o.specs))) specs.push_back(std::move(l.spec));
  const auto parsed = conformance::parse_config(text::read_file(o.config), *fmt);
  for (const auto& e : parsed.errors) {
    log(c, 1, o.config + ":" + std::to_string(e.line) + ": " + e.message);
  }
  const auto violations = conformance::check(parsed.map, specs, tagger::Lexicons::load(c.lexicon_dir));
  if (!o.report.empty()) {
    text::write_file(o.report, conformance::violations_json(violations));
    write_config("check", o.report,
                 {{"specs", o.specs}, {"config", o.config}, {"format", o.format}, {"lexicon", c.lexicon_dir},
                  {"report", o.report}});
  }
  std::cerr << conformance::violations_table(violations);
  const int status = conformance::exit_status(violations);
  log(c, 1, "check: " + std::to_string(violations.size()) + " findings, " + (status ? "hard violations" : "clean"));
  return status;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Extract configuration specifications from text and check configuration files against them"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  common.lexicon_dir = tagger::Lexicons::default_dir();
  app.add_option("--lexicon", common.lexicon_dir, "Lexicon directory")->capture_default_str();
  app.add_flag_function("-v,--verbose", [&](std::int64_t n) { common.verbosity += static_cast<int>(n); },
                        "More log output (repeatable)");
  app.add_flag_function("-q,--quiet", [&](std::int64_t) { common.verbosity = 0; }, "No log output");

  IngestOpts ingest;
  auto* ing = app.add_subcommand("ingest", "Extract candidate texts from a document");
  ing->add_option("--input", ingest.input, "Document")->required();
  ing->add_option("--format", ingest.format, "plain|html|comments")->capture_default_str();
  ing->add_option("--keywords", ingest.keywords, "Keyword list")->capture_default_str();
  ing->add_option("--window", ingest.window, "Sentences per complex candidate")->capture_default_str();
  ing->add_option("--out", ingest.out, "Candidate JSONL")->required();

  ComposeOpts compose;
  auto* cmp = app.add_subcommand("compose", "Compose synthetic training and test data");
  cmp->add_option("--seeds", compose.seeds, "Seed templates (JSON)")->capture_default_str();
  cmp->add_option("--distractors", compose.distractors, "Distractor sentences")->capture_default_str();
  cmp->add_option("--negatives", compose.negatives, "Negative templates (JSON)")->capture_default_str();
  cmp->add_option("--keywords", compose.keywords, "Keyword list")->capture_default_str();
  cmp->add_option("--n", compose.n, "Training samples")->capture_default_str();
  cmp->add_option("--pos-frac", compose.pos_frac, "Positive fraction")->capture_default_str();
  cmp->add_option("--seed", compose.seed, "RNG seed")->capture_default_str();
  cmp->add_option("--holdout-every", compose.holdout_every, "Reserve every k-th seed for the test split")
      ->capture_default_str();
  cmp->add_option("--out", compose.out, "Training JSONL")->required();
  cmp->add_option("--test-out", compose.test_out, "Test JSONL");
  cmp->add_option("--test-n", compose.test_n, "Test samples")->capture_default_str();
  cmp->add_option("--manifest", compose.manifest, "Manifest path (default: next to --out)");

  TrainOpts train;
  auto* trn = app.add_subcommand("train", "Train the detection and generation model");
  trn->add_option("--data", train.data, "Training JSONL")->required();
  trn->add_option("--out", train.out, "Model checkpoint")->required();
  trn->add_option("--log", train.log_path, "Per-epoch loss CSV");
  trn->add_option("--epochs", train.train.epochs)->capture_default_str();
  trn->add_option("--batch", train.train.batch)->capture_default_str();
  trn->add_option("--lr", train.train.lr)->capture_default_str();
  trn->add_option("--seed", train.train.seed)->capture_default_str();
  trn->add_option("--clip-norm", train.train.clip_norm, "Global gradient norm limit (0 = off)")->capture_default_str();
  trn->add_option("--schedule", train.train.schedule, "Learning-rate schedule: constant|cosine")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, model::LrSchedule>{{"constant", model::LrSchedule::Constant},
                                                   {"cosine", model::LrSchedule::Cosine}}))
      ->default_str("cosine");
  trn->add_option("--d-model", train.model.d_model)->capture_default_str();
  trn->add_option("--layers", train.model.layers)->capture_default_str();
  trn->add_option("--heads", train.model.heads)->capture_default_str();
  trn->add_option("--max-len", train.model.max_len, "Minimum L_max")->capture_default_str();
  trn->add_option("--pooled", train.model.pooled)->capture_default_str();
  trn->add_option("--head-hidden", train.model.head_hidden)->capture_default_str();
  trn->add_option("--gen-hidden", train.model.gen_hidden)->capture_default_str();
  trn->add_option("--gen-embed", train.model.gen_embed)->capture_default_str();
  trn->add_option("--detection-weight", train.train.coefs.detection)->capture_default_str();
  trn->add_option("--generation-weight", train.train.coefs.generation)->capture_default_str();
  trn->add_option("--category-weight", train.train.coefs.category)->capture_default_str();

  SynthOpts synth;
  auto* syn = app.add_subcommand("synthesize", "Synthesize specifications from a document");
  syn->add_option("--model", synth.model, "Model checkpoint")->required();
  syn->add_option("--input", synth.input, "Document")->required();
  syn->add_option("--format", synth.format, "plain|html|comments")->capture_default_str();
  syn->add_option("--keywords", synth.keywords, "Keyword list")->capture_default_str();
  syn->add_option("--window", synth.window)->capture_default_str();
  syn->add_option("--max-gen-len", synth.max_gen_len)->capture_default_str();
  syn->add_option("--out", synth.out, "Specification file")->required();
  syn->add_option("--report", synth.report, "Per-candidate JSON report");

  EvalOpts ev;
  auto* evl = app.add_subcommand("eval", "Evaluate a model on labeled data");
  evl->add_option("--model", ev.model, "Model checkpoint")->required();
  evl->add_option("--data", ev.data, "Labeled JSONL")->required();
  evl->add_option("--report", ev.report, "Report JSON")->required();
  evl->add_option("--max-gen-len", ev.max_gen_len)->capture_default_str();

  CheckOpts chk;
  auto* chc = app.add_subcommand("check", "Check a configuration file against specifications");
  chc->add_option("--specs", chk.specs, "Specification file")->required();
  chc->add_option("--config", chk.config, "Configuration file")->required();
  chc->add_option("--format", chk.format, "kv|ini")->capture_default_str();
  chc->add_option("--report", chk.report, "Violation JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*ing) return do_ingest(ingest, common);
    if (*cmp) return do_compose(compose, common);
    if (*trn) return do_train(train, common);
    if (*syn) return do_synthesize(synth, common);
    if (*evl) return do_eval(ev, common);
    if (*chc) return do_check(chk, common);
  } catch (const std::exception& e) {
    std::cerr << "specsyn: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace specsyn::cli
