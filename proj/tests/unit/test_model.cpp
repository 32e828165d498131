#include <doctest.h>

#include <cmath>

#include "specsyn/checkpoint.hpp"
#include "specsyn/trainer.hpp"
#include "support.hpp"

using namespace specsyn;
using namespace specsyn::model;

namespace {

Vocab toy_vocab() {
  std::vector<std::vector<std::string>> seqs = {{"alpha", "beta", "gamma", "delta", "==", ">", "<", "in", "[", "]", ",",
                                                 "use", "(", ")", "and", "or", "set", "the", "value"}};
  return Vocab::build(seqs);
}

}  // namespace

TEST_CASE("vocab reserves fixed ids") {
  Vocab v = toy_vocab();
  CHECK(v.id("[PAD]") == Vocab::kPad);
  CHECK(v.id("[UNK]") == Vocab::kUnk);
  CHECK(v.id("[CLS]") == Vocab::kCls);
  CHECK(v.id("[BOS]") == Vocab::kBos);
  CHECK(v.id("[EOS]") == Vocab::kEos);
  CHECK(v.id("<keyword1>") == 5);
  CHECK(v.id("<format8>") == Vocab::kReserved - 1);
  CHECK(v.id("never-seen") == Vocab::kUnk);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.id(v.token(static_cast<int>(i))) == static_cast<int>(i));
  CHECK(Vocab::from_tokens(v.tokens()).tokens() == v.tokens());
}

TEST_CASE("weighted cross entropy") {
  const std::vector<double> p{0.5, 0.5};
  CHECK(weighted_ce(p, 1, std::vector<double>{1, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(weighted_ce(p, 1, std::vector<double>{1, 3}) == doctest::Approx(3 * std::log(2.0)).epsilon(1e-12));
  CHECK(weighted_ce(std::vector<double>{1.0, 0.0}, 1, std::vector<double>{1, 1}) ==
        doctest::Approx(-std::log(1e-12)));

  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform();
    const std::vector<double> q{a, 1 - a};
    const int y = static_cast<int>(rng.index(2));
    const double expect = -std::log(std::max(q[static_cast<std::size_t>(y)], 1e-12));
    CHECK(weighted_ce(q, y, std::vector<double>{1, 1}) == expect);
  }
  CHECK_THROWS_AS(weighted_ce(p, 2, std::vector<double>{1, 1}), Error);
}

TEST_CASE("class weights from counts") {
  auto w = LossWeights::from_counts(50, 50);
  CHECK(w.w[0] == 1.0);
  CHECK(w.w[1] == 1.0);
  w = LossWeights::from_counts(2100, 900);
  CHECK(w.w[0] == doctest::Approx(3000.0 / 4200.0));
  CHECK(w.w[1] == doctest::Approx(3000.0 / 1800.0));
  CHECK_THROWS_AS(LossWeights::from_counts(10, 0), Error);
}

TEST_CASE("encoder shape, finiteness and masking") {
  const Vocab v = toy_vocab();
  const auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  const Params p = Params::init(cfg, 1);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::vector<int> ids{Vocab::kCls};
    const auto len = rng.uniform_int(0, cfg.max_len - 1);
    for (std::int64_t t = 0; t < len; ++t) ids.push_back(static_cast<int>(rng.uniform_int(0, cfg.vocab_size - 1)));
    const RowVec hc = encode(cfg, p, ids);
    REQUIRE(hc.size() == cfg.pooled);
    REQUIRE(hc.allFinite());
  }

  std::vector<int> base{Vocab::kCls, 20, 21, 22};
  std::vector<int> padded{Vocab::kCls, 20, 21, 22, Vocab::kPad, Vocab::kPad};
  CHECK(encode(cfg, p, base) == encode(cfg, p, padded));
  std::vector<int> gap_a{Vocab::kCls, 20, Vocab::kPad, 22};
  std::vector<int> gap_b{Vocab::kCls, 20, Vocab::kPad, 22, Vocab::kPad};
  CHECK(encode(cfg, p, gap_a) == encode(cfg, p, gap_b));

  std::vector<int> too_long(static_cast<std::size_t>(cfg.max_len + 1), 20);
  too_long[0] = Vocab::kCls;
  CHECK_THROWS_AS(encode(cfg, p, too_long), SequenceTooLong);
  CHECK_THROWS_AS(encode(cfg, p, std::vector<int>{20, 21}), Error);
}

TEST_CASE("heads normalize; zero heads are uniform") {
  const Vocab v = toy_vocab();
  const auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  Params p = Params::init(cfg, 2);
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    RowVec hc(cfg.pooled);
    for (int k = 0; k < cfg.pooled; ++k) hc(k) = rng.normal(0, 3);
    const auto d = detect(p, hc);
    const auto c = classify_category(p, hc);
    CHECK(std::abs(d[0] + d[1] - 1.0) <= 1e-12);
    double s = 0;
    for (double x : c) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  p.detection.w3.setZero();
  p.detection.b3.setZero();
  p.category.w3.setZero();
  p.category.b3.setZero();
  const RowVec hc = RowVec::Constant(cfg.pooled, 0.3);
  const auto d = detect(p, hc);
  CHECK(d[0] == 0.5);
  CHECK(d[1] == 0.5);
  for (double x : classify_category(p, hc)) CHECK(x == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("greedy generation is bounded and deterministic") {
  const Vocab v = toy_vocab();
  const auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  Params p = Params::init(cfg, 4);
  const RowVec hc = encode(cfg, p, std::vector<int>{Vocab::kCls, 20, 21});
  const Generation one = generate(p, hc, 1);
  CHECK(one.tokens.size() <= 1);
  CHECK(one.truncated == !one.tokens.empty());
  const Generation a = generate(p, hc, 24);
  const Generation b = generate(p, hc, 24);
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens.size() <= 24);
  for (int t : a.tokens) {
    CHECK(t != Vocab::kBos);
    CHECK(t != Vocab::kPad);
    CHECK(t != Vocab::kEos);
  }

  // Forcing [EOS] to be the most likely first token yields an empty output.
  p.gen_out_b(0, Vocab::kEos) = 100.0;
  const Generation e = generate(p, hc, 1);
  CHECK(e.tokens.empty());
  CHECK_FALSE(e.truncated);

  std::vector<char> allowed(v.size(), 1);
  p.gen_out_b(0, Vocab::kEos) = 0.0;
  p.gen_out_b(0, 30) = 100.0;
  CHECK(generate(p, hc, 3, allowed).tokens.front() == 30);
  allowed[30] = 0;
  for (int t : generate(p, hc, 3, allowed).tokens) CHECK(t != 30);
}

TEST_CASE("gradient check: linear softmax layer") {
  // With only the detection loss active, the output layer is a plain
  // linear-softmax map of its inputs.
  const Vocab v = toy_vocab();
  auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  const Params p = Params::init(cfg, 11, 0.5);
  const auto batch = testing::random_examples(4, cfg.vocab_size, 12, cfg.max_len);
  const LossWeights w = LossWeights::from_counts(2, 2);
  LossCoefficients only_detection{1.0, 0.0, 0.0};
  const auto r = grad_check(cfg, p, batch, w, only_detection);
  for (const auto& [name, err] : r.per_tensor) {
    if (name == "detect.w3" || name == "detect.b3") CHECK_MESSAGE(err < 1e-7, name);
  }

}

TEST_CASE("gradient check: full network") {
  const Vocab v = toy_vocab();
  const auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  const Params p = Params::init(cfg, 21, 1.0);
  auto batch = testing::random_examples(4, cfg.vocab_size, 22, cfg.max_len);
  batch[0].input.push_back(Vocab::kPad);
  batch[0].input.push_back(30);
  const auto r = grad_check(cfg, p, batch, LossWeights::from_counts(3, 1));
  MESSAGE("max relative error " << r.max_relative_error << " in " << r.worst_tensor);
  CHECK(r.checked == p.count());
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("zero loss coefficients give a zero gradient") {
  const Vocab v = toy_vocab();
  const auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  const Params p = Params::init(cfg, 3);
  const auto batch = testing::random_examples(4, cfg.vocab_size, 4, cfg.max_len);
  Params g = Params::zeros(cfg);
  batch_loss(cfg, p, batch, LossWeights{}, LossCoefficients{0, 0, 0}, &g);
  CHECK(g == Params::zeros(cfg));
}

TEST_CASE("training: lr 0 is a no-op, seeds are reproducible, toy set is learned") {
  const Vocab v = toy_vocab();
  auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  const auto data = testing::random_examples(20, cfg.vocab_size, 7, cfg.max_len);

  SpecModel frozen{cfg, Params::init(cfg, 1), v};
  const Params before = frozen.params;
  TrainConfig tc;
  tc.epochs = 3;
  tc.lr = 0.0;
  tc.batch = 8;
  train(frozen, data, tc);
  CHECK(frozen.params == before);

  tc.lr = 1e-3;
  tc.epochs = 200;
  SpecModel a{cfg, Params::init(cfg, 1), v};
  SpecModel b{cfg, Params::init(cfg, 1), v};
  const auto la = train(a, data, tc);
  const auto lb = train(b, data, tc);
  CHECK(checkpoint::serialize(a) == checkpoint::serialize(b));
  CHECK(la.log.back().loss < la.log.front().loss);

  int correct = 0;
  for (const auto& ex : data) {
    const auto d = detect(a.params, encode(cfg, a.params, ex.input));
    correct += (d[1] > d[0]) == (ex.label == 1);
  }
  CHECK(correct == 20);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  const Vocab v = toy_vocab();
  const auto cfg = testing::tiny_config(static_cast<int>(v.size()));
  SpecModel m{cfg, Params::init(cfg, 8), v};
  const auto dir = testing::scratch("ckpt");
  checkpoint::save(m, (dir / "m.spsy").string());
  const SpecModel r = checkpoint::load((dir / "m.spsy").string());
  CHECK(r.config == m.config);
  CHECK(r.vocab.tokens() == m.vocab.tokens());
  CHECK(r.params == m.params);
  const std::vector<int> ids{Vocab::kCls, 20, 25, 26};
  CHECK(encode(cfg, r.params, ids) == encode(cfg, m.params, ids));

  std::string bytes = checkpoint::serialize(m);
  CHECK(bytes.substr(0, 4) == "SPSY");
  std::string bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(checkpoint::deserialize(bad_version), checkpoint::FormatError);
  CHECK_THROWS_AS(checkpoint::deserialize("NOPE"), checkpoint::FormatError);
  CHECK_THROWS_AS(checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), checkpoint::FormatError);
}
