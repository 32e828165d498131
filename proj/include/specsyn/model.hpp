#pragma once

// Detection + generation network: a pre-norm self-attention encoder whose
// pooled [CLS] vector feeds a detection head, a category head and an LSTM
// specification generator. Forward and backward passes are written by hand;
// the forward pass is also instantiated in long double for gradient checks.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specsyn/dsl.hpp"
#include "specsyn/error.hpp"
#include "specsyn/tagger.hpp"
#include "specsyn/vocab.hpp"

namespace specsyn::model {

template <class S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using RowVecT = Eigen::Matrix<S, 1, Eigen::Dynamic>;
using Matrix = MatrixT<double>;
using RowVec = RowVecT<double>;

class SequenceTooLong : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int max_len = 64;  // including [CLS]
  int pooled = 64;   // d_c
  int head_hidden = 50;
  int gen_hidden = 20;
  int gen_embed = 32;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class S>
struct BlockParamsT {
  MatrixT<S> ln1_gain, ln1_bias;
  MatrixT<S> wq, bq, wk, wv, bv, wo, bo;  // no key bias: it shifts a whole score row
  MatrixT<S> ln2_gain, ln2_bias;
  MatrixT<S> ff1_w, ff1_b, ff2_w, ff2_b;
};

// in → hidden → hidden → classes, tanh activations.
template <class S>
struct HeadParamsT {
  MatrixT<S> w1, b1, w2, b2, w3, b3;
};

template <class S>
struct ParamsT {
  MatrixT<S> token_embedding;     // V × d
  MatrixT<S> position_embedding;  // L_max × d
  std::vector<BlockParamsT<S>> blocks;
  MatrixT<S> final_gain, final_bias;
  MatrixT<S> pool_w, pool_b;  // d × d_c
  HeadParamsT<S> detection;   // 2 classes
  HeadParamsT<S> category;    // 5 classes
  MatrixT<S> gen_init_w, gen_init_b;  // d_c × H
  MatrixT<S> gen_cell_w, gen_cell_b;  // d_c × H, initial cell state
  MatrixT<S> gen_embedding;           // V × E
  MatrixT<S> gen_w, gen_b;            // (E + H) × 4H, gate order i f g o
  MatrixT<S> gen_out_w, gen_out_b;    // H × V

  template <class F>
  void for_each(F&& f);
  template <class F>
  void for_each(F&& f) const {
    const_cast<ParamsT*>(this)->for_each([&](const std::string& name, MatrixT<S>& m) {
      f(name, static_cast<const MatrixT<S>&>(m));
    });
  }

  template <class T>
  ParamsT<T> cast() const {
    ParamsT<T> out;
    out.blocks.resize(blocks.size());
    std::vector<const MatrixT<S>*> src;
    for_each([&](const std::string&, const MatrixT<S>& m) { src.push_back(&m); });
    std::size_t i = 0;
    out.for_each([&](const std::string&, MatrixT<T>& m) { m = src[i++]->template cast<T>(); });
    return out;
  }
};

template <class S>
template <class F>
void ParamsT<S>::for_each(F&& f) {
  f("embed.token", token_embedding);
  f("embed.position", position_embedding);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    auto& b = blocks[l];
    const std::string p = "block" + std::to_string(l) + ".";
    f(p + "ln1.gain", b.ln1_gain);
    f(p + "ln1.bias", b.ln1_bias);
    f(p + "attn.wq", b.wq);
    f(p + "attn.bq", b.bq);
    f(p + "attn.wk", b.wk);
    f(p + "attn.wv", b.wv);
    f(p + "attn.bv", b.bv);
    f(p + "attn.wo", b.wo);
    f(p + "attn.bo", b.bo);
    f(p + "ln2.gain", b.ln2_gain);
    f(p + "ln2.bias", b.ln2_bias);
    f(p + "ff1.w", b.ff1_w);
    f(p + "ff1.b", b.ff1_b);
    f(p + "ff2.w", b.ff2_w);
    f(p + "ff2.b", b.ff2_b);
  }
  f("final.gain", final_gain);
  f("final.bias", final_bias);
  f("pool.w", pool_w);
  f("pool.b", pool_b);
  for (auto [name, h] : {std::pair<const char*, HeadParamsT<S>*>{"detect.", &detection}, {"category.", &category}}) {
    f(std::string(name) + "w1", h->w1);
    f(std::string(name) + "b1", h->b1);
    f(std::string(name) + "w2", h->w2);
    f(std::string(name) + "b2", h->b2);
    f(std::string(name) + "w3", h->w3);
    f(std::string(name) + "b3", h->b3);
  }
  f("gen.init_w", gen_init_w);
  f("gen.init_b", gen_init_b);
  f("gen.cell_w", gen_cell_w);
  f("gen.cell_b", gen_cell_b);
  f("gen.embedding", gen_embedding);
  f("gen.w", gen_w);
  f("gen.b", gen_b);
  f("gen.out_w", gen_out_w);
  f("gen.out_b", gen_out_b);
}

using BlockParams = BlockParamsT<double>;
using HeadParams = HeadParamsT<double>;

struct Params : ParamsT<double> {
  // All tensors with the shapes of `config`, zero-filled.
  static Params zeros(const ModelConfig& config);
  // Random initialization; `scale` multiplies every weight's standard deviation.
  static Params init(const ModelConfig& config, std::uint64_t seed, double scale = 1.0);

  void set_zero();
  std::size_t count() const;
  bool all_finite() const;
  friend bool operator==(const Params& a, const Params& b);
};

// One training/evaluation example in id space.
struct Example {
  std::vector<int> input;   // [CLS] + tokens, length ≤ max_len
  int label = 0;            // 1 = has specification
  std::vector<int> target;  // specification token ids without [BOS]/[EOS]
  int category = -1;        // dsl::Category index, -1 for negatives
};

struct LossWeights {
  std::array<double, 2> w{1.0, 1.0};
  // w_c = n / (2 · n_c); throws when a class is absent.
  static LossWeights from_counts(std::size_t negatives, std::size_t positives);
};

struct LossCoefficients {
  double detection = 1.0;
  double generation = 1.0;
  double category = 1.0;
};

struct LossParts {
  double detection = 0.0;
  double generation = 0.0;
  double category = 0.0;
};

inline constexpr double kProbabilityFloor = 1e-12;

// −w_y · ln(max(p_y, 1e-12)).
double weighted_ce(std::span<const double> p, int label, std::span<const double> weights);

// Numerically stable softmax.
RowVec softmax(const RowVec& logits);

// Pooled [CLS] representation. [PAD] positions are skipped; the remaining
// tokens keep their original positions.
RowVec encode(const ModelConfig& config, const Params& params, std::span<const int> tokens);

std::array<double, 2> detect(const Params& params, const RowVec& hc);
std::array<double, 5> classify_category(const Params& params, const RowVec& hc);

struct Generation {
  std::vector<int> tokens;
  bool truncated = false;
};

// Greedy decoding from [BOS]. When `allowed` is non-empty, ids with
// allowed[id] == 0 are never emitted.
Generation generate(const Params& params, const RowVec& hc, int max_len, const std::vector<char>& allowed = {});

// Mean loss over `batch` under the coefficient-weighted sum of the three
// losses. When `grad` is non-null, the gradient of that mean is added to it.
double batch_loss(const ModelConfig& config, const Params& params, std::span<const Example> batch,
                  const LossWeights& weights, const LossCoefficients& coefs, Params* grad = nullptr,
                  LossParts* parts = nullptr);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
  std::vector<std::pair<std::string, double>> per_tensor;
};

// Central finite differences over every parameter entry. With
// `extended_reference`, the perturbed losses are evaluated in long double so
// the reference is not dominated by double rounding where |gradient| is tiny;
// the analytic gradient is always the double-precision one.
GradCheckResult grad_check(const ModelConfig& config, const Params& params, std::span<const Example> batch,
                           const LossWeights& weights, const LossCoefficients& coefs = {}, double epsilon = 1e-5,
                           bool extended_reference = true);

struct Prediction {
  std::array<double, 2> detection{};
  bool has_spec = false;
  std::array<double, 5> category_probs{};
  dsl::Category category = dsl::Category::Quantitative;
  std::vector<std::string> tokens;  // empty when !has_spec
  bool truncated = false;
};

// Network plus vocabulary: the unit that is trained, saved and loaded.
struct SpecModel {
  ModelConfig config;
  Params params;
  Vocab vocab;

  static SpecModel create(Vocab vocab, ModelConfig config, std::uint64_t seed);

  // [CLS] + ids, truncated to max_len.
  std::vector<int> input_ids(const std::vector<std::string>& tokens) const;
  Example example(const std::vector<std::string>& input_tokens, bool has_spec,
                  const std::vector<std::string>& target, int category) const;

  // Generation never emits a tag atom that is absent from `tags`.
  Prediction predict(const std::vector<std::string>& input_tokens, const tagger::TagMap& tags,
                     int max_gen_len = 24) const;
};

// Vocabulary id of a tag atom.
int tag_token_id(const Vocab& vocab, const tagger::TagId& id);

}  // namespace specsyn::model
