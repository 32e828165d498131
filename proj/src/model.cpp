#include "specsyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "specsyn/rng.hpp"

namespace specsyn::model {

namespace {

constexpr double kLnEps = 1e-5;

template <class S>
struct LnCache {
  MatrixT<S> xhat;
  Eigen::Matrix<S, Eigen::Dynamic, 1> rstd;
};

template <class S>
MatrixT<S> layer_norm(const MatrixT<S>& x, const MatrixT<S>& gain, const MatrixT<S>& bias, LnCache<S>& c) {
  const Eigen::Index n = x.rows();
  c.xhat.resize(n, x.cols());
  c.rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mean = x.row(i).mean();
    const Eigen::Array<S, 1, Eigen::Dynamic> centered = x.row(i).array() - mean;
    const S r = S(1) / std::sqrt(centered.square().mean() + S(kLnEps));
    c.xhat.row(i) = (centered * r).matrix();
    c.rstd(i) = r;
  }
  MatrixT<S> y = c.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LnCache<double>& c, const Matrix& gain, Matrix& g_gain,
                           Matrix& g_bias) {
  g_gain.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g_bias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / d;
    const double mean_dx = dxhat.row(i).dot(c.xhat.row(i)) / d;
    dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - mean_d - c.xhat.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

template <class S>
MatrixT<S> gelu(const MatrixT<S>& x) {
  return x.unaryExpr([](S v) { return S(0.5) * v * (S(1) + std::tanh(S(kGeluC) * (v + S(kGeluA) * v * v * v))); });
}

Matrix gelu_grad(const Matrix& x) {
  return x.unaryExpr([](double v) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
  });
}

template <class S>
void softmax_rows(MatrixT<S>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const S mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

template <class S>
RowVecT<S> softmax_t(const RowVecT<S>& logits) {
  const S mx = logits.maxCoeff();
  RowVecT<S> e = (logits.array() - mx).exp();
  e /= e.sum();
  return e;
}

template <class S>
RowVecT<S> sigmoid(const RowVecT<S>& x) {
  return x.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
}

template <class S>
RowVecT<S> tanh_v(const RowVecT<S>& x) {
  return x.unaryExpr([](S v) { return std::tanh(v); });
}

template <class S>
struct BlockCache {
  Eigen::Index m = 0;
  MatrixT<S> x;
  LnCache<S> ln1;
  MatrixT<S> a, q, k, v;
  std::vector<MatrixT<S>> p;
  MatrixT<S> ctx, x1;
  LnCache<S> ln2;
  MatrixT<S> b, h1, g;
};

// Only the first `m` rows of the output are computed; the last block needs
// the [CLS] row alone.
template <class S>
MatrixT<S> block_forward(const BlockParamsT<S>& bp, const MatrixT<S>& x, Eigen::Index m, int heads, BlockCache<S>& c) {
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  c.m = m;
  c.x = x;
  c.a = layer_norm(x, bp.ln1_gain, bp.ln1_bias, c.ln1);
  c.q = c.a.topRows(m) * bp.wq;
  c.q.rowwise() += bp.bq.row(0);
  c.k = c.a * bp.wk;
  c.v = c.a * bp.wv;
  c.v.rowwise() += bp.bv.row(0);
  c.p.resize(static_cast<std::size_t>(heads));
  c.ctx.resize(m, d);
  for (int h = 0; h < heads; ++h) {
    MatrixT<S> s = (c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(s);
    c.ctx.middleCols(h * dh, dh).noalias() = s * c.v.middleCols(h * dh, dh);
    c.p[static_cast<std::size_t>(h)] = std::move(s);
  }
  c.x1 = x.topRows(m) + c.ctx * bp.wo;
  c.x1.rowwise() += bp.bo.row(0);
  c.b = layer_norm(c.x1, bp.ln2_gain, bp.ln2_bias, c.ln2);
  c.h1 = c.b * bp.ff1_w;
  c.h1.rowwise() += bp.ff1_b.row(0);
  c.g = gelu(c.h1);
  MatrixT<S> out = c.x1 + c.g * bp.ff2_w;
  out.rowwise() += bp.ff2_b.row(0);
  return out;
}

Matrix block_backward(const BlockParams& bp, const BlockCache<double>& c, const Matrix& dout, int heads,
                      BlockParams& g) {
  const Eigen::Index m = c.m;
  const Eigen::Index n = c.x.rows();
  const Eigen::Index d = c.x.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  g.ff2_w.noalias() += c.g.transpose() * dout;
  g.ff2_b.row(0) += dout.colwise().sum();
  const Matrix dh1 = (dout * bp.ff2_w.transpose()).array() * gelu_grad(c.h1).array();
  g.ff1_w.noalias() += c.b.transpose() * dh1;
  g.ff1_b.row(0) += dh1.colwise().sum();
  const Matrix db = dh1 * bp.ff1_w.transpose();
  const Matrix dx1 = dout + layer_norm_backward(db, c.ln2, bp.ln2_gain, g.ln2_gain, g.ln2_bias);

  g.wo.noalias() += c.ctx.transpose() * dx1;
  g.bo.row(0) += dx1.colwise().sum();
  const Matrix dctx = dx1 * bp.wo.transpose();

  Matrix dq(m, d), dk(n, d), dv(n, d);
  for (int h = 0; h < heads; ++h) {
    const Matrix& p = c.p[static_cast<std::size_t>(h)];
    const auto dctx_h = dctx.middleCols(h * dh, dh);
    const Matrix dp = dctx_h * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = p.transpose() * dctx_h;
    const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
    Matrix ds = p.array() * (dp.array().colwise() - row_dot.array());
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += c.a.topRows(m).transpose() * dq;
  g.bq.row(0) += dq.colwise().sum();
  g.wk.noalias() += c.a.transpose() * dk;
  g.wv.noalias() += c.a.transpose() * dv;
  g.bv.row(0) += dv.colwise().sum();
  Matrix da = dk * bp.wk.transpose();
  da.noalias() += dv * bp.wv.transpose();
  da.topRows(m).noalias() += dq * bp.wq.transpose();

  Matrix dx = layer_norm_backward(da, c.ln1, bp.ln1_gain, g.ln1_gain, g.ln1_bias);
  dx.topRows(m) += dx1;
  return dx;
}

template <class S>
struct EncoderCache {
  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<BlockCache<S>> blocks;
  LnCache<S> final_ln;
  MatrixT<S> hf;  // 1 × d
  RowVecT<S> hc;
};

void check_input(const ModelConfig& config, std::span<const int> tokens) {
  if (tokens.empty() || tokens[0] != Vocab::kCls) throw Error("encoder input must start with [CLS]");
  if (static_cast<int>(tokens.size()) > config.max_len) {
    throw SequenceTooLong("sequence of " + std::to_string(tokens.size()) + " tokens exceeds L_max = " +
                          std::to_string(config.max_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= config.vocab_size) throw Error("token id " + std::to_string(t) + " outside the vocabulary");
  }
}

template <class S>
RowVecT<S> encoder_forward(const ModelConfig& config, const ParamsT<S>& params, std::span<const int> tokens,
                           EncoderCache<S>& c) {
  check_input(config, tokens);
  c.ids.clear();
  c.positions.clear();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == Vocab::kPad) continue;
    c.ids.push_back(tokens[i]);
    c.positions.push_back(static_cast<int>(i));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(c.ids.size());
  MatrixT<S> x(n, config.d_model);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = params.token_embedding.row(c.ids[static_cast<std::size_t>(i)]) +
               params.position_embedding.row(c.positions[static_cast<std::size_t>(i)]);
  }
  c.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const Eigen::Index m = l + 1 == params.blocks.size() ? 1 : n;
    x = block_forward(params.blocks[l], x, m, config.heads, c.blocks[l]);
  }
  c.hf = layer_norm(MatrixT<S>(x.topRows(1)), params.final_gain, params.final_bias, c.final_ln);
  RowVecT<S> pre = c.hf.row(0) * params.pool_w;
  pre += params.pool_b.row(0);
  c.hc = tanh_v(pre);
  return c.hc;
}

void encoder_backward(const ModelConfig& config, const Params& params, const EncoderCache<double>& c,
                      const RowVec& dhc, Params& g) {
  const RowVec dpre = dhc.array() * (1.0 - c.hc.array().square());
  g.pool_w.noalias() += c.hf.transpose() * dpre;
  g.pool_b.row(0) += dpre;
  const Matrix dhf = dpre * params.pool_w.transpose();
  Matrix dx = layer_norm_backward(dhf, c.final_ln, params.final_gain, g.final_gain, g.final_bias);
  for (std::size_t l = params.blocks.size(); l-- > 0;) {
    dx = block_backward(params.blocks[l], c.blocks[l], dx, config.heads, g.blocks[l]);
  }
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    g.token_embedding.row(c.ids[i]) += dx.row(r);
    g.position_embedding.row(c.positions[i]) += dx.row(r);
  }
}

template <class S>
struct HeadCache {
  RowVecT<S> a1, a2, p;
};

template <class S>
RowVecT<S> head_forward(const HeadParamsT<S>& h, const RowVecT<S>& x, HeadCache<S>& c) {
  RowVecT<S> z1 = x * h.w1;
  z1 += h.b1.row(0);
  c.a1 = tanh_v(z1);
  RowVecT<S> z2 = c.a1 * h.w2;
  z2 += h.b2.row(0);
  c.a2 = tanh_v(z2);
  RowVecT<S> z3 = c.a2 * h.w3;
  z3 += h.b3.row(0);
  c.p = softmax_t(z3);
  return c.p;
}

RowVec head_backward(const HeadParams& h, const HeadCache<double>& c, const RowVec& x, const RowVec& dz,
                     HeadParams& g) {
  g.w3.noalias() += c.a2.transpose() * dz;
  g.b3.row(0) += dz;
  const RowVec d2 = (dz * h.w3.transpose()).array() * (1.0 - c.a2.array().square());
  g.w2.noalias() += c.a1.transpose() * d2;
  g.b2.row(0) += d2;
  const RowVec d1 = (d2 * h.w2.transpose()).array() * (1.0 - c.a1.array().square());
  g.w1.noalias() += x.transpose() * d1;
  g.b1.row(0) += d1;
  return d1 * h.w1.transpose();
}

template <class S>
struct GenStep {
  int input = 0;
  int output = 0;
  RowVecT<S> z, i, f, gg, o, c_prev, c, tc, h, p;
};

template <class S>
struct GenCache {
  RowVecT<S> h0;
  std::vector<GenStep<S>> steps;
};

template <class S>
RowVecT<S> gen_initial(const ParamsT<S>& params, const RowVecT<S>& hc) {
  RowVecT<S> pre = hc * params.gen_init_w;
  pre += params.gen_init_b.row(0);
  return tanh_v(pre);
}

template <class S>
RowVecT<S> gen_initial_cell(const ParamsT<S>& params, const RowVecT<S>& hc) {
  RowVecT<S> c0 = hc * params.gen_cell_w;
  c0 += params.gen_cell_b.row(0);
  return c0;
}

// One LSTM step followed by the output softmax; gate values stay in `s`.
template <class S>
void lstm_step(const ParamsT<S>& params, int input, const RowVecT<S>& h, const RowVecT<S>& c, GenStep<S>& s) {
  const Eigen::Index e = params.gen_embedding.cols();
  const Eigen::Index hs = h.size();
  s.input = input;
  s.z.resize(e + hs);
  s.z.head(e) = params.gen_embedding.row(input);
  s.z.tail(hs) = h;
  RowVecT<S> gates = s.z * params.gen_w;
  gates += params.gen_b.row(0);
  s.i = sigmoid<S>(gates.segment(0, hs));
  s.f = sigmoid<S>(gates.segment(hs, hs));
  s.gg = tanh_v<S>(gates.segment(2 * hs, hs));
  s.o = sigmoid<S>(gates.segment(3 * hs, hs));
  s.c_prev = c;
  s.c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.gg);
  s.tc = tanh_v(s.c);
  s.h = s.o.cwiseProduct(s.tc);
  RowVecT<S> logits = s.h * params.gen_out_w;
  logits += params.gen_out_b.row(0);
  s.p = softmax_t(logits);
}

template <class S>
S clamped_nll(S p) {
  return -std::log(std::max(p, S(kProbabilityFloor)));
}

// Mean token cross-entropy under teacher forcing.
template <class S>
S generator_forward(const ParamsT<S>& params, const RowVecT<S>& hc, const std::vector<int>& target, GenCache<S>& c) {
  c.h0 = gen_initial(params, hc);
  const std::size_t steps = target.size() + 1;
  c.steps.resize(steps);
  RowVecT<S> h = c.h0;
  RowVecT<S> cell = gen_initial_cell(params, hc);
  S loss = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    GenStep<S>& s = c.steps[t];
    lstm_step(params, t == 0 ? Vocab::kBos : target[t - 1], h, cell, s);
    s.output = t < target.size() ? target[t] : Vocab::kEos;
    loss += clamped_nll(s.p(s.output));
    h = s.h;
    cell = s.c;
  }
  return loss / static_cast<S>(steps);
}

RowVec generator_backward(const Params& params, const GenCache<double>& c, const RowVec& hc, double coef, Params& g) {
  const Eigen::Index hs = c.h0.size();
  const Eigen::Index e = params.gen_embedding.cols();
  const double per_step = coef / static_cast<double>(c.steps.size());
  RowVec dh_next = RowVec::Zero(hs);
  RowVec dc_next = RowVec::Zero(hs);
  RowVec dgates(4 * hs);
  for (std::size_t t = c.steps.size(); t-- > 0;) {
    const GenStep<double>& s = c.steps[t];
    RowVec dlogits = s.p;
    if (s.p(s.output) >= kProbabilityFloor) {
      dlogits(s.output) -= 1.0;
      dlogits *= per_step;
    } else {
      dlogits.setZero();
    }
    g.gen_out_w.noalias() += s.h.transpose() * dlogits;
    g.gen_out_b.row(0) += dlogits;
    const RowVec dh = dlogits * params.gen_out_w.transpose() + dh_next;
    const RowVec d_o = dh.cwiseProduct(s.tc);
    const RowVec dc = dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tc.array().square()).matrix()) + dc_next;
    const RowVec di = dc.cwiseProduct(s.gg);
    const RowVec dg = dc.cwiseProduct(s.i);
    const RowVec df = dc.cwiseProduct(s.c_prev);
    dc_next = dc.cwiseProduct(s.f);
    dgates.segment(0, hs) = di.array() * s.i.array() * (1.0 - s.i.array());
    dgates.segment(hs, hs) = df.array() * s.f.array() * (1.0 - s.f.array());
    dgates.segment(2 * hs, hs) = dg.array() * (1.0 - s.gg.array().square());
    dgates.segment(3 * hs, hs) = d_o.array() * s.o.array() * (1.0 - s.o.array());
    g.gen_w.noalias() += s.z.transpose() * dgates;
    g.gen_b.row(0) += dgates;
    const RowVec dz = dgates * params.gen_w.transpose();
    g.gen_embedding.row(s.input) += dz.head(e);
    dh_next = dz.tail(hs);
  }
  const RowVec dpre = dh_next.array() * (1.0 - c.h0.array().square());
  g.gen_init_w.noalias() += hc.transpose() * dpre;
  g.gen_init_b.row(0) += dpre;
  g.gen_cell_w.noalias() += hc.transpose() * dc_next;
  g.gen_cell_b.row(0) += dc_next;
  return dpre * params.gen_init_w.transpose() + dc_next * params.gen_cell_w.transpose();
}

// d(−w ln p_y)/dz for a softmax output; zero inside the clamped region.
RowVec ce_logit_grad(const RowVec& p, int label, double factor) {
  if (p(label) < kProbabilityFloor) return RowVec::Zero(p.size());
  RowVec dz = p;
  dz(label) -= 1.0;
  return dz * factor;
}

template <class S>
struct SampleForward {
  EncoderCache<S> enc;
  RowVecT<S> hc;
  HeadCache<S> det, cat;
  GenCache<S> gen;
  bool positive = false;
  bool has_cat = false;
  S det_loss = 0, gen_loss = 0, cat_loss = 0;
};

template <class S>
void forward_sample(const ModelConfig& config, const ParamsT<S>& params, const Example& ex, const LossWeights& weights,
                    SampleForward<S>& f) {
  if (ex.label != 0 && ex.label != 1) throw Error("detection label must be 0 or 1");
  f.det_loss = f.gen_loss = f.cat_loss = S(0);
  f.hc = encoder_forward(config, params, ex.input, f.enc);
  head_forward(params.detection, f.hc, f.det);
  f.det_loss = S(weights.w[static_cast<std::size_t>(ex.label)]) * clamped_nll(f.det.p(ex.label));
  f.positive = ex.label == 1;
  if (f.positive) f.gen_loss = generator_forward(params, f.hc, ex.target, f.gen);
  f.has_cat = f.positive && ex.category >= 0;
  if (f.has_cat) {
    if (ex.category >= static_cast<int>(dsl::kCategoryCount)) throw Error("category index out of range");
    head_forward(params.category, f.hc, f.cat);
    f.cat_loss = clamped_nll(f.cat.p(ex.category));
  }
}

template <class S>
S combined(const SampleForward<S>& f, const LossCoefficients& coefs) {
  return S(coefs.detection) * f.det_loss + S(coefs.generation) * f.gen_loss + S(coefs.category) * f.cat_loss;
}

// Mean loss only, in scalar type S.
template <class S>
S batch_value(const ModelConfig& config, const ParamsT<S>& params, std::span<const Example> batch,
              const LossWeights& weights, const LossCoefficients& coefs) {
  S total = 0;
  SampleForward<S> f;
  for (const auto& ex : batch) {
    forward_sample(config, params, ex, weights, f);
    total += combined(f, coefs);
  }
  return total / static_cast<S>(batch.size());
}

double sample_loss(const ModelConfig& config, const Params& params, const Example& ex, const LossWeights& weights,
                   const LossCoefficients& coefs, double scale, Params* grad, LossParts* parts) {
  SampleForward<double> f;
  forward_sample<double>(config, params, ex, weights, f);
  if (parts) {
    parts->detection += scale * f.det_loss;
    parts->generation += scale * f.gen_loss;
    parts->category += scale * f.cat_loss;
  }
  if (grad) {
    RowVec dhc = RowVec::Zero(f.hc.size());
    bool any = false;
    if (coefs.detection != 0.0) {
      const double w = weights.w[static_cast<std::size_t>(ex.label)];
      dhc += head_backward(params.detection, f.det, f.hc, ce_logit_grad(f.det.p, ex.label, coefs.detection * scale * w),
                           grad->detection);
      any = true;
    }
    if (f.positive && coefs.generation != 0.0) {
      dhc += generator_backward(params, f.gen, f.hc, coefs.generation * scale, *grad);
      any = true;
    }
    if (f.has_cat && coefs.category != 0.0) {
      dhc += head_backward(params.category, f.cat, f.hc, ce_logit_grad(f.cat.p, ex.category, coefs.category * scale),
                           grad->category);
      any = true;
    }
    if (any) encoder_backward(config, params, f.enc, dhc, *grad);
  }
  return combined(f, coefs);
}

template <std::size_t M>
std::array<double, M> to_array(const RowVec& p) {
  std::array<double, M> out{};
  for (std::size_t i = 0; i < M; ++i) out[i] = p(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= Vocab::kReserved) throw Error("vocabulary size must exceed the reserved range");
  if (d_model <= 0 || layers <= 0 || heads <= 0 || max_len <= 1 || pooled <= 0 || head_hidden <= 0 ||
      gen_hidden <= 0 || gen_embed <= 0) {
    throw Error("model dimensions must be positive");
  }
  if (d_model % heads != 0) throw Error("d_model must be divisible by the head count");
}

Params Params::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model;
  const int ff = 4 * d;
  auto z = [](int r, int c) { return Matrix::Zero(r, c).eval(); };
  Params p;
  p.token_embedding = z(cfg.vocab_size, d);
  p.position_embedding = z(cfg.max_len, d);
  for (int l = 0; l < cfg.layers; ++l) {
    BlockParams b;
    b.ln1_gain = z(1, d);
    b.ln1_bias = z(1, d);
    b.wq = z(d, d);
    b.bq = z(1, d);
    b.wk = z(d, d);
    b.wv = z(d, d);
    b.bv = z(1, d);
    b.wo = z(d, d);
    b.bo = z(1, d);
    b.ln2_gain = z(1, d);
    b.ln2_bias = z(1, d);
    b.ff1_w = z(d, ff);
    b.ff1_b = z(1, ff);
    b.ff2_w = z(ff, d);
    b.ff2_b = z(1, d);
    p.blocks.push_back(std::move(b));
  }
  p.final_gain = z(1, d);
  p.final_bias = z(1, d);
  p.pool_w = z(d, cfg.pooled);
  p.pool_b = z(1, cfg.pooled);
  for (auto [head, classes] : {std::pair<HeadParams*, int>{&p.detection, 2}, {&p.category, 5}}) {
    head->w1 = z(cfg.pooled, cfg.head_hidden);
    head->b1 = z(1, cfg.head_hidden);
    head->w2 = z(cfg.head_hidden, cfg.head_hidden);
    head->b2 = z(1, cfg.head_hidden);
    head->w3 = z(cfg.head_hidden, classes);
    head->b3 = z(1, classes);
  }
  p.gen_init_w = z(cfg.pooled, cfg.gen_hidden);
  p.gen_init_b = z(1, cfg.gen_hidden);
  p.gen_cell_w = z(cfg.pooled, cfg.gen_hidden);
  p.gen_cell_b = z(1, cfg.gen_hidden);
  p.gen_embedding = z(cfg.vocab_size, cfg.gen_embed);
  p.gen_w = z(cfg.gen_embed + cfg.gen_hidden, 4 * cfg.gen_hidden);
  p.gen_b = z(1, 4 * cfg.gen_hidden);
  p.gen_out_w = z(cfg.gen_hidden, cfg.vocab_size);
  p.gen_out_b = z(1, cfg.vocab_size);
  return p;
}

Params Params::init(const ModelConfig& cfg, std::uint64_t seed, double scale) {
  Params p = zeros(cfg);
  Rng rng(derive_seed(seed, {0x1A17}));
  p.for_each([&](const std::string& name, Matrix& m) {
    if (name.ends_with("gain")) {
      m.setOnes();
    } else if (name.starts_with("embed.") || name == "gen.embedding") {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, 0.1 * scale);
    } else if (m.rows() == 1) {
      if (name == "gen.b") m.middleCols(cfg.gen_hidden, cfg.gen_hidden).setOnes();
    } else {
      const double sd = scale / std::sqrt(static_cast<double>(m.rows()));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, sd);
    }
  });
  return p;
}

void Params::set_zero() {
  for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

std::size_t Params::count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool Params::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

bool operator==(const Params& a, const Params& b) {
  std::vector<const Matrix*> xs;
  a.for_each([&](const std::string&, const Matrix& m) { xs.push_back(&m); });
  std::size_t i = 0;
  bool eq = true;
  b.for_each([&](const std::string&, const Matrix& m) {
    if (i >= xs.size() || xs[i]->rows() != m.rows() || xs[i]->cols() != m.cols() || *xs[i] != m) eq = false;
    ++i;
  });
  return eq && i == xs.size();
}

LossWeights LossWeights::from_counts(std::size_t negatives, std::size_t positives) {
  if (negatives == 0 || positives == 0) throw Error("training data must contain both classes");
  const double n = static_cast<double>(negatives + positives);
  LossWeights lw;
  lw.w = {n / (2.0 * static_cast<double>(negatives)), n / (2.0 * static_cast<double>(positives))};
  return lw;
}

double weighted_ce(std::span<const double> p, int label, std::span<const double> weights) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.size() || weights.size() != p.size()) {
    throw Error("weighted_ce: label or weight vector out of range");
  }
  const auto y = static_cast<std::size_t>(label);
  return weights[y] * clamped_nll(p[y]);
}

RowVec softmax(const RowVec& logits) { return softmax_t(logits); }

RowVec encode(const ModelConfig& config, const Params& params, std::span<const int> tokens) {
  EncoderCache<double> c;
  return encoder_forward(config, params, tokens, c);
}

std::array<double, 2> detect(const Params& params, const RowVec& hc) {
  HeadCache<double> c;
  return to_array<2>(head_forward(params.detection, hc, c));
}

std::array<double, 5> classify_category(const Params& params, const RowVec& hc) {
  HeadCache<double> c;
  return to_array<5>(head_forward(params.category, hc, c));
}

Generation generate(const Params& params, const RowVec& hc, int max_len, const std::vector<char>& allowed) {
  if (max_len < 1) throw Error("generation max_len must be at least 1");
  Generation out;
  RowVec h = gen_initial<double>(params, hc);
  RowVec cell = gen_initial_cell<double>(params, hc);
  int input = Vocab::kBos;
  GenStep<double> s;
  for (int t = 0; t < max_len; ++t) {
    lstm_step<double>(params, input, h, cell, s);
    int best = -1;
    for (Eigen::Index v = 0; v < s.p.size(); ++v) {
      if (v == Vocab::kPad || v == Vocab::kUnk || v == Vocab::kCls || v == Vocab::kBos) continue;
      if (!allowed.empty() && !allowed[static_cast<std::size_t>(v)]) continue;
      if (best < 0 || s.p(v) > s.p(best)) best = static_cast<int>(v);
    }
    if (best < 0 || best == Vocab::kEos) return out;
    out.tokens.push_back(best);
    input = best;
    h = s.h;
    cell = s.c;
  }
  out.truncated = true;
  return out;
}

double batch_loss(const ModelConfig& config, const Params& params, std::span<const Example> batch,
                  const LossWeights& weights, const LossCoefficients& coefs, Params* grad, LossParts* parts) {
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) total += scale * sample_loss(config, params, ex, weights, coefs, scale, grad, parts);
  return total;
}

GradCheckResult grad_check(const ModelConfig& config, const Params& params, std::span<const Example> batch,
                           const LossWeights& weights, const LossCoefficients& coefs, double epsilon,
                           bool extended_reference) {
  Params grad = Params::zeros(config);
  batch_loss(config, params, batch, weights, coefs, &grad);
  std::vector<const Matrix*> grads;
  grad.for_each([&](const std::string&, const Matrix& m) { grads.push_back(&m); });

  GradCheckResult r;
  auto run = [&](auto work) {
    using S = typename std::decay_t<decltype(work.token_embedding)>::Scalar;
    std::vector<std::pair<std::string, MatrixT<S>*>> tensors;
    work.for_each([&](const std::string& name, MatrixT<S>& m) { tensors.emplace_back(name, &m); });
    const S eps = static_cast<S>(epsilon);
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      MatrixT<S>& m = *tensors[t].second;
      double worst = 0.0;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const S orig = m.data()[i];
        m.data()[i] = orig + eps;
        const S lp = batch_value<S>(config, work, batch, weights, coefs);
        m.data()[i] = orig - eps;
        const S lm = batch_value<S>(config, work, batch, weights, coefs);
        m.data()[i] = orig;
        const double numeric = static_cast<double>((lp - lm) / (S(2) * eps));
        const double analytic = grads[t]->data()[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
        ++r.checked;
      }
      r.per_tensor.emplace_back(tensors[t].first, worst);
      if (worst > r.max_relative_error || r.worst_tensor.empty()) {
        r.max_relative_error = worst;
        r.worst_tensor = tensors[t].first;
      }
    }
  };
  if (extended_reference) {
    run(params.cast<long double>());
  } else {
    run(static_cast<const ParamsT<double>&>(params));
  }
  return r;
}

int tag_token_id(const Vocab& vocab, const tagger::TagId& id) { return vocab.id(id.token()); }

SpecModel SpecModel::create(Vocab vocab, ModelConfig config, std::uint64_t seed) {
  config.vocab_size = static_cast<int>(vocab.size());
  SpecModel m{config, Params::init(config, seed), std::move(vocab)};
  return m;
}

std::vector<int> SpecModel::input_ids(const std::vector<std::string>& tokens) const {
  std::vector<int> ids = vocab.encode_input(tokens);
  if (static_cast<int>(ids.size()) > config.max_len) ids.resize(static_cast<std::size_t>(config.max_len));
  return ids;
}

Example SpecModel::example(const std::vector<std::string>& input_tokens, bool has_spec,
                           const std::vector<std::string>& target, int category) const {
  Example ex;
  ex.input = input_ids(input_tokens);
  ex.label = has_spec ? 1 : 0;
  if (has_spec) {
    ex.target = vocab.encode(target);
    ex.category = category;
  }
  return ex;
}

Prediction SpecModel::predict(const std::vector<std::string>& input_tokens, const tagger::TagMap& tags,
                              int max_gen_len) const {
  const std::vector<int> ids = input_ids(input_tokens);
  const RowVec hc = encode(config, params, ids);
  Prediction pred;
  pred.detection = detect(params, hc);
  pred.has_spec = pred.detection[1] > pred.detection[0];
  pred.category_probs = classify_category(params, hc);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pred.category_probs.size(); ++i) {
    if (pred.category_probs[i] > pred.category_probs[best]) best = i;
  }
  pred.category = static_cast<dsl::Category>(best);
  if (!pred.has_spec) return pred;

  std::vector<char> allowed(vocab.size(), 1);
  for (int id = 5; id < Vocab::kReserved; ++id) allowed[static_cast<std::size_t>(id)] = 0;
  for (const auto& e : tags.entries()) {
    const int id = tag_token_id(vocab, e.id);
    if (id != Vocab::kUnk) allowed[static_cast<std::size_t>(id)] = 1;
  }
  const Generation g = generate(params, hc, max_gen_len, allowed);
  pred.truncated = g.truncated;
  for (int t : g.tokens) pred.tokens.push_back(vocab.token(t));
  return pred;
}

}  // namespace specsyn::model
