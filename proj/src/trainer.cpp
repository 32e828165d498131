#include "specsyn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "specsyn/rng.hpp"

namespace specsyn::model {

namespace {

class Adam {
 public:
  Adam(const ModelConfig& config, const TrainConfig& tc) : m_(Params::zeros(config)), v_(Params::zeros(config)), tc_(tc) {}

  void step(Params& params, Params& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(tc_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(tc_.beta2, static_cast<double>(t_));
    std::vector<Matrix*> ps, gs, ms, vs;
    params.for_each([&](const std::string&, Matrix& x) { ps.push_back(&x); });
    grad.for_each([&](const std::string&, Matrix& x) { gs.push_back(&x); });
    m_.for_each([&](const std::string&, Matrix& x) { ms.push_back(&x); });
    v_.for_each([&](const std::string&, Matrix& x) { vs.push_back(&x); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto g = gs[k]->array();
      auto m = ms[k]->array();
      auto v = vs[k]->array();
      m = tc_.beta1 * m + (1.0 - tc_.beta1) * g;
      v = tc_.beta2 * v + (1.0 - tc_.beta2) * g.square();
      ps[k]->array() -= lr * (m / c1) / ((v / c2).sqrt() + tc_.adam_eps);
    }
  }

 private:
  Params m_, v_;
  TrainConfig tc_;
  long t_ = 0;
};

double grad_norm(const Params& g) {
  double sq = 0.0;
  g.for_each([&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

}  // namespace

TrainResult train(SpecModel& model, std::span<const Example> data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.empty()) throw Error("training data is empty");
  if (config.epochs < 0 || config.batch < 1) throw Error("epochs must be >= 0 and batch >= 1");
  if (config.clip_norm < 0.0) throw Error("clip norm must be >= 0");
  std::size_t positives = 0;
  for (const auto& ex : data) positives += ex.label == 1 ? 1 : 0;
  TrainResult result;
  result.weights = LossWeights::from_counts(data.size() - positives, positives);

  Adam adam(model.config, config);
  Params grad = Params::zeros(model.config);
  std::vector<std::size_t> order(data.size());
  std::vector<Example> batch;
  const std::size_t per_epoch = (data.size() + static_cast<std::size_t>(config.batch) - 1) / static_cast<std::size_t>(config.batch);
  const double total_steps = static_cast<double>(per_epoch) * config.epochs;
  std::size_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, {0x7EA1, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      grad.set_zero();
      LossParts parts;
      const double loss = batch_loss(model.config, model.params, batch, result.weights, config.coefs, &grad, &parts);
      if (!std::isfinite(loss)) {
        throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch));
      }
      if (config.clip_norm > 0.0) {
        const double norm = grad_norm(grad);
        if (norm > config.clip_norm) grad.for_each([&](const std::string&, Matrix& m) { m *= config.clip_norm / norm; });
      }
      double lr = config.lr;
      if (config.schedule == LrSchedule::Cosine) {
        lr *= 0.5 * (1.0 + std::cos(3.141592653589793 * static_cast<double>(step) / total_steps));
      }
      adam.step(model.params, grad, lr);
      ++step;
      log.loss += loss;
      log.detection += parts.detection;
      log.generation += parts.generation;
      log.category += parts.category;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    log.loss /= nb;
    log.detection /= nb;
    log.generation /= nb;
    log.category /= nb;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::string loss_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,loss,detection,generation,category\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.loss, e.detection, e.generation,
                  e.category);
    out += buf;
  }
  return out;
}

}  // namespace specsyn::model
