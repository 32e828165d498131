#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "specsyn/model.hpp"

namespace specsyn::model {

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  int epochs = 100;
  int batch = 32;
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LrSchedule schedule = LrSchedule::Cosine;  // cosine decays lr to 0 over all steps
  double clip_norm = 1.0;                     // global gradient norm limit, 0 = off
  std::uint64_t seed = 42;
  LossCoefficients coefs;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double detection = 0.0;
  double generation = 0.0;
  double category = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  LossWeights weights;
};

// Mini-batch Adam over `data`, reshuffled every epoch. Gradients are summed
// serially in sample order, so a run is a pure function of its inputs.
TrainResult train(SpecModel& model, std::span<const Example> data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

std::string loss_csv(const std::vector<EpochLog>& log);

}  // namespace specsyn::model
