#pragma once

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoic/config.hpp"
#include "hoic/dataset.hpp"
#include "hoic/model.hpp"
#include "hoic/optim.hpp"

namespace hoic {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepRecord {
  long long step = 0;
  int epoch = 0;
  LossReport loss;
  double grad_norm = 0;
  double lr = 0;
  double seconds = 0;
};

nlohmann::json to_json(const StepRecord& r);

struct BatchLoss {
  Tensor total;
  LossReport report;
};

/// Matching, contact-prior and segmentation losses for one forward pass.
/// The matching loss is averaged over samples.
BatchLoss compute_loss(const ModelOutputs& out, const std::vector<const SceneSample*>& batch, const RunConfig& config);

/// Learning rate for optimizer step `step` (0-based) out of `total_steps`.
double scheduled_lr(const OptimConfig& optim, long long step, long long total_steps);

/// Loads the split from disk when its directory is configured, otherwise
/// generates it from the split's seed.
Dataset load_split(const DataConfig& data, bool eval);

class Trainer {
 public:
  Trainer(const RunConfig& config, const Dataset& train);

  // Trains until the epoch budget or max_steps is exhausted.
  void run(const std::function<void(const StepRecord&)>& on_step = {});
  StepRecord train_step(const std::vector<int>& indices, int epoch);

  Model& model() { return *model_; }
  AdamW& optimizer() { return *optimizer_; }
  long long step() const { return step_; }
  const RunConfig& config() const { return config_; }

 private:
  RunConfig config_;
  const Dataset& data_;
  std::unique_ptr<Model> model_;
  std::unique_ptr<AdamW> optimizer_;
  std::mt19937_64 order_rng_, dropout_rng_;
  long long step_ = 0;
  long long total_steps_ = 0;
};

struct Evaluation {
  MetricsReport report;
  std::vector<ContactMap> pred_maps;
  std::vector<std::vector<ScoredPair>> pairs;
};

Evaluation evaluate(const Model& model, const Dataset& data, int batch_size = 4);

}  // namespace hoic
