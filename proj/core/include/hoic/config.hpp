#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "hoic/matching.hpp"
#include "hoic/model.hpp"
#include "hoic/scene.hpp"

namespace hoic {

struct DataConfig {
  std::string train_dir;  // read from disk when set, generated otherwise
  std::string eval_dir;
  int train_count = 8;
  int eval_count = 8;
  std::uint64_t train_seed = 0;
  std::uint64_t eval_seed = 1000000;
  int height = 128;
  int width = 128;
  int min_pairs = 1;
  int max_pairs = 2;
  int num_actions = 8;  // interaction verbs, no_interaction is added
  int num_objects = 6;
  double noise = 0.03;

  SceneConfig scene_config() const;
};

struct LossConfig {
  double alpha = 0.1;
  double beta = 0.5;
  MatchWeights match;
};

struct OptimConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double clip_norm = 0.1;  // <= 0 disables clipping
  int batch_size = 4;
  int epochs = 50;
  int max_steps = -1;  // stops early when >= 0
  bool teacher_force_boxes = true;
  int teacher_force_epochs = 2;
  std::string lr_schedule = "constant";  // or "cosine": linear warmup, then cosine decay to 0
  int warmup_steps = 0;
};

/// Everything a run needs. Serialized as one JSON document; missing keys
/// keep their defaults and unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;

  // Model config with class counts and input size taken from the data section.
  ModelConfig resolved_model() const;
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace hoic
