#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoic/backbone.hpp"
#include "hoic/cpam.hpp"
#include "hoic/iim.hpp"
#include "hoic/matching.hpp"
#include "hoic/metrics.hpp"
#include "hoic/pgcs.hpp"

namespace hoic {

struct AblationFlags {
  bool cpam_enabled = true;
  bool ho_enhancer_enabled = true;
  bool mask_guided_enabled = true;
};

/// How the enhancer turns boxes into grid rectangles: one rectangle around
/// every box of the image, or one per human-object pair.
enum class RoiMode { global, per_pair };
RoiMode parse_roi_mode(const std::string& name);
std::string to_string(RoiMode mode);

struct ModelConfig {
  int height = 128;
  int width = 128;
  int num_objects = 6;
  int num_actions = 9;  // includes no_interaction
  nn::NormKind norm = nn::NormKind::batch;
  BackboneConfig backbone;
  CpamConfig cpam;
  PgcsConfig pgcs;
  IimConfig iim;
  double enhancer_threshold = 0.5;
  RoiMode roi_mode = RoiMode::global;
  AblationFlags ablation;

  void validate() const;
};

/// Where the enhancer's boxes come from.
enum class BoxSource {
  ground_truth,             // annotated pairs
  matched_predictions,      // predicted boxes matched to the annotations
  thresholded_predictions,  // predicted boxes whose interaction prob >= threshold
};

struct ForwardOptions {
  BoxSource box_source = BoxSource::thresholded_predictions;
  const std::vector<std::vector<InteractionPair>>* targets = nullptr;  // required unless thresholded
  MatchWeights match_weights;
};

struct ModelOutputs {
  FeatureMap features;
  ContactPrior prior;  // undefined when CPAM is disabled
  DecoderState state;
  PairPredictions preds;
  Tensor preliminary_action_logits;  // action head on the full-grid crop, no graph
  std::vector<std::vector<GridRect>> enhancer_rects;
  Tensor decoded;  // PGCS decoder output before the gate
  SegMap seg;
  Tensor mask_feature;  // (B, 10)
};

/// All trainable state plus the forward pass.
///
/// Every parameter exists regardless of the ablation flags; the flags only
/// change which paths the forward pass takes.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ModelOutputs forward(const Tensor& images, const nn::Mode& mode, const ForwardOptions& options = {}) const;

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return config_; }
  void set_ablation(const AblationFlags& flags) { config_.ablation = flags; }

 private:
  std::vector<std::vector<GridRect>> select_rects(const FeatureMap& f, const PairPredictions& prelim,
                                                  const ForwardOptions& options) const;

  ModelConfig config_;
  nn::ParamStore store_;

 public:
  Backbone backbone;
  Cpam cpam;
  Pgcs pgcs;
  Iim iim;
};

/// One scored pair per query: the best interaction action (excluding
/// no_interaction) and object class, confidence = p_object * p_action.
std::vector<ScoredPair> decode_pairs(const PairPredictions& preds, int b, int width, int height);

}  // namespace hoic
