#include "hoic/model.hpp"

#include <algorithm>
#include <random>

namespace hoic {

RoiMode parse_roi_mode(const std::string& name) {
  if (name == "global") return RoiMode::global;
  if (name == "per_pair") return RoiMode::per_pair;
  throw ConfigError("unknown roi_mode " + name + " (expected global or per_pair)");
}

std::string to_string(RoiMode mode) { return mode == RoiMode::global ? "global" : "per_pair"; }

void ModelConfig::validate() const {
  if (height <= 0 || width <= 0 || height % kStride || width % kStride) {
    throw ConfigError("model input size must be a positive multiple of 32");
  }
  if (num_objects < 1) throw ConfigError("need at least one object class");
  if (num_actions < 2) throw ConfigError("need at least one action besides no_interaction");
  if (enhancer_threshold < 0 || enhancer_threshold > 1) throw ConfigError("enhancer_threshold must be in [0, 1]");
  backbone.validate();
  cpam.validate();
  pgcs.validate();
  iim.validate();
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const nn::Builder root{store_, rng, ""};
  const int c = config_.backbone.channels;
  backbone = Backbone(root.sub("backbone"), config_.backbone, config_.norm);
  cpam = Cpam(root.sub("cpam"), c, config_.cpam, config_.norm);
  pgcs = Pgcs(root.sub("pgcs"), c, config_.pgcs, config_.norm);
  iim = Iim(root.sub("iim"), c, config_.num_objects, config_.num_actions, config_.iim);
}

namespace {

Box clamp_box(Box b, int width, int height) {
  b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(width));
  b.x2 = std::clamp(b.x2, 0.0, static_cast<double>(width));
  b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(height));
  b.y2 = std::clamp(b.y2, 0.0, static_cast<double>(height));
  return b;
}

}  // namespace

std::vector<std::vector<GridRect>> Model::select_rects(const FeatureMap& f, const PairPredictions& prelim,
                                                       const ForwardOptions& options) const {
  const int batch = f.batch(), w = config_.width, h = config_.height;
  std::vector<std::vector<GridRect>> rects(static_cast<std::size_t>(batch));
  if (!config_.ablation.ho_enhancer_enabled) return rects;
  if (options.box_source != BoxSource::thresholded_predictions &&
      (!options.targets || static_cast<int>(options.targets->size()) != batch)) {
    throw ConfigError("forward: this box source needs one target list per sample");
  }
  const int no_int = config_.num_actions - 1;
  for (int b = 0; b < batch; ++b) {
    std::vector<Box> humans, objects;
    auto add_query = [&](int q) {
      const QueryPrediction p = query_prediction(prelim, b, q);
      humans.push_back(clamp_box(to_box(p.human_box, w, h), w, h));
      objects.push_back(clamp_box(to_box(p.object_box, w, h), w, h));
    };
    switch (options.box_source) {
      case BoxSource::ground_truth:
        for (const auto& p : (*options.targets)[static_cast<std::size_t>(b)]) {
          humans.push_back(p.human_box);
          objects.push_back(p.object_box);
        }
        break;
      case BoxSource::matched_predictions: {
        const MatchResult m =
            match_sample(prelim, b, (*options.targets)[static_cast<std::size_t>(b)], w, h, options.match_weights);
        for (auto [q, g] : m.assignment) add_query(q);
        break;
      }
      case BoxSource::thresholded_predictions:
        for (int q = 0; q < prelim.action_logits.dim(1); ++q) {
          const QueryPrediction p = query_prediction(prelim, b, q);
          if (1.0 - p.action_probs[static_cast<std::size_t>(no_int)] >= config_.enhancer_threshold) add_query(q);
        }
        break;
    }
    auto& out = rects[static_cast<std::size_t>(b)];
    if (config_.roi_mode == RoiMode::global) {
      if (auto r = enclosing_rectangle(humans, objects)) out.push_back(scale_to_grid(*r, f.grid_w(), f.grid_h()));
    } else {
      for (std::size_t i = 0; i < humans.size(); ++i) {
        const Box pair[2] = {humans[i], objects[i]};
        out.push_back(scale_to_grid(*enclosing_rectangle(pair, {}), f.grid_w(), f.grid_h()));
      }
    }
  }
  return rects;
}

ModelOutputs Model::forward(const Tensor& images, const nn::Mode& mode, const ForwardOptions& options) const {
  if (images.rank() != 4 || images.dim(2) != config_.height || images.dim(3) != config_.width) {
    throw ShapeError("forward: expected images of " + std::to_string(config_.height) + "x" +
                     std::to_string(config_.width) + ", got " + shape_str(images.shape()));
  }
  const AblationFlags& flags = config_.ablation;
  ModelOutputs out;
  out.features = backbone.extract_features(images, mode);
  const FeatureMap& f = out.features;
  const int batch = f.batch();
  if (flags.cpam_enabled) out.prior = cpam.contact_prior(f, mode);

  const Tensor memory = iim.encode(f);
  out.state = iim.run_stacked_decoders(memory);
  std::tie(out.preds.human_boxes, out.preds.object_boxes) = iim.predict_boxes(out.state.d_h, out.state.d_o);
  out.preds.object_logits = iim.predict_object_class(out.state.d_o);

  // The action head needs the segmentation, which needs the enhancer, which
  // needs interacting boxes; break the cycle with a full-grid crop.
  {
    NoGradGuard no_grad;
    const Tensor full =
        flags.mask_guided_enabled ? iim.mask_guided_roi_full(f) : Tensor::zeros({batch, kMaskFeatureDim});
    out.preliminary_action_logits = iim.predict_actions(out.state.d_a, full);
  }
  PairPredictions prelim{out.preds.human_boxes.detach(), out.preds.object_boxes.detach(),
                         out.preds.object_logits.detach(), out.preliminary_action_logits};
  out.enhancer_rects = select_rects(f, prelim, options);

  const FeatureMap enhanced = flags.ho_enhancer_enabled ? enhance_roi(f, out.enhancer_rects, pgcs.delta) : f;
  out.decoded = pgcs.decode(enhanced, mode);
  const Tensor attended = flags.cpam_enabled ? pgcs.body_attention(out.decoded, out.prior) : out.decoded;
  out.seg = pgcs.segment(attended);

  out.mask_feature = flags.mask_guided_enabled ? iim.mask_guided_roi(f, out.seg)
                                               : Tensor::zeros({batch, kMaskFeatureDim});
  out.preds.action_logits = iim.predict_actions(out.state.d_a, out.mask_feature);
  return out;
}

std::vector<ScoredPair> decode_pairs(const PairPredictions& preds, int b, int width, int height) {
  std::vector<ScoredPair> pairs;
  const int nq = preds.human_boxes.dim(1);
  for (int q = 0; q < nq; ++q) {
    const QueryPrediction p = query_prediction(preds, b, q);
    const auto obj = std::max_element(p.object_probs.begin(), p.object_probs.end());
    const auto act = std::max_element(p.action_probs.begin(), p.action_probs.end() - 1);
    ScoredPair s;
    s.human_box = clamp_box(to_box(p.human_box, width, height), width, height);
    s.object_box = clamp_box(to_box(p.object_box, width, height), width, height);
    s.object_class = static_cast<int>(obj - p.object_probs.begin());
    s.action_class = static_cast<int>(act - p.action_probs.begin());
    s.confidence = *obj * *act;
    pairs.push_back(s);
  }
  return pairs;
}

}  // namespace hoic
