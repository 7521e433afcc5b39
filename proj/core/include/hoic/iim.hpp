#pragma once

#include <array>
#include <vector>

#include "hoic/backbone.hpp"
#include "hoic/pgcs.hpp"

namespace hoic {

inline constexpr int kMaskFeatureDim = 10;

struct IimConfig {
  int num_queries = 16;
  int query_dim = 64;
  int heads = 4;
  int encoder_layers = 2;
  int stages = 3;
  int ffn_dim = 128;
  bool split_box_head = false;  // separate box MLPs for humans and objects

  void validate() const;
};

/// Learned human and object queries, (N_q, C_Q) each.
struct QuerySet {
  Tensor human, object;
};

/// Decoder outputs, (B, N_q, C_Q) each.
struct DecoderState {
  Tensor d_h, d_o, d_a;
};

/// Per-query predictions. Boxes are normalized (cx, cy, w, h) in [0, 1].
struct PairPredictions {
  Tensor human_boxes;    // (B, N_q, 4)
  Tensor object_boxes;   // (B, N_q, 4)
  Tensor object_logits;  // (B, N_q, |objects|)
  Tensor action_logits;  // (B, N_q, |actions|), last = no_interaction
};

/// Fixed 2-D sinusoidal encoding, (h * w, dim). The first half of the
/// channels encodes the row, the second half the column.
Tensor positional_encoding(int h, int w, int dim);

std::array<double, 4> cxcywh_to_xyxy(const std::array<double, 4>& b, int width, int height);
std::array<double, 4> xyxy_to_cxcywh(const std::array<double, 4>& b, int width, int height);
Box to_box(const std::array<double, 4>& cxcywh, int width, int height);
std::array<double, 4> from_box(const Box& b, int width, int height);

/// (d_h + d_o) / 2.
Tensor action_queries(const Tensor& d_h, const Tensor& d_o);

/// Contact-pixel crop of the feature grid: the rectangle enclosing all
/// non-background pixels, scaled to the grid. Empty masks crop everything.
GridRect contact_crop(const ContactMap& mask, int grid_w, int grid_h);

class Iim {
 public:
  Iim() = default;
  Iim(const nn::Builder& b, int in_channels, int num_objects, int num_actions, const IimConfig& config);

  // (B, C, h, w) -> (B, h * w, C_Q).
  Tensor encode(const FeatureMap& f) const;
  // Decodes the concatenated [human; object] target and splits it.
  std::pair<Tensor, Tensor> decode_instances(int stage, const Tensor& target, const Tensor& memory) const;
  // query_pos may be undefined; later stages pass the previous d_a.
  Tensor decode_actions(int stage, const Tensor& d_h, const Tensor& d_o, const Tensor& memory,
                        const Tensor& query_pos = {}) const;
  DecoderState run_stacked_decoders(const Tensor& memory, int stages) const;
  DecoderState run_stacked_decoders(const Tensor& memory) const { return run_stacked_decoders(memory, config_.stages); }

  std::pair<Tensor, Tensor> predict_boxes(const Tensor& d_h, const Tensor& d_o) const;
  Tensor predict_object_class(const Tensor& d_o) const;
  // (B, 10) from the argmax contact masks.
  Tensor mask_guided_roi(const FeatureMap& f, const std::vector<ContactMap>& masks) const;
  Tensor mask_guided_roi(const FeatureMap& f, const SegMap& s) const;
  // Full-grid crop, used when no segmentation is available yet.
  Tensor mask_guided_roi_full(const FeatureMap& f) const;
  Tensor predict_actions(const Tensor& d_a, const Tensor& mask_feature) const;

  const IimConfig& config() const { return config_; }

  QuerySet queries;
  nn::Linear input_proj;
  std::vector<nn::EncoderLayer> encoder;
  std::vector<nn::DecoderLayer> instance_decoders, action_decoders;
  std::vector<nn::Linear> box_head, object_box_head;  // object_box_head only when split
  nn::Linear object_head;
  nn::Linear roi_fc;
  nn::Linear action_fc1, action_fc2;

 private:
  Tensor box_mlp(const std::vector<nn::Linear>& head, const Tensor& d) const;
  IimConfig config_;
};

}  // namespace hoic
