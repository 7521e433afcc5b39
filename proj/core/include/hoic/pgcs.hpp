#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hoic/backbone.hpp"
#include "hoic/cpam.hpp"

namespace hoic {

/// Smallest axis-aligned rectangle covering a set of boxes, in pixels.
struct EnclosingRect {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  bool operator==(const EnclosingRect&) const = default;
};

/// Feature-grid rectangle; max bounds are exclusive.
struct GridRect {
  int gx_min = 0, gy_min = 0, gx_max = 0, gy_max = 0;

  bool contains(int gx, int gy) const { return gx >= gx_min && gx < gx_max && gy >= gy_min && gy < gy_max; }
  bool empty() const { return gx_max <= gx_min || gy_max <= gy_min; }
  ops::CellRect cells() const { return {gx_min, gy_min, gx_max, gy_max}; }
  bool operator==(const GridRect&) const = default;
};

/// Component-wise min of x1/y1 and max of x2/y2 over both lists. Returns
/// nullopt when both are empty, meaning there is nothing to enhance.
std::optional<EnclosingRect> enclosing_rectangle(std::span<const Box> humans, std::span<const Box> objects);

/// Floors the mins and ceils the maxes to stride units, clamped to the grid.
/// The result always holds at least one cell.
GridRect scale_to_grid(const EnclosingRect& r, int grid_w, int grid_h, int stride = kStride);

/// Multiplies the cells covered by each sample's rectangles by delta.
/// rects[b] may be empty, leaving sample b untouched.
FeatureMap enhance_roi(const FeatureMap& f, const std::vector<std::vector<GridRect>>& rects, const Tensor& delta);

/// Per-pixel log-probabilities over background (channel 0) and the 17
/// parts, stored as (B, 18, H, W).
struct SegMap {
  Tensor log_probs;

  int batch() const { return log_probs.dim(0); }
  int height() const { return log_probs.dim(2); }
  int width() const { return log_probs.dim(3); }
  double prob(int b, int k, int y, int x) const;
  ContactMap argmax(int b) const;
};

struct PgcsConfig {
  std::vector<int> decoder_widths = {64, 64, 32, 64};  // last must be 64
  int gate_hidden = 32;
  double background_weight = 0.25;

  void validate() const;
};

class Pgcs {
 public:
  Pgcs() = default;
  Pgcs(const nn::Builder& b, int in_channels, const PgcsConfig& config, nn::NormKind norm);

  // (B, C, H/32, W/32) -> (B, 64, H/2, W/2).
  Tensor decode(const FeatureMap& f_enhanced, const nn::Mode& mode) const;
  // FC -> ReLU -> FC -> sigmoid, (B, 17) -> (B, 64).
  Tensor gate(const ContactPrior& l) const;
  Tensor body_attention(const Tensor& f_dec, const ContactPrior& l) const;
  // 1x1 conv to 18 channels, 2x upsample, log-softmax over channels.
  SegMap segment(const Tensor& f_att) const;

  Tensor delta;  // enhancer factor, initialized to 1
  std::vector<nn::Conv2d> dec_convs;
  std::vector<nn::Norm> dec_norms;
  nn::Linear gate_fc1, gate_fc2;
  nn::Conv2d head;

  const PgcsConfig& config() const { return config_; }

 private:
  PgcsConfig config_;
};

/// x (B, C, H, W) scaled per channel by gate (B, C).
Tensor apply_gate(const Tensor& f_dec, const Tensor& gate);

/// Weighted mean pixel cross-entropy; background pixels weigh bg_weight.
Tensor seg_loss(const SegMap& s, std::span<const ContactMap> gt, double bg_weight);

}  // namespace hoic
