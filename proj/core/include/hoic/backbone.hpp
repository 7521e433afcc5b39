#pragma once

#include <string>
#include <vector>

#include "hoic/nn.hpp"
#include "hoic/scene.hpp"

namespace hoic {

/// Shared stride-32 feature map, stored as (B, C, H/32, W/32).
struct FeatureMap {
  Tensor data;
  int stride = kStride;

  int batch() const { return data.dim(0); }
  int channels() const { return data.dim(1); }
  int grid_h() const { return data.dim(2); }
  int grid_w() const { return data.dim(3); }
};

struct BackboneConfig {
  int channels = 64;
  // Output width of each of the five stride-2 stages; the last equals channels.
  std::vector<int> stage_widths = {16, 32, 48, 64, 64};
  std::string activation = "relu";  // "relu" or "tanh"

  void validate() const;
};

/// Five {3x3 stride-2 conv, norm, activation} stages.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const nn::Builder& b, const BackboneConfig& config, nn::NormKind norm);

  // images: (B, 3, H, W) with H and W multiples of 32.
  FeatureMap extract_features(const Tensor& images, const nn::Mode& mode) const;

  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::Norm> norms_;
};

/// Packs HWC float images into a (B, 3, H, W) tensor.
Tensor images_to_tensor(const std::vector<const SceneSample*>& samples);

}  // namespace hoic
