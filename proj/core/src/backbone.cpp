#include "hoic/backbone.hpp"

namespace hoic {

void BackboneConfig::validate() const {
  if (stage_widths.size() != 5) throw ConfigError("backbone needs exactly 5 stage widths");
  for (int w : stage_widths) {
    if (w <= 0) throw ConfigError("backbone stage widths must be positive");
  }
  if (stage_widths.back() != channels) throw ConfigError("last backbone stage width must equal channels");
  if (activation != "relu" && activation != "tanh") throw ConfigError("unknown activation " + activation);
}

Backbone::Backbone(const nn::Builder& b, const BackboneConfig& config, nn::NormKind norm) : config_(config) {
  config_.validate();
  int in = 3;
  for (std::size_t i = 0; i < config_.stage_widths.size(); ++i) {
    const int out = config_.stage_widths[i];
    const nn::Builder s = b.sub("stage" + std::to_string(i));
    convs_.emplace_back(s.sub("conv"), in, out, 3, 2, 1);
    norms_.emplace_back(s.sub("norm"), out, norm);
    in = out;
  }
}

FeatureMap Backbone::extract_features(const Tensor& images, const nn::Mode& mode) const {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw ShapeError("backbone expects (B, 3, H, W), got " + shape_str(images.shape()));
  }
  if (images.dim(2) % kStride != 0 || images.dim(3) % kStride != 0) {
    throw ShapeError("image size " + std::to_string(images.dim(2)) + "x" + std::to_string(images.dim(3)) +
                     " is not a multiple of 32");
  }
  Tensor x = images;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = norms_[i](convs_[i](x), mode);
    x = config_.activation == "tanh" ? ops::tanh(x) : ops::relu(x);
  }
  return FeatureMap{x, kStride};
}

Tensor images_to_tensor(const std::vector<const SceneSample*>& samples) {
  if (samples.empty()) throw ShapeError("empty image batch");
  const int h = samples[0]->height, w = samples[0]->width;
  std::vector<double> v(samples.size() * 3 * static_cast<std::size_t>(h) * w);
  std::size_t o = 0;
  for (const SceneSample* s : samples) {
    if (s->height != h || s->width != w) throw ShapeError("images in a batch must share a size");
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) v[o++] = s->pixel(y, x, c);
      }
    }
  }
  return Tensor::from({static_cast<int>(samples.size()), 3, h, w}, std::move(v));
}

}  // namespace hoic
