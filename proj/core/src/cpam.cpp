#include "hoic/cpam.hpp"

namespace hoic {

void CpamConfig::validate() const {
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("cpam dropout must be in [0, 1)");
}

Cpam::Cpam(const nn::Builder& b, int channels, const CpamConfig& config, nn::NormKind norm) : config_(config) {
  config_.validate();
  const int h1 = std::max(1, channels / 2), h2 = std::max(1, channels / 4);
  fc1 = nn::Linear(b.sub("fcb1.fc"), channels, h1);
  norm1 = nn::Norm(b.sub("fcb1.norm"), h1, norm);
  fc2 = nn::Linear(b.sub("fcb2.fc"), h1, h2);
  norm2 = nn::Norm(b.sub("fcb2.norm"), h2, norm);
  out = nn::Linear(b.sub("out"), h2, kNumParts, nn::Init::xavier);
}

Tensor Cpam::logits(const FeatureMap& f, const nn::Mode& mode) const {
  auto block = [&](const Tensor& x, const nn::Linear& fc, const nn::Norm& norm) {
    Tensor y = ops::relu(norm(fc(x), mode));
    if (mode.training && config_.dropout > 0.0) y = ops::dropout(y, config_.dropout, *mode.rng, true);
    return y;
  };
  Tensor g = ops::global_avg_pool(f.data);
  return out(block(block(g, fc1, norm1), fc2, norm2));
}

ContactPrior Cpam::contact_prior(const FeatureMap& f, const nn::Mode& mode) const {
  return ContactPrior{ops::sigmoid(logits(f, mode))};
}

Tensor cpam_loss(const ContactPrior& l, const std::vector<double>& gt) {
  if (static_cast<std::int64_t>(gt.size()) != l.probs.size()) {
    throw ShapeError("cpam_loss: " + std::to_string(gt.size()) + " targets for " + shape_str(l.probs.shape()));
  }
  for (double v : gt) {
    if (v != 0.0 && v != 1.0) throw ValidationError("contact label " + std::to_string(v) + " is not 0 or 1");
  }
  return ops::binary_cross_entropy(l.probs, gt);
}

std::vector<double> contact_targets(const std::vector<ContactLabels>& labels) {
  std::vector<double> out;
  out.reserve(labels.size() * kNumParts);
  for (const auto& l : labels) {
    for (auto v : l) out.push_back(v);
  }
  return out;
}

}  // namespace hoic
