#pragma once

#include <vector>

#include "hoic/backbone.hpp"

namespace hoic {

/// Per-part contact probabilities, (B, 17), each in (0, 1).
struct ContactPrior {
  Tensor probs;
};

struct CpamConfig {
  double dropout = 0.1;
  void validate() const;
};

/// Global pooling, two {FC, norm, ReLU, dropout} blocks tapering C -> C/2 ->
/// C/4, then a bare FC to 17 logits and a sigmoid.
class Cpam {
 public:
  Cpam() = default;
  Cpam(const nn::Builder& b, int channels, const CpamConfig& config, nn::NormKind norm);

  Tensor logits(const FeatureMap& f, const nn::Mode& mode) const;
  ContactPrior contact_prior(const FeatureMap& f, const nn::Mode& mode) const;

  nn::Linear fc1, fc2, out;
  nn::Norm norm1, norm2;

 private:
  CpamConfig config_;
};

/// Mean BCE over all entries. gt holds B*17 values, each 0 or 1.
Tensor cpam_loss(const ContactPrior& l, const std::vector<double>& gt);

/// Flattens per-sample label vectors for cpam_loss.
std::vector<double> contact_targets(const std::vector<ContactLabels>& labels);

}  // namespace hoic
