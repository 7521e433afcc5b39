#include "hoic/optim.hpp"

#include <cmath>

namespace hoic {

AdamW::AdamW(nn::ParamStore& store, AdamWConfig config) : store_(store), config_(config) {
  for (const auto& [name, t] : store_.params()) {
    m_[name].assign(static_cast<std::size_t>(t.size()), 0.0);
    v_[name].assign(static_cast<std::size_t>(t.size()), 0.0);
  }
}

double AdamW::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (auto& [_, t] : store_.params()) {
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (auto& [_, t] : store_.params()) {
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= s;
    }
  }
  return norm;
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto& [name, t] : store_.params()) {
    auto values = t.mutable_data();
    auto& m = m_[name];
    auto& v = v_[name];
    const bool has = t.has_grad();
    auto grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has ? grad[i] : 0.0;
      values[i] -= config_.lr * config_.weight_decay * values[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      values[i] -= config_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
    }
  }
}

}  // namespace hoic
