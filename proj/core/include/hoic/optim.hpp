#pragma once

#include <map>
#include <string>
#include <vector>

#include "hoic/nn.hpp"

namespace hoic {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay. Parameters are visited in store order.
class AdamW {
 public:
  AdamW(nn::ParamStore& store, AdamWConfig config);

  void step();
  // Rescales all gradients so their global L2 norm is at most max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  long long steps() const { return t_; }
  const AdamWConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  // Moment buffers keyed by parameter name, for checkpointing.
  std::map<std::string, std::vector<double>>& first_moments() { return m_; }
  std::map<std::string, std::vector<double>>& second_moments() { return v_; }
  const std::map<std::string, std::vector<double>>& first_moments() const { return m_; }
  const std::map<std::string, std::vector<double>>& second_moments() const { return v_; }
  void set_steps(long long t) { t_ = t; }

 private:
  nn::ParamStore& store_;
  AdamWConfig config_;
  std::map<std::string, std::vector<double>> m_, v_;
  long long t_ = 0;
};

}  // namespace hoic
