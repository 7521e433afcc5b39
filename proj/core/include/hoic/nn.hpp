#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "hoic/ops.hpp"
#include "hoic/tensor.hpp"

namespace hoic::nn {

/// Named registry of trainable tensors and non-trainable buffers.
///
/// Names are dotted module paths ("pgcs.decoder.0.conv.weight"); iteration
/// order is lexicographic, which keeps checkpoints and optimizer state stable.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  std::vector<double>& add_buffer(const std::string& name, std::vector<double> init);

  std::map<std::string, Tensor>& params() { return params_; }
  const std::map<std::string, Tensor>& params() const { return params_; }
  std::map<std::string, std::vector<double>*>& buffers() { return buffers_; }
  const std::map<std::string, std::vector<double>*>& buffers() const { return buffers_; }

  void zero_grad();
  std::size_t num_scalars() const;

 private:
  std::map<std::string, Tensor> params_;
  // Points into module-owned storage (e.g. BatchNormState).
  std::map<std::string, std::vector<double>*> buffers_;
  std::vector<std::unique_ptr<std::vector<double>>> owned_buffers_;
};

enum class Init { kaiming, xavier, zeros };

Tensor init_tensor(const Shape& shape, Init init, int fan_in, int fan_out, std::mt19937_64& rng);

enum class NormKind { batch, group };
NormKind parse_norm(const std::string& name);
std::string to_string(NormKind kind);

/// Everything a module constructor needs to create parameters.
struct Builder {
  ParamStore& store;
  std::mt19937_64& rng;
  std::string prefix;

  Builder sub(const std::string& name) const;
  Tensor param(const std::string& name, const Shape& shape, Init init, int fan_in, int fan_out) const;
};

struct Mode {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // dropout source, required when training
};

class Linear {
 public:
  Linear() = default;
  Linear(const Builder& b, int in, int out, Init init = Init::kaiming, bool bias = true);
  Tensor operator()(const Tensor& x) const;
  Tensor weight, bias;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const Builder& b, int in, int out, int kernel, int stride, int pad);
  Tensor operator()(const Tensor& x) const;
  Tensor weight, bias;
  int stride = 1, pad = 0;
};

/// Batch or group normalization over (B, C) or (B, C, H, W).
class Norm {
 public:
  Norm() = default;
  Norm(const Builder& b, int channels, NormKind kind);
  // Non-copyable state lives behind a pointer so Norm stays movable.
  Tensor operator()(const Tensor& x, const Mode& mode) const;
  Tensor gamma, beta;
  NormKind kind = NormKind::batch;
  int groups = 1;
  std::shared_ptr<ops::BatchNormState> state;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const Builder& b, int dim);
  Tensor operator()(const Tensor& x) const;
  Tensor gamma, beta;
};

/// Multi-head scaled dot-product attention over (B, N, D) sequences.
class MultiheadAttention {
 public:
  MultiheadAttention() = default;
  MultiheadAttention(const Builder& b, int dim, int heads);
  Tensor operator()(const Tensor& q, const Tensor& k, const Tensor& v) const;
  Linear q_proj, k_proj, v_proj, out_proj;
  int heads = 1;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const Builder& b, int dim, int hidden);
  Tensor operator()(const Tensor& x) const;
  Linear fc1, fc2;
};

/// Post-norm transformer encoder layer.
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(const Builder& b, int dim, int heads, int hidden);
  Tensor operator()(const Tensor& x) const;
  MultiheadAttention self_attn;
  FeedForward ffn;
  LayerNorm norm1, norm2;
};

/// Post-norm decoder layer: self-attention, cross-attention to memory, FFN.
/// `query_pos`, when defined, is added to the queries and keys of the
/// self-attention and to the queries of the cross-attention.
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(const Builder& b, int dim, int heads, int hidden);
  Tensor operator()(const Tensor& tgt, const Tensor& memory, const Tensor& query_pos = {}) const;
  MultiheadAttention self_attn, cross_attn;
  FeedForward ffn;
  LayerNorm norm1, norm2, norm3;
};

}  // namespace hoic::nn
