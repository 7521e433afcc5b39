#include "hoic/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hoic::nn {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  auto [it, inserted] = params_.emplace(name, std::move(t));
  if (!inserted) throw std::logic_error("duplicate parameter name: " + name);
  return it->second;
}

std::vector<double>& ParamStore::add_buffer(const std::string& name, std::vector<double> init) {
  owned_buffers_.push_back(std::make_unique<std::vector<double>>(std::move(init)));
  auto* ptr = owned_buffers_.back().get();
  if (!buffers_.emplace(name, ptr).second) throw std::logic_error("duplicate buffer name: " + name);
  return *ptr;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += static_cast<std::size_t>(t.size());
  return n;
}

Tensor init_tensor(const Shape& shape, Init init, int fan_in, int fan_out, std::mt19937_64& rng) {
  std::vector<double> v(static_cast<std::size_t>(numel(shape)), 0.0);
  if (init == Init::kaiming) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& x : v) x = dist(rng);
  } else if (init == Init::xavier) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& x : v) x = dist(rng);
  }
  return Tensor::from(shape, std::move(v), true);
}

NormKind parse_norm(const std::string& name) {
  if (name == "batch") return NormKind::batch;
  if (name == "group") return NormKind::group;
  throw std::invalid_argument("unknown norm kind '" + name + "' (expected batch or group)");
}

std::string to_string(NormKind kind) { return kind == NormKind::batch ? "batch" : "group"; }

Builder Builder::sub(const std::string& name) const {
  return Builder{store, rng, prefix.empty() ? name : prefix + "." + name};
}

Tensor Builder::param(const std::string& name, const Shape& shape, Init init, int fan_in, int fan_out) const {
  return store.add(prefix.empty() ? name : prefix + "." + name, init_tensor(shape, init, fan_in, fan_out, rng));
}

Linear::Linear(const Builder& b, int in, int out, Init init, bool with_bias) {
  weight = b.param("weight", {out, in}, init, in, out);
  if (with_bias) bias = b.param("bias", {out}, Init::zeros, in, out);
}

Tensor Linear::operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }

Conv2d::Conv2d(const Builder& b, int in, int out, int kernel, int s, int p) : stride(s), pad(p) {
  weight = b.param("weight", {out, in, kernel, kernel}, Init::kaiming, in * kernel * kernel, out * kernel * kernel);
  bias = b.param("bias", {out}, Init::zeros, in, out);
}

Tensor Conv2d::operator()(const Tensor& x) const { return ops::conv2d(x, weight, bias, stride, pad); }

Norm::Norm(const Builder& b, int channels, NormKind k) : kind(k), state(std::make_shared<ops::BatchNormState>()) {
  gamma = b.store.add(b.prefix + ".gamma", Tensor::full({channels}, 1.0, true));
  beta = b.store.add(b.prefix + ".beta", Tensor::zeros({channels}, true));
  if (kind == NormKind::batch) {
    state->running_mean.assign(static_cast<std::size_t>(channels), 0.0);
    state->running_var.assign(static_cast<std::size_t>(channels), 1.0);
    // Register the live vectors so checkpoints capture them.
    auto& buffers = b.store.buffers();
    buffers.emplace(b.prefix + ".running_mean", &state->running_mean);
    buffers.emplace(b.prefix + ".running_var", &state->running_var);
  } else {
    groups = channels % 8 == 0 ? 8 : 1;
  }
}

Tensor Norm::operator()(const Tensor& x, const Mode& mode) const {
  if (kind == NormKind::batch) return ops::batch_norm(x, gamma, beta, *state, mode.training);
  return ops::group_norm(x, gamma, beta, groups);
}

LayerNorm::LayerNorm(const Builder& b, int dim) {
  gamma = b.store.add(b.prefix + ".gamma", Tensor::full({dim}, 1.0, true));
  beta = b.store.add(b.prefix + ".beta", Tensor::zeros({dim}, true));
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ops::layer_norm(x, gamma, beta); }

MultiheadAttention::MultiheadAttention(const Builder& b, int dim, int h) : heads(h) {
  if (dim % h != 0) throw std::invalid_argument("attention dim must be divisible by heads");
  q_proj = Linear(b.sub("q"), dim, dim, Init::xavier);
  k_proj = Linear(b.sub("k"), dim, dim, Init::xavier);
  v_proj = Linear(b.sub("v"), dim, dim, Init::xavier);
  out_proj = Linear(b.sub("out"), dim, dim, Init::xavier);
}

Tensor MultiheadAttention::operator()(const Tensor& q, const Tensor& k, const Tensor& v) const {
  const int batch = q.dim(0), nq = q.dim(1), nk = k.dim(1), dim = q.dim(2);
  const int hd = dim / heads;
  auto split = [&](const Tensor& t, int n) {
    return ops::permute(ops::reshape(t, {batch, n, heads, hd}), {0, 2, 1, 3});
  };
  Tensor qh = split(q_proj(q), nq);
  Tensor kh = split(k_proj(k), nk);
  Tensor vh = split(v_proj(v), nk);
  Tensor scores = ops::scale(ops::matmul(qh, ops::permute(kh, {0, 1, 3, 2})), 1.0 / std::sqrt(static_cast<double>(hd)));
  Tensor attn = ops::softmax_last(scores);
  Tensor ctx = ops::matmul(attn, vh);  // (B, heads, nq, hd)
  ctx = ops::reshape(ops::permute(ctx, {0, 2, 1, 3}), {batch, nq, dim});
  return out_proj(ctx);
}

FeedForward::FeedForward(const Builder& b, int dim, int hidden) {
  fc1 = Linear(b.sub("fc1"), dim, hidden, Init::xavier);
  fc2 = Linear(b.sub("fc2"), hidden, dim, Init::xavier);
}

Tensor FeedForward::operator()(const Tensor& x) const { return fc2(ops::relu(fc1(x))); }

EncoderLayer::EncoderLayer(const Builder& b, int dim, int heads, int hidden) {
  self_attn = MultiheadAttention(b.sub("self_attn"), dim, heads);
  ffn = FeedForward(b.sub("ffn"), dim, hidden);
  norm1 = LayerNorm(b.sub("norm1"), dim);
  norm2 = LayerNorm(b.sub("norm2"), dim);
}

Tensor EncoderLayer::operator()(const Tensor& x) const {
  Tensor h = norm1(ops::add(x, self_attn(x, x, x)));
  return norm2(ops::add(h, ffn(h)));
}

DecoderLayer::DecoderLayer(const Builder& b, int dim, int heads, int hidden) {
  self_attn = MultiheadAttention(b.sub("self_attn"), dim, heads);
  cross_attn = MultiheadAttention(b.sub("cross_attn"), dim, heads);
  ffn = FeedForward(b.sub("ffn"), dim, hidden);
  norm1 = LayerNorm(b.sub("norm1"), dim);
  norm2 = LayerNorm(b.sub("norm2"), dim);
  norm3 = LayerNorm(b.sub("norm3"), dim);
}

Tensor DecoderLayer::operator()(const Tensor& tgt, const Tensor& memory, const Tensor& query_pos) const {
  Tensor q = query_pos.defined() ? ops::add(tgt, query_pos) : tgt;
  Tensor h = norm1(ops::add(tgt, self_attn(q, q, tgt)));
  Tensor hq = query_pos.defined() ? ops::add(h, query_pos) : h;
  h = norm2(ops::add(h, cross_attn(hq, memory, memory)));
  return norm3(ops::add(h, ffn(h)));
}

}  // namespace hoic::nn
