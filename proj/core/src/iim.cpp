#include "hoic/iim.hpp"

#include <algorithm>
#include <cmath>

namespace hoic {

void IimConfig::validate() const {
  if (num_queries <= 0) throw ConfigError("num_queries must be positive");
  if (query_dim <= 0 || query_dim % 4 != 0) throw ConfigError("query_dim must be a positive multiple of 4");
  if (heads <= 0 || query_dim % heads != 0) throw ConfigError("query_dim must be divisible by heads");
  if (encoder_layers < 0) throw ConfigError("encoder_layers must be non-negative");
  if (stages < 1) throw ConfigError("decoder stages must be at least 1");
  if (ffn_dim <= 0) throw ConfigError("ffn_dim must be positive");
}

Tensor positional_encoding(int h, int w, int dim) {
  const int half = dim / 2;
  std::vector<double> v(static_cast<std::size_t>(h) * w * dim, 0.0);
  const double two_pi = 2.0 * M_PI;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* row = v.data() + (static_cast<std::size_t>(y) * w + x) * dim;
      const double pos[2] = {(y + 1.0) / h * two_pi, (x + 1.0) / w * two_pi};
      for (int axis = 0; axis < 2; ++axis) {
        for (int i = 0; i < half; ++i) {
          const double freq = std::pow(10000.0, 2.0 * (i / 2) / half);
          const double a = pos[axis] / freq;
          row[axis * half + i] = i % 2 == 0 ? std::sin(a) : std::cos(a);
        }
      }
    }
  }
  return Tensor::from({h * w, dim}, std::move(v));
}

std::array<double, 4> cxcywh_to_xyxy(const std::array<double, 4>& b, int width, int height) {
  return {(b[0] - b[2] / 2) * width, (b[1] - b[3] / 2) * height, (b[0] + b[2] / 2) * width,
          (b[1] + b[3] / 2) * height};
}

std::array<double, 4> xyxy_to_cxcywh(const std::array<double, 4>& b, int width, int height) {
  return {(b[0] + b[2]) / 2 / width, (b[1] + b[3]) / 2 / height, (b[2] - b[0]) / width, (b[3] - b[1]) / height};
}

Box to_box(const std::array<double, 4>& cxcywh, int width, int height) {
  const auto x = cxcywh_to_xyxy(cxcywh, width, height);
  return Box{x[0], x[1], x[2], x[3]};
}

std::array<double, 4> from_box(const Box& b, int width, int height) {
  return xyxy_to_cxcywh({b.x1, b.y1, b.x2, b.y2}, width, height);
}

Tensor action_queries(const Tensor& d_h, const Tensor& d_o) { return ops::scale(ops::add(d_h, d_o), 0.5); }

GridRect contact_crop(const ContactMap& mask, int grid_w, int grid_h) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) == 0) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return GridRect{0, 0, grid_w, grid_h};
  const int stride = mask.width / grid_w;
  return scale_to_grid(EnclosingRect{static_cast<double>(x0), static_cast<double>(y0), x1 + 1.0, y1 + 1.0}, grid_w,
                       grid_h, stride);
}

Iim::Iim(const nn::Builder& b, int in_channels, int num_objects, int num_actions, const IimConfig& config)
    : config_(config) {
  config_.validate();
  const int d = config_.query_dim, nq = config_.num_queries;
  queries.human = b.param("queries.human", {nq, d}, nn::Init::xavier, d, d);
  queries.object = b.param("queries.object", {nq, d}, nn::Init::xavier, d, d);
  input_proj = nn::Linear(b.sub("input_proj"), in_channels, d, nn::Init::xavier);
  for (int i = 0; i < config_.encoder_layers; ++i) {
    encoder.emplace_back(b.sub("encoder" + std::to_string(i)), d, config_.heads, config_.ffn_dim);
  }
  for (int i = 0; i < config_.stages; ++i) {
    instance_decoders.emplace_back(b.sub("instance_decoder" + std::to_string(i)), d, config_.heads, config_.ffn_dim);
    action_decoders.emplace_back(b.sub("action_decoder" + std::to_string(i)), d, config_.heads, config_.ffn_dim);
  }
  auto make_box_head = [&](const std::string& name) {
    std::vector<nn::Linear> h;
    h.emplace_back(b.sub(name + ".fc0"), d, d);
    h.emplace_back(b.sub(name + ".fc1"), d, d);
    h.emplace_back(b.sub(name + ".fc2"), d, 4, nn::Init::xavier);
    return h;
  };
  box_head = make_box_head(config_.split_box_head ? "human_box_head" : "box_head");
  if (config_.split_box_head) object_box_head = make_box_head("object_box_head");
  object_head = nn::Linear(b.sub("object_head"), d, num_objects, nn::Init::xavier);
  roi_fc = nn::Linear(b.sub("roi_fc"), in_channels, kMaskFeatureDim, nn::Init::xavier);
  action_fc1 = nn::Linear(b.sub("action_head.fc0"), d + kMaskFeatureDim, d);
  action_fc2 = nn::Linear(b.sub("action_head.fc1"), d, num_actions, nn::Init::xavier);
}

Tensor Iim::encode(const FeatureMap& f) const {
  const int batch = f.batch(), c = f.channels(), h = f.grid_h(), w = f.grid_w();
  Tensor tokens = ops::permute(ops::reshape(f.data, {batch, c, h * w}), {0, 2, 1});
  Tensor x = ops::add(input_proj(tokens), positional_encoding(h, w, config_.query_dim));
  for (const auto& layer : encoder) x = layer(x);
  return x;
}

std::pair<Tensor, Tensor> Iim::decode_instances(int stage, const Tensor& target, const Tensor& memory) const {
  const int nq = config_.num_queries;
  Tensor pos = ops::concat({queries.human, queries.object}, 0);
  Tensor out = instance_decoders.at(static_cast<std::size_t>(stage))(target, memory, pos);
  return {ops::slice(out, 1, 0, nq), ops::slice(out, 1, nq, nq)};
}

Tensor Iim::decode_actions(int stage, const Tensor& d_h, const Tensor& d_o, const Tensor& memory,
                           const Tensor& query_pos) const {
  return action_decoders.at(static_cast<std::size_t>(stage))(action_queries(d_h, d_o), memory, query_pos);
}

DecoderState Iim::run_stacked_decoders(const Tensor& memory, int stages) const {
  if (stages < 1 || stages > static_cast<int>(instance_decoders.size())) {
    throw ConfigError("run_stacked_decoders: stages must be in [1, " + std::to_string(instance_decoders.size()) + "]");
  }
  const int batch = memory.dim(0), nq = config_.num_queries, d = config_.query_dim;
  Tensor q = ops::concat({queries.human, queries.object}, 0);
  // Broadcast the learned queries over the batch.
  Tensor target = ops::add(Tensor::zeros({batch, 2 * nq, d}), q);
  DecoderState s;
  for (int t = 0; t < stages; ++t) {
    auto [d_h, d_o] = decode_instances(t, target, memory);
    s.d_a = decode_actions(t, d_h, d_o, memory, s.d_a);
    s.d_h = d_h;
    s.d_o = d_o;
    target = ops::concat({d_h, d_o}, 1);
  }
  return s;
}

Tensor Iim::box_mlp(const std::vector<nn::Linear>& head, const Tensor& d) const {
  Tensor x = ops::relu(head[0](d));
  x = ops::relu(head[1](x));
  return ops::sigmoid(head[2](x));
}

std::pair<Tensor, Tensor> Iim::predict_boxes(const Tensor& d_h, const Tensor& d_o) const {
  return {box_mlp(box_head, d_h), box_mlp(config_.split_box_head ? object_box_head : box_head, d_o)};
}

Tensor Iim::predict_object_class(const Tensor& d_o) const { return object_head(d_o); }

Tensor Iim::mask_guided_roi(const FeatureMap& f, const std::vector<ContactMap>& masks) const {
  if (static_cast<int>(masks.size()) != f.batch()) throw ShapeError("mask_guided_roi: one mask per sample");
  std::vector<ops::CellRect> rects;
  for (const auto& m : masks) rects.push_back(contact_crop(m, f.grid_w(), f.grid_h()).cells());
  return roi_fc(ops::region_avg_pool(f.data, rects));
}

Tensor Iim::mask_guided_roi(const FeatureMap& f, const SegMap& s) const {
  std::vector<ContactMap> masks;
  for (int b = 0; b < s.batch(); ++b) masks.push_back(s.argmax(b));
  return mask_guided_roi(f, masks);
}

Tensor Iim::mask_guided_roi_full(const FeatureMap& f) const {
  std::vector<ops::CellRect> rects(static_cast<std::size_t>(f.batch()), ops::CellRect{0, 0, f.grid_w(), f.grid_h()});
  return roi_fc(ops::region_avg_pool(f.data, rects));
}

Tensor Iim::predict_actions(const Tensor& d_a, const Tensor& mask_feature) const {
  Tensor m = ops::repeat_rows(mask_feature, d_a.dim(1));
  Tensor x = ops::concat({d_a, m}, 2);
  return action_fc2(ops::relu(action_fc1(x)));
}

}  // namespace hoic
