#include "hoic/pgcs.hpp"

#include <algorithm>
#include <cmath>

namespace hoic {

std::optional<EnclosingRect> enclosing_rectangle(std::span<const Box> humans, std::span<const Box> objects) {
  if (humans.empty() && objects.empty()) return std::nullopt;
  EnclosingRect r{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (auto list : {humans, objects}) {
    for (const Box& b : list) {
      r.x_min = std::min(r.x_min, b.x1);
      r.y_min = std::min(r.y_min, b.y1);
      r.x_max = std::max(r.x_max, b.x2);
      r.y_max = std::max(r.y_max, b.y2);
    }
  }
  return r;
}

GridRect scale_to_grid(const EnclosingRect& r, int grid_w, int grid_h, int stride) {
  const double s = stride;
  GridRect g;
  g.gx_min = std::clamp(static_cast<int>(std::floor(r.x_min / s)), 0, grid_w - 1);
  g.gy_min = std::clamp(static_cast<int>(std::floor(r.y_min / s)), 0, grid_h - 1);
  g.gx_max = std::clamp(static_cast<int>(std::ceil(r.x_max / s)), g.gx_min + 1, grid_w);
  g.gy_max = std::clamp(static_cast<int>(std::ceil(r.y_max / s)), g.gy_min + 1, grid_h);
  return g;
}

FeatureMap enhance_roi(const FeatureMap& f, const std::vector<std::vector<GridRect>>& rects, const Tensor& delta) {
  const int batch = f.batch(), gh = f.grid_h(), gw = f.grid_w();
  if (static_cast<int>(rects.size()) != batch) throw ShapeError("enhance_roi: one rectangle list per sample");
  std::vector<std::vector<std::uint8_t>> masks(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    auto& m = masks[static_cast<std::size_t>(b)];
    m.assign(static_cast<std::size_t>(gh) * gw, 0);
    for (const GridRect& g : rects[static_cast<std::size_t>(b)]) {
      if (g.gx_min < 0 || g.gy_min < 0 || g.gx_max > gw || g.gy_max > gh) {
        throw ShapeError("enhance_roi: grid rectangle outside the feature map");
      }
      for (int y = g.gy_min; y < g.gy_max; ++y) {
        for (int x = g.gx_min; x < g.gx_max; ++x) m[static_cast<std::size_t>(y) * gw + x] = 1;
      }
    }
  }
  return FeatureMap{ops::scale_cells(f.data, delta, masks), f.stride};
}

double SegMap::prob(int b, int k, int y, int x) const { return std::exp(log_probs.at({b, k, y, x})); }

ContactMap SegMap::argmax(int b) const {
  const int k_count = log_probs.dim(1), h = height(), w = width();
  const auto v = log_probs.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t base = static_cast<std::size_t>(b) * k_count * plane;
  ContactMap m(h, w);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    for (int k = 1; k < k_count; ++k) {
      if (v[base + k * plane + p] > v[base + best * plane + p]) best = k;
    }
    m.labels[p] = static_cast<std::uint8_t>(best);
  }
  return m;
}

void PgcsConfig::validate() const {
  if (decoder_widths.size() != 4) throw ConfigError("pgcs decoder needs exactly 4 stage widths");
  if (decoder_widths.back() != 64) throw ConfigError("last pgcs decoder width must be 64");
  for (int w : decoder_widths) {
    if (w <= 0) throw ConfigError("pgcs decoder widths must be positive");
  }
  if (gate_hidden <= 0) throw ConfigError("pgcs gate_hidden must be positive");
  if (background_weight <= 0.0) throw ConfigError("background weight must be positive");
}

Pgcs::Pgcs(const nn::Builder& b, int in_channels, const PgcsConfig& config, nn::NormKind norm) : config_(config) {
  config_.validate();
  delta = b.store.add(b.prefix + ".enhancer.delta", Tensor::full({1}, 1.0, true));
  int in = in_channels;
  for (std::size_t i = 0; i < config_.decoder_widths.size(); ++i) {
    const int out = config_.decoder_widths[i];
    const nn::Builder s = b.sub("decoder" + std::to_string(i));
    dec_convs.emplace_back(s.sub("conv"), in, out, 3, 1, 1);
    dec_norms.emplace_back(s.sub("norm"), out, norm);
    in = out;
  }
  gate_fc1 = nn::Linear(b.sub("gate.fc1"), kNumParts, config_.gate_hidden);
  gate_fc2 = nn::Linear(b.sub("gate.fc2"), config_.gate_hidden, 64, nn::Init::xavier);
  head = nn::Conv2d(b.sub("head"), 64, kNumParts + 1, 1, 1, 0);
}

Tensor Pgcs::decode(const FeatureMap& f_enhanced, const nn::Mode& mode) const {
  Tensor x = f_enhanced.data;
  for (std::size_t i = 0; i < dec_convs.size(); ++i) {
    x = ops::upsample2x(ops::relu(dec_norms[i](dec_convs[i](x), mode)));
  }
  return x;
}

Tensor Pgcs::gate(const ContactPrior& l) const { return ops::sigmoid(gate_fc2(ops::relu(gate_fc1(l.probs)))); }

Tensor Pgcs::body_attention(const Tensor& f_dec, const ContactPrior& l) const { return apply_gate(f_dec, gate(l)); }

SegMap Pgcs::segment(const Tensor& f_att) const {
  return SegMap{ops::upsample2x(ops::log_softmax_channels(head(f_att)))};
}

Tensor apply_gate(const Tensor& f_dec, const Tensor& gate) { return ops::mul_channels(f_dec, gate); }

Tensor seg_loss(const SegMap& s, std::span<const ContactMap> gt, double bg_weight) {
  const int batch = s.batch(), h = s.height(), w = s.width();
  if (static_cast<int>(gt.size()) != batch) throw ShapeError("seg_loss: one ground-truth map per sample");
  if (s.log_probs.dim(1) != kNumParts + 1) throw ShapeError("seg_loss: expected 18 channels");
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(batch) * h * w);
  for (const ContactMap& m : gt) {
    if (m.height != h || m.width != w) throw ShapeError("seg_loss: map size mismatch");
    for (auto v : m.labels) {
      if (v > kNumParts) throw ValidationError("contact label " + std::to_string(v) + " exceeds 17");
      labels.push_back(v);
    }
  }
  std::vector<double> weights(kNumParts + 1, 1.0);
  weights[0] = bg_weight;
  return ops::pixel_nll(s.log_probs, labels, weights);
}

}  // namespace hoic
