#include <gtest/gtest.h>

#include <cmath>

#include "../support/gradcheck.hpp"
#include "hoic/iim.hpp"

using namespace hoic;
using hoic::testing::grad_check;
using hoic::testing::random_tensor;
using hoic::testing::sample_indices;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

struct Fixture {
  nn::ParamStore store;
  std::mt19937_64 rng{31};
  Iim iim;
  explicit Fixture(IimConfig cfg = {}, int channels = 64) {
    iim = Iim(nn::Builder{store, rng, "iim"}, channels, 6, 9, cfg);
  }
};

std::vector<double> layer_norm_ref(const std::vector<double>& x, double eps = 1e-5) {
  double mean = 0, var = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  std::vector<double> y;
  for (double v : x) y.push_back((v - mean) / std::sqrt(var + eps));
  return y;
}

}  // namespace

TEST(Encode, MemoryRows) {
  Fixture fx;
  const Tensor mem = fx.iim.encode(FeatureMap{random_tensor({2, 64, 4, 4}, 1)});
  EXPECT_EQ(mem.shape(), (Shape{2, 16, 64}));
}

TEST(Encode, PositionalEncodingDistinguishesCells) {
  const Tensor pe = positional_encoding(4, 4, 64);
  bool differs = false;
  for (int c = 0; c < 64; ++c) differs |= pe.at({0, c}) != pe.at({1, c});
  EXPECT_TRUE(differs);
  // All 16 rows pairwise distinct.
  for (int a = 0; a < 16; ++a) {
    for (int b = a + 1; b < 16; ++b) {
      double d = 0;
      for (int c = 0; c < 64; ++c) d += std::abs(pe.at({a, c}) - pe.at({b, c}));
      EXPECT_GT(d, 1e-6) << a << " " << b;
    }
  }
}

TEST(Encode, NotPermutationEquivariant) {
  Fixture fx;
  const Tensor f = random_tensor({1, 64, 4, 4}, 2);
  const Tensor mem = fx.iim.encode(FeatureMap{f});
  // Swap cells 0 and 5 in the input, then swap the output rows back.
  std::vector<double> v = values(f);
  for (int c = 0; c < 64; ++c) std::swap(v[static_cast<std::size_t>(c * 16)], v[static_cast<std::size_t>(c * 16 + 5)]);
  const Tensor mem2 = fx.iim.encode(FeatureMap{Tensor::from({1, 64, 4, 4}, v)});
  double diff = 0;
  for (int c = 0; c < 64; ++c) {
    diff += std::abs(mem.at({0, 0, c}) - mem2.at({0, 5, c})) + std::abs(mem.at({0, 5, c}) - mem2.at({0, 0, c}));
  }
  EXPECT_GT(diff, 1e-6);
}

TEST(DecodeInstances, SplitShapesAndConcat) {
  Fixture fx;
  const Tensor mem = random_tensor({1, 16, 64}, 3);
  const Tensor target = random_tensor({1, 32, 64}, 4);
  auto [d_h, d_o] = fx.iim.decode_instances(0, target, mem);
  EXPECT_EQ(d_h.shape(), (Shape{1, 16, 64}));
  EXPECT_EQ(d_o.shape(), (Shape{1, 16, 64}));
  const Tensor full = fx.iim.instance_decoders[0](target, mem, ops::concat({fx.iim.queries.human, fx.iim.queries.object}, 0));
  EXPECT_EQ(values(ops::concat({d_h, d_o}, 1)), values(full));
}

// Zero memory, zero queries, zero biases: attention contributes nothing, so
// the output is the FFN/LayerNorm chain applied to the first norm's shift.
TEST(DecodeInstances, HandTracedTinyDecoder) {
  IimConfig cfg;
  cfg.num_queries = 1;
  cfg.query_dim = 4;
  cfg.heads = 1;
  cfg.encoder_layers = 1;
  cfg.stages = 1;
  cfg.ffn_dim = 3;
  Fixture fx(cfg, 4);
  for (auto& [name, p] : fx.store.params()) {
    if (name.ends_with(".bias") || name.find("queries") != std::string::npos) {
      for (auto& v : p.mutable_data()) v = 0.0;
    }
  }
  nn::DecoderLayer& layer = fx.iim.instance_decoders[0];
  const std::vector<double> shift = {1.0, 2.0, 4.0, -1.0};
  std::copy(shift.begin(), shift.end(), layer.norm1.beta.mutable_data().begin());

  const auto [d_h, d_o] = fx.iim.decode_instances(0, Tensor::zeros({1, 2, 4}), Tensor::zeros({1, 3, 4}));

  // norm1(0 + 0) = shift; cross-attention values are 0; norm2 standardizes.
  const std::vector<double> h2 = layer_norm_ref(shift);
  std::vector<double> hidden(3, 0.0), ffn(4, 0.0);
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 4; ++i) hidden[j] += layer.ffn.fc1.weight.at({j, i}) * h2[i];
    hidden[j] = std::max(0.0, hidden[j]);
  }
  std::vector<double> pre3(4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) ffn[i] += layer.ffn.fc2.weight.at({i, j}) * hidden[j];
    pre3[i] = h2[i] + ffn[i];
  }
  const std::vector<double> expect = layer_norm_ref(pre3);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(d_h.at({0, 0, i}), expect[i], 1e-12);
    EXPECT_NEAR(d_o.at({0, 0, i}), expect[i], 1e-12);
  }
}

TEST(DecodeActions, QueriesAreTheMean) {
  const Tensor x = random_tensor({1, 16, 64}, 5);
  EXPECT_EQ(values(action_queries(x, x)), values(x));
  const Tensor zero = action_queries(x, ops::neg(x));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  const Tensor a = random_tensor({2, 16, 64}, 6), b = random_tensor({2, 16, 64}, 7);
  const Tensor q = action_queries(a, b);
  for (std::size_t i = 0; i < values(q).size(); ++i) EXPECT_DOUBLE_EQ(q.data()[i], (a.data()[i] + b.data()[i]) / 2);
}

TEST(StackedDecoders, SingleStageIsOneCallEach) {
  Fixture fx;
  const Tensor mem = random_tensor({2, 16, 64}, 8);
  const DecoderState s = fx.iim.run_stacked_decoders(mem, 1);
  const Tensor target = ops::add(Tensor::zeros({2, 32, 64}), ops::concat({fx.iim.queries.human, fx.iim.queries.object}, 0));
  auto [d_h, d_o] = fx.iim.decode_instances(0, target, mem);
  EXPECT_EQ(values(s.d_h), values(d_h));
  EXPECT_EQ(values(s.d_o), values(d_o));
  EXPECT_EQ(values(s.d_a), values(fx.iim.decode_actions(0, d_h, d_o, mem)));
}

TEST(StackedDecoders, DefaultDepthAndShapes) {
  Fixture fx;
  EXPECT_EQ(fx.iim.config().stages, 3);
  EXPECT_EQ(fx.iim.instance_decoders.size(), 3u);
  const Tensor mem = random_tensor({1, 16, 64}, 9);
  for (int stages = 1; stages <= 3; ++stages) {
    const DecoderState s = fx.iim.run_stacked_decoders(mem, stages);
    for (const Tensor* t : {&s.d_h, &s.d_o, &s.d_a}) EXPECT_EQ(t->shape(), (Shape{1, 16, 64}));
  }
  EXPECT_THROW(fx.iim.run_stacked_decoders(mem, 4), ConfigError);
}

TEST(PredictBoxes, RangeAndConversions) {
  Fixture fx;
  auto [h, o] = fx.iim.predict_boxes(random_tensor({2, 16, 64}, 10, -50, 50), random_tensor({2, 16, 64}, 11, -50, 50));
  for (const Tensor* t : {&h, &o}) {
    EXPECT_EQ(t->shape(), (Shape{2, 16, 4}));
    for (double v : t->data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  const auto full = cxcywh_to_xyxy({0.5, 0.5, 1, 1}, 128, 96);
  EXPECT_EQ(full, (std::array<double, 4>{0, 0, 128, 96}));
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < 100; ++i) {
    const std::array<double, 4> b{u(rng), u(rng), u(rng) * 0.5, u(rng) * 0.5};
    const auto back = xyxy_to_cxcywh(cxcywh_to_xyxy(b, 128, 96), 128, 96);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(back[k], b[k], 1e-6);
  }
}

TEST(PredictObjectClass, BiasOnlyAndNormalization) {
  Fixture fx;
  const Tensor d = random_tensor({1, 16, 64}, 13);
  const Tensor logits = fx.iim.predict_object_class(d);
  EXPECT_EQ(logits.shape(), (Shape{1, 16, 6}));
  const Tensor p = ops::softmax_last(logits);
  for (int q = 0; q < 16; ++q) {
    double s = 0;
    for (int k = 0; k < 6; ++k) s += p.at({0, q, k});
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  for (auto& w : fx.iim.object_head.weight.mutable_data()) w = 0.0;
  const std::vector<double> bias = {0.5, -1, 2, 0, 3, -2};
  std::copy(bias.begin(), bias.end(), fx.iim.object_head.bias.mutable_data().begin());
  const Tensor z = fx.iim.predict_object_class(d);
  for (int q = 0; q < 16; ++q) {
    for (int k = 0; k < 6; ++k) EXPECT_EQ(z.at({0, q, k}), bias[static_cast<std::size_t>(k)]);
  }
}

TEST(MaskGuidedRoi, EmptyMaskCropsEverything) {
  Fixture fx;
  const FeatureMap f{random_tensor({1, 64, 4, 4}, 14)};
  const ContactMap empty(128, 128);
  EXPECT_EQ(contact_crop(empty, 4, 4), (GridRect{0, 0, 4, 4}));
  EXPECT_EQ(values(fx.iim.mask_guided_roi(f, std::vector<ContactMap>{empty})), values(fx.iim.mask_guided_roi_full(f)));
}

TEST(MaskGuidedRoi, SingleCenterPixelIsOneCell) {
  Fixture fx;
  const FeatureMap f{random_tensor({1, 64, 4, 4}, 15)};
  ContactMap m(128, 128);
  m.at(64, 64) = 7;
  EXPECT_EQ(contact_crop(m, 4, 4), (GridRect{2, 2, 3, 3}));
  std::vector<double> cell;
  for (int c = 0; c < 64; ++c) cell.push_back(f.data.at({0, c, 2, 2}));
  const Tensor expect = fx.iim.roi_fc(Tensor::from({1, 64}, cell));
  const Tensor got = fx.iim.mask_guided_roi(f, std::vector<ContactMap>{m});
  ASSERT_EQ(got.shape(), (Shape{1, 10}));
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(got.data()[i], expect.data()[i], 1e-12);
}

TEST(MaskGuidedRoi, InvariantToPartRelabeling) {
  Fixture fx;
  const FeatureMap f{random_tensor({1, 64, 4, 4}, 16)};
  ContactMap a(128, 128), b(128, 128);
  for (int y = 10; y < 40; ++y) {
    a.at(y, 70) = 3;
    b.at(y, 70) = static_cast<std::uint8_t>(1 + y % 17);
  }
  EXPECT_EQ(values(fx.iim.mask_guided_roi(f, std::vector<ContactMap>{a})),
            values(fx.iim.mask_guided_roi(f, std::vector<ContactMap>{b})));
}

TEST(PredictActions, ShapeAndMaskJacobian) {
  Fixture fx;
  const Tensor d_a = random_tensor({1, 16, 64}, 17);
  Tensor m = random_tensor({1, 10}, 18, -1, 1, true);
  const Tensor logits = fx.iim.predict_actions(d_a, m);
  EXPECT_EQ(logits.shape(), (Shape{1, 16, 9}));
  // Every query's logits move when any mask feature entry moves.
  for (int j = 0; j < 10; ++j) {
    std::vector<double> v = values(m);
    v[static_cast<std::size_t>(j)] += 1e-3;
    const Tensor moved = fx.iim.predict_actions(d_a, Tensor::from({1, 10}, v));
    for (int q = 0; q < 16; ++q) {
      double diff = 0;
      for (int k = 0; k < 9; ++k) diff += std::abs(moved.at({0, q, k}) - logits.at({0, q, k}));
      EXPECT_GT(diff, 0.0) << "query " << q << " entry " << j;
    }
  }
  const Tensor proj = random_tensor({1, 16, 9}, 19);
  auto loss = [&] { return ops::sum(ops::mul(fx.iim.predict_actions(d_a, m), proj)); };
  const auto r = grad_check(loss, m, sample_indices(10, 10, 0));
  EXPECT_TRUE(r.ok()) << r.max_rel_error;
}
