#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hoic/metrics.hpp"

using namespace hoic;

namespace {

ContactMap random_map(int h, int w, std::uint64_t seed, double contact = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> part(1, 17);
  ContactMap m(h, w);
  for (auto& v : m.labels) v = u(rng) < contact ? static_cast<std::uint8_t>(part(rng)) : 0;
  return m;
}

ScoredPair scored(const InteractionPair& p, double conf) {
  return {p.human_box, p.object_box, p.object_class, p.action_class, conf};
}

InteractionPair pair_at(double x, int action, int object = 1) {
  return {{x, 10, x + 20, 40}, {x + 5, 30, x + 25, 60}, object, action, {}};
}

}  // namespace

TEST(SegMetrics, PerfectPredictionIsExactlyOne) {
  const ContactMap gt = random_map(32, 32, 1);
  const SegMetrics m = seg_metrics(gt, gt);
  ASSERT_TRUE(m.sc_acc.has_value());
  EXPECT_EQ(*m.sc_acc, 1.0);
  EXPECT_EQ(m.c_acc, 1.0);
  EXPECT_EQ(m.miou, 1.0);
  EXPECT_EQ(m.wiou, 1.0);
}

TEST(SegMetrics, AllBackgroundPrediction) {
  ContactMap gt(8, 8), pred(8, 8);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) gt.at(y, x) = 5;
  const SegMetrics m = seg_metrics(pred, gt);
  EXPECT_NEAR(m.c_acc, 0.75, 1e-12);
  EXPECT_EQ(*m.sc_acc, 0.0);
}

TEST(SegMetrics, HandCountedIou) {
  ContactMap gt(4, 4), pred(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 2; ++x) gt.at(y, x) = 1;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) pred.at(y, x) = 1;
  const SegMetrics m = seg_metrics(pred, gt);
  EXPECT_NEAR(m.per_class_iou[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(m.miou, 1.0 / 3, 1e-12);
  EXPECT_NEAR(m.wiou, m.miou, 1e-12);
}

TEST(SegMetrics, NoContactSkipsScAcc) {
  const ContactMap empty(8, 8);
  const SegMetrics m = seg_metrics(empty, empty);
  EXPECT_FALSE(m.sc_acc.has_value());
  EXPECT_EQ(m.c_acc, 1.0);
  EXPECT_EQ(m.miou, 1.0);
  EXPECT_EQ(m.wiou, 1.0);
  // Skipped images do not enter the dataset mean.
  ContactMap gt(8, 8);
  gt.at(0, 0) = 2;
  const std::vector<ContactMap> preds{empty, gt}, gts{empty, gt};
  const SegMetrics d = seg_metrics(preds, gts);
  EXPECT_EQ(d.sc_images, 1);
  EXPECT_EQ(*d.sc_acc, 1.0);
}

TEST(SegMetrics, SingleClassMiouEqualsWiou) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    ContactMap gt = random_map(16, 16, 100 + t), pred = random_map(16, 16, 200 + t);
    for (auto* m : {&gt, &pred})
      for (auto& v : m->labels) v = v ? 4 : 0;
    const SegMetrics s = seg_metrics(pred, gt);
    EXPECT_NEAR(s.miou, s.wiou, 1e-12);
  }
}

TEST(SegMetrics, RangesAndSwapSymmetry) {
  const ContactMap a = random_map(24, 24, 7, 0.4), b = random_map(24, 24, 8, 0.2);
  const SegMetrics ab = seg_metrics(a, b), ba = seg_metrics(b, a);
  EXPECT_DOUBLE_EQ(ab.c_acc, ba.c_acc);
  EXPECT_NE(*ab.sc_acc, *ba.sc_acc);
  for (const SegMetrics* m : {&ab, &ba}) {
    for (double v : {*m->sc_acc, m->c_acc, m->miou, m->wiou}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  double wsum = 0;
  for (double w : ab.per_class_pixel_weight) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-12);
  double wiou = 0;
  for (int k = 0; k < kNumParts; ++k) wiou += ab.per_class_pixel_weight[static_cast<std::size_t>(k)] * ab.per_class_iou[static_cast<std::size_t>(k)];
  EXPECT_NEAR(ab.wiou, wiou, 1e-12);
}

TEST(SegMetrics, ShapeMismatch) {
  EXPECT_THROW(seg_metrics(ContactMap(4, 4), ContactMap(4, 5)), ShapeError);
}

TEST(AveragePrecision, HandWalkedCurve) {
  // TP .9, FP .8, TP .7 against 2 gts: 0.5 * 1 + 0.5 * 2/3.
  const double ap = average_precision({{0.9, true}, {0.8, false}, {0.7, true}}, 2);
  EXPECT_NEAR(ap, 5.0 / 6, 1e-12);
  EXPECT_EQ(average_precision({}, 3), 0.0);
  EXPECT_EQ(average_precision({{0.9, true}}, 1), 1.0);
}

TEST(HoiMap, HandWalkedCase) {
  const InteractionPair g1 = pair_at(0, 2), g2 = pair_at(60, 2);
  InteractionPair miss = pair_at(100, 2);
  miss.human_box = {90, 80, 110, 120};
  const std::vector<std::vector<ScoredPair>> preds{{scored(g1, 0.9), scored(miss, 0.8), scored(g2, 0.7)}};
  const DetectionMetrics d = hoi_map(preds, {{g1, g2}});
  EXPECT_NEAR(d.per_action_ap.at(2), 5.0 / 6, 1e-6);
  EXPECT_NEAR(d.map, 5.0 / 6, 1e-6);
}

TEST(HoiMap, PerfectPredictionIsExactlyOne) {
  const std::vector<std::vector<InteractionPair>> gts{{pair_at(0, 1), pair_at(50, 3, 2)}, {pair_at(10, 1, 4)}};
  std::vector<std::vector<ScoredPair>> preds(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (const auto& g : gts[i]) preds[i].push_back(scored(g, 1.0));
  const DetectionMetrics d = hoi_map(preds, gts);
  EXPECT_EQ(d.map, 1.0);
  EXPECT_EQ(d.per_action_ap.size(), 2u);
}

TEST(HoiMap, WrongActionScoresZero) {
  const InteractionPair g = pair_at(0, 1);
  InteractionPair p = g;
  p.action_class = 5;
  const DetectionMetrics d = hoi_map({{scored(p, 1.0)}}, {{g}});
  EXPECT_EQ(d.per_action_ap.at(1), 0.0);
  EXPECT_EQ(d.per_action_ap.count(5), 0u);
  EXPECT_EQ(d.map, 0.0);
}

TEST(HoiMap, DuplicatesAreFalsePositives) {
  const InteractionPair g = pair_at(0, 1);
  const DetectionMetrics d = hoi_map({{scored(g, 0.9), scored(g, 0.95)}}, {{g}});
  EXPECT_EQ(d.map, 1.0);
  const DetectionMetrics e = hoi_map({{scored(g, 0.9), scored(g, 0.9)}, {}}, {{g}, {pair_at(40, 1)}});
  EXPECT_NEAR(e.map, 0.5, 1e-12);
}

TEST(HoiMap, OrderInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<InteractionPair>> gts(5);
  std::vector<std::vector<ScoredPair>> preds(5);
  for (int i = 0; i < 5; ++i) {
    for (int k = 0; k < 3; ++k) {
      const InteractionPair g = pair_at(30.0 * k, k % 2, 1);
      gts[static_cast<std::size_t>(i)].push_back(g);
      InteractionPair p = g;
      if (u(rng) < 0.3) p.object_class = 2;
      if (u(rng) < 0.3) p.human_box.x2 = p.human_box.x1 + 5;
      preds[static_cast<std::size_t>(i)].push_back(scored(p, u(rng)));
      preds[static_cast<std::size_t>(i)].push_back(scored(pair_at(30.0 * k + 3, k % 2, 1), u(rng)));
    }
  }
  const double base = hoi_map(preds, gts).map;
  for (int t = 0; t < 10; ++t) {
    for (auto& v : preds) std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(hoi_map(preds, gts).map, base);
  }
}

TEST(MetricsReport, JsonColumns) {
  MetricsReport r;
  r.seg = seg_metrics(ContactMap(4, 4), ContactMap(4, 4));
  r.det.map = 0.5;
  r.det.per_action_ap = {{0, 0.5}};
  const auto j = to_json(r, Vocab::standard());
  for (const char* k : {"mAP", "SC-Acc", "C-Acc", "mIoU", "wIoU"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["SC-Acc"].is_null());
  EXPECT_EQ(j["mAP"], 0.5);
}
