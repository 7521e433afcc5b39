// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "../support/gradcheck.hpp"
#include "hoic/checkpoint.hpp"
#include "hoic/train.hpp"

using namespace hoic;
using hoic::testing::grad_check;
using hoic::testing::random_tensor;
using hoic::testing::sample_indices;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// ---- 1: Hungarian against permutation enumeration

double brute_force(const std::vector<std::vector<double>>& cost) {
  std::vector<int> perm(cost.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0;
    for (std::size_t g = 0; g < cost[0].size(); ++g) s += cost[static_cast<std::size_t>(perm[g])][g];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void criterion1(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  double worst = 0;
  int cases = 0;
  for (int n = 2; n <= 6; ++n) {
    for (int t = 0; t < 50; ++t, ++cases) {
      std::vector<std::vector<double>> c(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
      for (auto& row : c)
        for (auto& v : row) v = u(rng);
      worst = std::max(worst, std::abs(hungarian(c).total_cost - brute_force(c)));
    }
  }
  const double secs = seconds_since(t0);
  o.check(worst <= 1e-9, "cost agreement");
  o.check(secs < 10, "runtime");
  o.detail << cases << " matrices, max |diff| " << worst << ", " << secs << " s";
}

// ---- 2: geometry oracles

Box random_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, 127);
  const int x1 = u(rng), y1 = u(rng);
  std::uniform_int_distribution<int> dx(x1 + 1, 128), dy(y1 + 1, 128);
  return Box{double(x1), double(y1), double(dx(rng)), double(dy(rng))};
}

void criterion2(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> count(1, 12);
  int enclosing_bad = 0, coverage_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Box> hum, obj;
    const int nh = count(rng), no = count(rng) - 1;
    for (int i = 0; i < nh; ++i) hum.push_back(random_box(rng));
    for (int i = 0; i < no; ++i) obj.push_back(random_box(rng));
    EnclosingRect oracle{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto* list : {&hum, &obj}) {
      for (const Box& b : *list) {
        for (double x : {b.x1, b.x2}) oracle.x_min = std::min(oracle.x_min, x), oracle.x_max = std::max(oracle.x_max, x);
        for (double y : {b.y1, b.y2}) oracle.y_min = std::min(oracle.y_min, y), oracle.y_max = std::max(oracle.y_max, y);
      }
    }
    const auto r = enclosing_rectangle(hum, obj);
    if (!r || !(*r == oracle)) ++enclosing_bad;
  }
  for (int t = 0; t < 1000; ++t) {
    const Box b = random_box(rng);
    const GridRect g = scale_to_grid({b.x1, b.y1, b.x2, b.y2}, 4, 4);
    bool ok = !g.empty() && g.gx_min >= 0 && g.gy_min >= 0 && g.gx_max <= 4 && g.gy_max <= 4;
    for (int y = static_cast<int>(b.y1); ok && y < static_cast<int>(b.y2); ++y) {
      for (int x = static_cast<int>(b.x1); ok && x < static_cast<int>(b.x2); ++x) ok = g.contains(x / 32, y / 32);
    }
    if (!ok) ++coverage_bad;
  }
  const double secs = seconds_since(t0);
  o.check(enclosing_bad == 0, "enclosing rectangle");
  o.check(coverage_bad == 0, "grid coverage");
  o.check(secs < 5, "runtime");
  o.detail << "enclosing mismatches " << enclosing_bad << "/1000, coverage failures " << coverage_bad << "/1000, "
           << secs << " s";
}

// ---- 3: identity invariants

struct FixedBatch {
  Dataset data;
  Tensor images;
  std::vector<std::vector<InteractionPair>> targets;
  explicit FixedBatch(int n, std::uint64_t seed = 777) : data(generate_dataset(seed, n, SceneConfig{})) {
    std::vector<const SceneSample*> ptrs;
    for (const auto& s : data.samples) {
      ptrs.push_back(&s);
      targets.push_back(s.pairs);
    }
    images = images_to_tensor(ptrs);
  }
};

void criterion3(Outcome& o) {
  const FeatureMap f{random_tensor({2, 64, 4, 4}, 3, -5, 5)};
  const FeatureMap e = enhance_roi(f, {{{0, 0, 4, 4}}, {{1, 1, 3, 2}}}, Tensor::full({1}, 1.0));
  const bool enhancer_identity = values(e.data) == values(f.data);

  const Tensor x = random_tensor({2, 64, 16, 16}, 4, -5, 5);
  const bool gate_identity = values(apply_gate(x, Tensor::full({2, 64}, 1.0))) == values(x);

  ModelConfig cfg;
  cfg.ablation.mask_guided_enabled = false;
  Model m(cfg, 5);
  const FixedBatch batch(2);
  ForwardOptions fo;
  fo.box_source = BoxSource::ground_truth;
  fo.targets = &batch.targets;
  const ModelOutputs a = m.forward(batch.images, nn::Mode{}, fo);
  for (auto& [name, p] : m.params().params()) {
    if (name.starts_with("pgcs.")) {
      for (auto& v : p.mutable_data()) v = -1.5 * v + 0.01;
    }
  }
  const ModelOutputs b = m.forward(batch.images, nn::Mode{}, fo);
  const bool maps_differ = values(a.seg.log_probs) != values(b.seg.log_probs);
  const bool logits_equal = values(a.preds.action_logits) == values(b.preds.action_logits);

  o.check(enhancer_identity, "enhancer delta=1");
  o.check(gate_identity, "all-ones gate");
  o.check(maps_differ && logits_equal, "M-G ablation");
  o.detail << "enhancer identity " << enhancer_identity << ", gate identity " << gate_identity
           << ", M-G off: maps differ " << maps_differ << " and logits identical " << logits_equal;
}

// ---- 4: gradients

void criterion4(Outcome& o) {
  double worst = 0;
  auto record = [&](const char* what, const hoic::testing::GradCheckResult& r) {
    worst = std::max(worst, r.max_rel_error);
    o.check(r.ok(), what);
    o.detail << what << " " << r.max_rel_error << ", ";
  };
  ModelConfig cfg;
  cfg.norm = nn::NormKind::group;
  Model m(cfg, 6);
  auto& params = m.params().params();

  {
    const Tensor x = random_tensor({1, 3, 64, 64}, 7, 0, 1);
    const Tensor proj = random_tensor({1, 64, 2, 2}, 8);
    auto loss = [&] { return ops::sum(ops::mul(m.backbone.extract_features(x, {}).data, proj)); };
    double r = 0;
    hoic::testing::GradCheckResult agg;
    for (const auto& [name, p] : params) {
      if (!name.starts_with("backbone.")) continue;
      const auto res = grad_check(loss, p, sample_indices(p.size(), 3, 9));
      if (res.max_rel_error >= r) r = res.max_rel_error, agg = res;
    }
    record("backbone", agg);
  }
  {
    const FeatureMap f{random_tensor({2, 64, 4, 4}, 10)};
    const std::vector<double> gt{1, 0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0,
                                 0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    auto loss = [&] { return cpam_loss(m.cpam.contact_prior(f, {}), gt); };
    record("cpam head", grad_check(loss, m.cpam.out.weight, sample_indices(m.cpam.out.weight.size(), 10, 11)));
  }
  const FeatureMap f{random_tensor({1, 64, 4, 4}, 12)};
  ContactMap gt(128, 128);
  for (int y = 40; y < 60; ++y)
    for (int x = 30; x < 70; ++x) gt.at(y, x) = static_cast<std::uint8_t>(1 + (x / 10) % 17);
  const GridRect g = scale_to_grid({20, 20, 80, 80}, 4, 4);
  auto seg = [&] {
    const Tensor dec = m.pgcs.decode(enhance_roi(f, {{g}}, m.pgcs.delta), {});
    return seg_loss(m.pgcs.segment(dec), std::vector<ContactMap>{gt}, 0.25);
  };
  record("enhancer delta", grad_check(seg, m.pgcs.delta, {0}));
  const Tensor& kernel = m.pgcs.dec_convs[1].weight;
  record("pgcs conv", grad_check(seg, kernel, sample_indices(kernel.size(), 10, 13)));
  {
    PairPredictions p;
    p.human_boxes = random_tensor({1, 8, 4}, 14, 0.2, 0.6, true);
    p.object_boxes = random_tensor({1, 8, 4}, 15, 0.2, 0.6, true);
    p.object_logits = random_tensor({1, 8, 6}, 16);
    p.action_logits = random_tensor({1, 8, 9}, 17);
    const std::vector<InteractionPair> gts{{{10, 12, 60, 90}, {40, 50, 110, 120}, 2, 1, {}},
                                           {{70, 5, 120, 64}, {0, 70, 30, 100}, 4, 6, {}}};
    const MatchResult mr = match_sample(p, 0, gts, 128, 128, {});
    auto loss = [&] { return match_loss(p, 0, gts, mr, 128, 128, {}); };
    auto rh = grad_check(loss, p.human_boxes, sample_indices(32, 32, 18));
    const auto ro = grad_check(loss, p.object_boxes, sample_indices(32, 32, 19));
    if (ro.max_rel_error > rh.max_rel_error) rh = ro;
    record("match_loss boxes", rh);
  }
  const SegMap s = m.pgcs.segment(random_tensor({2, 64, 64, 64}, 20, -4, 4));
  double worst_sum = 0;
  for (int b = 0; b < 2; ++b) {
    for (int y = 0; y < 128; ++y) {
      for (int x = 0; x < 128; ++x) {
        double sum = 0;
        for (int k = 0; k < 18; ++k) sum += s.prob(b, k, y, x);
        worst_sum = std::max(worst_sum, std::abs(sum - 1));
      }
    }
  }
  o.check(worst_sum <= 1e-6, "softmax sums");
  o.detail << "max |sum-1| " << worst_sum << " (max rel err " << worst << ")";
}

// ---- 5: metric oracles

void criterion5(Outcome& o) {
  ContactMap gt(8, 8), pred(8, 8);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) gt.at(y, x) = 5;
  const SegMetrics a = seg_metrics(pred, gt);
  o.check(std::abs(a.c_acc - 0.75) <= 1e-6 && a.sc_acc && std::abs(*a.sc_acc) <= 1e-6, "C-Acc 0.75 case");

  ContactMap g4(4, 4), p4(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 2; ++x) g4.at(y, x) = 1;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) p4.at(y, x) = 1;
  const SegMetrics b = seg_metrics(p4, g4);
  o.check(std::abs(b.per_class_iou[0] - 1.0 / 3) <= 1e-6 && std::abs(b.miou - 1.0 / 3) <= 1e-6, "IoU 1/3 case");

  // TP .9, FP .8, TP .7 with two ground truths. Precision at the second
  // recall step is exactly 2/3, so all-point AP is 5/6.
  const InteractionPair g1{{0, 10, 20, 40}, {5, 30, 25, 60}, 1, 2, {}}, g2{{60, 10, 80, 40}, {65, 30, 85, 60}, 1, 2, {}};
  const ScoredPair tp1{g1.human_box, g1.object_box, 1, 2, 0.9}, fp{{90, 80, 110, 120}, {95, 90, 120, 127}, 1, 2, 0.8},
      tp2{g2.human_box, g2.object_box, 1, 2, 0.7};
  const DetectionMetrics d = hoi_map({{tp1, fp, tp2}}, {{g1, g2}});
  o.check(std::abs(d.map - 5.0 / 6) <= 1e-6, "AP case");

  ContactMap perfect(16, 16);
  for (int i = 0; i < 256; i += 3) perfect.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(1 + i % 17);
  const SegMetrics p = seg_metrics(perfect, perfect);
  const DetectionMetrics pd = hoi_map({{{g1.human_box, g1.object_box, 1, 2, 1.0}}}, {{g1}});
  o.check(p.sc_acc == 1.0 && p.c_acc == 1.0 && p.miou == 1.0 && p.wiou == 1.0 && pd.map == 1.0, "perfect cases");
  o.detail << "C-Acc " << a.c_acc << ", SC-Acc " << a.sc_acc.value_or(-1) << ", IoU " << b.miou << ", AP " << d.map
           << " (0.5*1 + 0.5*2/3), perfect seg/map exact";
}

// ---- 6: loss arithmetic

void criterion6(Outcome& o) {
  const LossReport r = total_loss(2, 0.4, 0.6);
  o.check(r.alpha == 0.1 && r.beta == 0.5, "defaults");
  o.check(std::abs(r.total - 0.7) <= 1e-9, "0.7 case");
  const std::vector<double> gt{1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0};
  const double bce = cpam_loss(ContactPrior{Tensor::full({1, 17}, 0.5)}, gt).item();
  ContactMap m(4, 4);
  m.at(1, 1) = 4;
  m.at(3, 0) = 17;
  const double ce = seg_loss(SegMap{Tensor::full({1, 18, 4, 4}, std::log(1.0 / 18))}, std::vector<ContactMap>{m}, 0.25)
                        .item();
  o.check(std::abs(bce - std::log(2.0)) <= 1e-6, "BCE ln 2");
  o.check(std::abs(ce - std::log(18.0)) <= 1e-6, "CE ln 18");
  o.detail << "total " << r.total << ", BCE " << bce << ", CE " << ce;
}

// ---- 7: desk-scale overfit

RunConfig overfit_config() {
  RunConfig c;
  c.seed = 0;
  c.data.train_count = 8;
  c.optim.batch_size = 8;
  c.optim.lr = 1e-3;
  c.optim.lr_schedule = "cosine";
  c.optim.warmup_steps = 20;
  c.optim.epochs = 1000000;
  c.optim.max_steps = 500;
  return c;
}

void criterion7(Outcome& o) {
  const auto t0 = Clock::now();
  const RunConfig c = overfit_config();
  const Dataset d = load_split(c.data, false);
  Trainer t(c, d);
  double first = -1, last = 0;
  t.run([&](const StepRecord& r) {
    if (first < 0) first = r.loss.total;
    last = r.loss.total;
  });
  const Evaluation e = evaluate(t.model(), d);
  const double secs = seconds_since(t0);
  o.check(t.step() <= 500, "step budget");
  o.check(e.report.det.map >= 0.9, "mAP >= 0.9");
  o.check(e.report.seg.c_acc >= 0.9, "C-Acc >= 0.9");
  o.check(secs < 900, "runtime");
  o.detail << t.step() << " steps, mAP " << e.report.det.map << ", C-Acc " << e.report.seg.c_acc << ", mIoU "
           << e.report.seg.miou << ", loss " << first << " -> " << last << ", " << secs << " s";
}

// ---- 8: ablation direction

SegMetrics train_row(const RunConfig& c, const Dataset& d, double& map) {
  Trainer t(c, d);
  t.run();
  const Evaluation e = evaluate(t.model(), d);
  map = e.report.det.map;
  return e.report.seg;
}

void criterion8(Outcome& o) {
  const auto t0 = Clock::now();
  RunConfig c;
  c.seed = 8;
  c.data.train_count = 200;
  c.optim.lr = overfit_config().optim.lr;
  c.optim.lr_schedule = "cosine";
  c.optim.warmup_steps = 20;
  c.optim.epochs = 1000000;
  c.optim.max_steps = 2000;
  const Dataset d = load_split(c.data, false);
  auto row = [&](AblationFlags flags, double& map) {
    RunConfig r = c;
    r.model.ablation = flags;
    return train_row(r, d, map);
  };
  double map_base = 0, map_cpam = 0, map_full = 0;
  const SegMetrics base = row({false, false, false}, map_base);
  const SegMetrics cpam = row({true, false, false}, map_cpam);
  const SegMetrics full = row({true, true, true}, map_full);
  o.check(map_full >= map_base, "+M-G mAP >= baseline mAP");
  o.check(cpam.miou >= base.miou, "+CPAM mIoU >= baseline mIoU");
  o.detail << "baseline mAP " << map_base << " mIoU " << base.miou << "; +CPAM mAP " << map_cpam << " mIoU "
           << cpam.miou << "; +M-G mAP " << map_full << " mIoU " << full.miou << "; " << seconds_since(t0) << " s";
}

// ---- 9: determinism and persistence

void criterion9(Outcome& o) {
  RunConfig c;
  c.seed = 9;
  c.data.train_count = 8;
  c.optim.max_steps = 6;
  c.optim.lr = 1e-3;
  const Dataset d = load_split(c.data, false);
  auto curve = [&](std::unique_ptr<Trainer>* keep) {
    auto t = std::make_unique<Trainer>(c, d);
    std::vector<double> v;
    t->run([&](const StepRecord& r) { v.push_back(r.loss.total); });
    if (keep) *keep = std::move(t);
    return v;
  };
  std::unique_ptr<Trainer> trained;
  const auto a = curve(&trained), b = curve(nullptr);
  o.check(a == b && a.size() == 6, "loss curve");

  const auto path = std::filesystem::temp_directory_path() / "hoic_acceptance.ckpt";
  save_checkpoint(path, trained->model(), &trained->optimizer(), c, trained->step());
  const CheckpointInfo info = read_checkpoint_info(path);
  Model restored(info.config.resolved_model(), 12345);
  load_checkpoint(path, restored);
  std::filesystem::remove(path);
  const FixedBatch batch(4, 4242);
  const ModelOutputs x = trained->model().forward(batch.images, nn::Mode{});
  const ModelOutputs y = restored.forward(batch.images, nn::Mode{});
  double diff = 0;
  for (const auto& [p, q] : {std::pair{&x.preds.action_logits, &y.preds.action_logits},
                             std::pair{&x.preds.object_logits, &y.preds.object_logits},
                             std::pair{&x.preds.human_boxes, &y.preds.human_boxes},
                             std::pair{&x.seg.log_probs, &y.seg.log_probs}}) {
    for (std::size_t i = 0; i < p->size(); ++i) diff = std::max(diff, std::abs(p->data()[i] - q->data()[i]));
  }
  o.check(diff <= 1e-6, "checkpoint logits");
  o.detail << "curves identical over " << a.size() << " steps: " << (a == b) << ", max |logit diff| after reload "
           << diff;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"matching oracle", criterion1},     {"geometry oracles", criterion2}, {"identity invariants", criterion3},
      {"numerical checks", criterion4},    {"metric oracles", criterion5},   {"loss arithmetic", criterion6},
      {"desk-scale overfit", criterion7},  {"ablation direction", criterion8},
      {"determinism and persistence", criterion9}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    all &= o.pass;
    std::printf("criterion %d (%s): %s - %s\n", n, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
