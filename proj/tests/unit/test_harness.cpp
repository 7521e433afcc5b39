#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hoic/checkpoint.hpp"
#include "hoic/config.hpp"
#include "hoic/train.hpp"

using namespace hoic;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.seed = 21;
  c.data.train_count = 4;
  c.data.eval_count = 2;
  c.optim.batch_size = 2;
  c.optim.max_steps = 3;
  c.optim.lr = 1e-3;
  return c;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hoic_harness_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<double> loss_curve(const RunConfig& c, const Dataset& d) {
  Trainer t(c, d);
  std::vector<double> curve;
  t.run([&](const StepRecord& r) { curve.push_back(r.loss.total); });
  return curve;
}

}  // namespace

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = small_config();
  c.model.norm = nn::NormKind::group;
  c.model.ablation.mask_guided_enabled = false;
  c.model.roi_mode = RoiMode::per_pair;
  c.loss.alpha = 0.25;
  c.loss.match.box = 4;
  c.data.train_dir = "somewhere";
  const nlohmann::json j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.model.norm, nn::NormKind::group);
  EXPECT_FALSE(back.model.ablation.mask_guided_enabled);
  EXPECT_EQ(back.loss.match.box, 4);
}

TEST(RunConfig, DefaultsAndRejections) {
  const RunConfig d = run_config_from_json(nlohmann::json::object());
  EXPECT_EQ(d.optim.lr, 1e-4);
  EXPECT_EQ(d.optim.batch_size, 4);
  EXPECT_EQ(d.loss.alpha, 0.1);
  EXPECT_EQ(d.loss.beta, 0.5);
  EXPECT_THROW(run_config_from_json({{"optim", {{"learning_rate", 1}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"bogus", 1}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"loss", {{"alpha", -1}}}}), ConfigError);
  EXPECT_THROW(load_run_config(temp_path("does_not_exist.json")), ConfigError);
  const fs::path p = temp_path("cfg.json");
  std::ofstream(p) << R"({"seed": 5, "optim": {"epochs": 3}})";
  const RunConfig f = load_run_config(p);
  EXPECT_EQ(f.seed, 5u);
  EXPECT_EQ(f.optim.epochs, 3);
}

TEST(Trainer, OneStepLogLine) {
  RunConfig c = small_config();
  c.data.train_count = 1;
  c.optim.max_steps = 1;
  const Dataset d = load_split(c.data, false);
  Trainer t(c, d);
  std::vector<StepRecord> recs;
  t.run([&](const StepRecord& r) { recs.push_back(r); });
  ASSERT_EQ(recs.size(), 1u);
  const nlohmann::json j = to_json(recs[0]);
  for (const char* k : {"match_loss", "bce_loss", "ce_loss", "total"}) {
    ASSERT_TRUE(j.contains(k)) << k;
    EXPECT_TRUE(std::isfinite(j[k].get<double>())) << k;
  }
  EXPECT_EQ(j["step"], 1);
  EXPECT_EQ(j.dump().find('\n'), std::string::npos);
}

TEST(Trainer, AlphaZeroDropsMatchLoss) {
  RunConfig c = small_config();
  c.loss.alpha = 0;
  c.optim.max_steps = 1;
  const Dataset d = load_split(c.data, false);
  Trainer t(c, d);
  t.run([&](const StepRecord& r) {
    EXPECT_GT(r.loss.match_loss, 0.0);
    EXPECT_NEAR(r.loss.total, 0.5 * (r.loss.bce_loss + r.loss.ce_loss), 1e-12);
  });
}

TEST(Trainer, FixedSeedReproducesLossCurve) {
  const RunConfig c = small_config();
  const Dataset d = load_split(c.data, false);
  const auto a = loss_curve(c, d), b = loss_curve(c, d);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  RunConfig other = c;
  other.seed = 22;
  EXPECT_NE(loss_curve(other, d), a);
}

TEST(Trainer, NonFiniteLossAborts) {
  RunConfig c = small_config();
  const Dataset d = load_split(c.data, false);
  Trainer t(c, d);
  t.run();
  for (auto& v : t.model().cpam.out.bias.mutable_data()) v = NAN;
  try {
    t.train_step({0, 1}, 0);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bce_loss"), std::string::npos) << msg;
  }
}

TEST(Checkpoint, RoundTripReproducesLogits) {
  RunConfig c = small_config();
  const Dataset d = load_split(c.data, false);
  Trainer t(c, d);
  t.run();
  const fs::path p = temp_path("model.ckpt");
  save_checkpoint(p, t.model(), &t.optimizer(), c, t.step());

  const CheckpointInfo info = read_checkpoint_info(p);
  EXPECT_EQ(info.step, 3);
  EXPECT_EQ(to_json(info.config), to_json(c));

  Model restored(info.config.resolved_model(), 999);
  AdamW opt(restored.params(), AdamWConfig{});
  load_checkpoint(p, restored, &opt);
  EXPECT_EQ(opt.steps(), t.optimizer().steps());

  const Dataset e = load_split(c.data, true);
  std::vector<const SceneSample*> ptrs;
  for (const auto& s : e.samples) ptrs.push_back(&s);
  const Tensor images = images_to_tensor(ptrs);
  const ModelOutputs a = t.model().forward(images, nn::Mode{});
  const ModelOutputs b = restored.forward(images, nn::Mode{});
  EXPECT_EQ(values(a.preds.action_logits), values(b.preds.action_logits));
  EXPECT_EQ(values(a.preds.human_boxes), values(b.preds.human_boxes));
  EXPECT_EQ(values(a.seg.log_probs), values(b.seg.log_probs));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const fs::path p = temp_path("bad.ckpt");
  std::ofstream(p) << "NOTACKPT";
  EXPECT_THROW(read_checkpoint_info(p), std::runtime_error);
  Model m(ModelConfig{}, 1);
  RunConfig c;
  const fs::path good = temp_path("good.ckpt");
  save_checkpoint(good, m, nullptr, c, 0);
  ModelConfig other;
  other.iim.num_queries = 8;
  Model wrong(other, 1);
  EXPECT_THROW(load_checkpoint(good, wrong), std::runtime_error);
}

TEST(Evaluate, ReportHasEveryColumn) {
  RunConfig c = small_config();
  const Dataset d = load_split(c.data, true);
  Model m(c.resolved_model(), 1);
  const Evaluation e = evaluate(m, d, 2);
  EXPECT_EQ(e.pred_maps.size(), 2u);
  EXPECT_EQ(e.pairs.size(), 2u);
  const auto j = to_json(e.report, d.vocab);
  for (const char* k : {"mAP", "SC-Acc", "C-Acc", "mIoU", "wIoU"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Schedule, ConstantAndCosine) {
  OptimConfig o;
  o.lr = 1e-3;
  EXPECT_EQ(scheduled_lr(o, 0, 100), 1e-3);
  EXPECT_EQ(scheduled_lr(o, 99, 100), 1e-3);
  o.lr_schedule = "cosine";
  o.warmup_steps = 10;
  EXPECT_NEAR(scheduled_lr(o, 0, 110), 1e-4, 1e-15);
  EXPECT_NEAR(scheduled_lr(o, 9, 110), 1e-3, 1e-15);
  EXPECT_NEAR(scheduled_lr(o, 10, 110), 1e-3, 1e-15);
  EXPECT_NEAR(scheduled_lr(o, 60, 110), 5e-4, 1e-15);
  EXPECT_NEAR(scheduled_lr(o, 110, 110), 0.0, 1e-15);
  for (long long s = 11; s < 110; ++s) EXPECT_LE(scheduled_lr(o, s, 110), scheduled_lr(o, s - 1, 110));
  RunConfig c;
  c.optim.lr_schedule = "step";
  EXPECT_THROW(c.validate(), ConfigError);
}
