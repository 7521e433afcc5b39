#include "hoic/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace hoic {

nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step},
          {"epoch", r.epoch},
          {"match_loss", r.loss.match_loss},
          {"bce_loss", r.loss.bce_loss},
          {"ce_loss", r.loss.ce_loss},
          {"total", r.loss.total},
          {"alpha", r.loss.alpha},
          {"beta", r.loss.beta},
          {"grad_norm", r.grad_norm},
          {"lr", r.lr},
          {"seconds", r.seconds}};
}

BatchLoss compute_loss(const ModelOutputs& out, const std::vector<const SceneSample*>& batch, const RunConfig& config) {
  const ModelConfig m = config.resolved_model();
  const int n = static_cast<int>(batch.size());
  Tensor match = Tensor::scalar(0.0);
  for (int b = 0; b < n; ++b) {
    const auto& gts = batch[static_cast<std::size_t>(b)]->pairs;
    const MatchResult r = match_sample(out.preds, b, gts, m.width, m.height, config.loss.match);
    match = ops::add(match, match_loss(out.preds, b, gts, r, m.width, m.height, config.loss.match));
  }
  match = ops::scale(match, 1.0 / n);

  Tensor bce = Tensor::scalar(0.0);
  if (m.ablation.cpam_enabled) {
    std::vector<ContactLabels> labels;
    for (const auto* s : batch) labels.push_back(s->contact_labels);
    bce = cpam_loss(out.prior, contact_targets(labels));
  }
  std::vector<ContactMap> maps;
  for (const auto* s : batch) maps.push_back(s->contact_map);
  Tensor ce = seg_loss(out.seg, maps, m.pgcs.background_weight);

  BatchLoss l;
  l.total = total_loss(match, bce, ce, config.loss.alpha, config.loss.beta);
  l.report = LossReport{match.item(), bce.item(), ce.item(), l.total.item(), config.loss.alpha, config.loss.beta};
  return l;
}

Dataset load_split(const DataConfig& data, bool eval) {
  const std::string& dir = eval ? data.eval_dir : data.train_dir;
  if (!dir.empty()) return read_dataset(dir);
  return generate_dataset(eval ? data.eval_seed : data.train_seed, eval ? data.eval_count : data.train_count,
                          data.scene_config());
}

Trainer::Trainer(const RunConfig& config, const Dataset& train)
    : config_(config), data_(train), order_rng_(config.seed ^ 0x5eedULL), dropout_rng_(config.seed + 1) {
  config_.validate();
  config_.model = config_.resolved_model();
  if (train.samples.empty()) throw ConfigError("training split is empty");
  if (train.height != config_.model.height || train.width != config_.model.width) {
    throw ConfigError("training images do not match the configured size");
  }
  if (train.vocab.num_actions() != config_.model.num_actions || train.vocab.num_objects() != config_.model.num_objects) {
    throw ConfigError("training vocab does not match the configured class counts");
  }
  model_ = std::make_unique<Model>(config_.model, config_.seed);
  AdamWConfig oc;
  oc.lr = config_.optim.lr;
  oc.weight_decay = config_.optim.weight_decay;
  optimizer_ = std::make_unique<AdamW>(model_->params(), oc);
  const long long per_epoch = (static_cast<long long>(train.samples.size()) + config_.optim.batch_size - 1) /
                              config_.optim.batch_size;
  total_steps_ = per_epoch * config_.optim.epochs;
  if (config_.optim.max_steps >= 0) total_steps_ = std::min<long long>(total_steps_, config_.optim.max_steps);
}

double scheduled_lr(const OptimConfig& optim, long long step, long long total_steps) {
  if (optim.lr_schedule == "constant") return optim.lr;
  if (step < optim.warmup_steps) return optim.lr * static_cast<double>(step + 1) / optim.warmup_steps;
  const long long span = std::max<long long>(1, total_steps - optim.warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - optim.warmup_steps) / static_cast<double>(span));
  return optim.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

StepRecord Trainer::train_step(const std::vector<int>& indices, int epoch) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<const SceneSample*> batch;
  std::vector<std::vector<InteractionPair>> targets;
  for (int i : indices) {
    batch.push_back(&data_.samples.at(static_cast<std::size_t>(i)));
    targets.push_back(batch.back()->pairs);
  }
  ForwardOptions fo;
  fo.targets = &targets;
  fo.match_weights = config_.loss.match;
  const bool forced = config_.optim.teacher_force_boxes && epoch < config_.optim.teacher_force_epochs;
  fo.box_source = forced ? BoxSource::ground_truth : BoxSource::matched_predictions;

  model_->params().zero_grad();
  const ModelOutputs out = model_->forward(images_to_tensor(batch), nn::Mode{true, &dropout_rng_}, fo);
  const BatchLoss loss = compute_loss(out, batch, config_);

  StepRecord rec;
  rec.step = step_ + 1;
  rec.epoch = epoch;
  rec.loss = loss.report;
  if (!std::isfinite(loss.report.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << rec.step << ": match_loss=" << loss.report.match_loss
        << " bce_loss=" << loss.report.bce_loss << " ce_loss=" << loss.report.ce_loss;
    throw TrainingError(msg.str());
  }
  loss.total.backward();
  rec.grad_norm = optimizer_->clip_grad_norm(config_.optim.clip_norm > 0 ? config_.optim.clip_norm : INFINITY);
  if (!std::isfinite(rec.grad_norm)) {
    throw TrainingError("non-finite gradient norm at step " + std::to_string(rec.step));
  }
  optimizer_->set_lr(scheduled_lr(config_.optim, step_, total_steps_));
  optimizer_->step();
  ++step_;
  rec.lr = optimizer_->config().lr;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  const int n = static_cast<int>(data_.samples.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int epoch = 0; epoch < config_.optim.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng_);
    for (int i = 0; i < n; i += config_.optim.batch_size) {
      if (config_.optim.max_steps >= 0 && step_ >= config_.optim.max_steps) return;
      const std::vector<int> idx(order.begin() + i, order.begin() + std::min(n, i + config_.optim.batch_size));
      const StepRecord rec = train_step(idx, epoch);
      if (on_step) on_step(rec);
    }
  }
}

Evaluation evaluate(const Model& model, const Dataset& data, int batch_size) {
  NoGradGuard no_grad;
  Evaluation e;
  const ModelConfig& m = model.config();
  std::vector<std::vector<InteractionPair>> gts;
  const int n = static_cast<int>(data.samples.size());
  for (int i = 0; i < n; i += batch_size) {
    std::vector<const SceneSample*> batch;
    for (int j = i; j < std::min(n, i + batch_size); ++j) batch.push_back(&data.samples[static_cast<std::size_t>(j)]);
    const ModelOutputs out = model.forward(images_to_tensor(batch), nn::Mode{false, nullptr});
    for (int b = 0; b < static_cast<int>(batch.size()); ++b) {
      e.pred_maps.push_back(out.seg.argmax(b));
      e.pairs.push_back(decode_pairs(out.preds, b, m.width, m.height));
      gts.push_back(batch[static_cast<std::size_t>(b)]->pairs);
    }
  }
  std::vector<ContactMap> gt_maps;
  for (const auto& s : data.samples) gt_maps.push_back(s.contact_map);
  e.report.seg = seg_metrics(e.pred_maps, gt_maps);
  e.report.det = hoi_map(e.pairs, gts);
  return e;
}

}  // namespace hoic
