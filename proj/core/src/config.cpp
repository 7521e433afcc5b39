#include "hoic/config.hpp"

#include <fstream>
#include <set>

namespace hoic {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError("unknown config key '" + section + "." + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

SceneConfig DataConfig::scene_config() const {
  SceneConfig s;
  s.height = height;
  s.width = width;
  s.min_pairs = min_pairs;
  s.max_pairs = max_pairs;
  s.vocab = Vocab::standard(num_actions, num_objects);
  s.noise = noise;
  return s;
}

ModelConfig RunConfig::resolved_model() const {
  ModelConfig m = model;
  m.height = data.height;
  m.width = data.width;
  m.num_actions = data.num_actions + 1;
  m.num_objects = data.num_objects;
  return m;
}

void RunConfig::validate() const {
  data.scene_config().validate();
  if (data.train_count < 1) throw ConfigError("data.train_count must be positive");
  if (data.eval_count < 0) throw ConfigError("data.eval_count must be non-negative");
  resolved_model().validate();
  if (loss.alpha < 0 || loss.beta < 0) throw ConfigError("loss.alpha and loss.beta must be non-negative");
  loss.match.validate();
  if (optim.lr <= 0) throw ConfigError("optim.lr must be positive");
  if (optim.weight_decay < 0) throw ConfigError("optim.weight_decay must be non-negative");
  if (optim.batch_size < 1) throw ConfigError("optim.batch_size must be positive");
  if (optim.epochs < 0) throw ConfigError("optim.epochs must be non-negative");
  if (optim.teacher_force_epochs < 0) throw ConfigError("optim.teacher_force_epochs must be non-negative");
  if (optim.lr_schedule != "constant" && optim.lr_schedule != "cosine") {
    throw ConfigError("optim.lr_schedule must be constant or cosine, got '" + optim.lr_schedule + "'");
  }
  if (optim.warmup_steps < 0) throw ConfigError("optim.warmup_steps must be non-negative");
}

json to_json(const RunConfig& c) {
  const ModelConfig& m = c.model;
  return {
      {"seed", c.seed},
      {"data",
       {{"train_dir", c.data.train_dir},
        {"eval_dir", c.data.eval_dir},
        {"train_count", c.data.train_count},
        {"eval_count", c.data.eval_count},
        {"train_seed", c.data.train_seed},
        {"eval_seed", c.data.eval_seed},
        {"height", c.data.height},
        {"width", c.data.width},
        {"min_pairs", c.data.min_pairs},
        {"max_pairs", c.data.max_pairs},
        {"num_actions", c.data.num_actions},
        {"num_objects", c.data.num_objects},
        {"noise", c.data.noise}}},
      {"model",
       {{"norm", nn::to_string(m.norm)},
        {"backbone",
         {{"channels", m.backbone.channels},
          {"stage_widths", m.backbone.stage_widths},
          {"activation", m.backbone.activation}}},
        {"cpam", {{"dropout", m.cpam.dropout}}},
        {"pgcs",
         {{"decoder_widths", m.pgcs.decoder_widths},
          {"gate_hidden", m.pgcs.gate_hidden},
          {"background_weight", m.pgcs.background_weight}}},
        {"iim",
         {{"num_queries", m.iim.num_queries},
          {"query_dim", m.iim.query_dim},
          {"heads", m.iim.heads},
          {"encoder_layers", m.iim.encoder_layers},
          {"stages", m.iim.stages},
          {"ffn_dim", m.iim.ffn_dim},
          {"split_box_head", m.iim.split_box_head}}},
        {"enhancer_threshold", m.enhancer_threshold},
        {"roi_mode", to_string(m.roi_mode)}}},
      {"ablation",
       {{"cpam_enabled", m.ablation.cpam_enabled},
        {"ho_enhancer_enabled", m.ablation.ho_enhancer_enabled},
        {"mask_guided_enabled", m.ablation.mask_guided_enabled}}},
      {"loss",
       {{"alpha", c.loss.alpha},
        {"beta", c.loss.beta},
        {"w_cls", c.loss.match.cls},
        {"w_box", c.loss.match.box},
        {"w_iou", c.loss.match.iou},
        {"w_no_interaction", c.loss.match.no_interaction}}},
      {"optim",
       {{"lr", c.optim.lr},
        {"weight_decay", c.optim.weight_decay},
        {"clip_norm", c.optim.clip_norm},
        {"batch_size", c.optim.batch_size},
        {"epochs", c.optim.epochs},
        {"max_steps", c.optim.max_steps},
        {"teacher_force_boxes", c.optim.teacher_force_boxes},
        {"teacher_force_epochs", c.optim.teacher_force_epochs},
        {"lr_schedule", c.optim.lr_schedule},
        {"warmup_steps", c.optim.warmup_steps}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "", {"seed", "data", "model", "ablation", "loss", "optim"});
  read(j, "seed", c.seed);
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, "data", {"train_dir", "eval_dir", "train_count", "eval_count", "train_seed", "eval_seed", "height",
                           "width", "min_pairs", "max_pairs", "num_actions", "num_objects", "noise"});
    read(d, "train_dir", c.data.train_dir);
    read(d, "eval_dir", c.data.eval_dir);
    read(d, "train_count", c.data.train_count);
    read(d, "eval_count", c.data.eval_count);
    read(d, "train_seed", c.data.train_seed);
    read(d, "eval_seed", c.data.eval_seed);
    read(d, "height", c.data.height);
    read(d, "width", c.data.width);
    read(d, "min_pairs", c.data.min_pairs);
    read(d, "max_pairs", c.data.max_pairs);
    read(d, "num_actions", c.data.num_actions);
    read(d, "num_objects", c.data.num_objects);
    read(d, "noise", c.data.noise);
  }
  ModelConfig& m = c.model;
  if (j.contains("model")) {
    const json& mj = j["model"];
    check_keys(mj, "model", {"norm", "backbone", "cpam", "pgcs", "iim", "enhancer_threshold", "roi_mode"});
    if (mj.contains("norm")) m.norm = nn::parse_norm(mj["norm"].get<std::string>());
    if (mj.contains("backbone")) {
      const json& b = mj["backbone"];
      check_keys(b, "model.backbone", {"channels", "stage_widths", "activation"});
      read(b, "channels", m.backbone.channels);
      read(b, "stage_widths", m.backbone.stage_widths);
      read(b, "activation", m.backbone.activation);
    }
    if (mj.contains("cpam")) {
      check_keys(mj["cpam"], "model.cpam", {"dropout"});
      read(mj["cpam"], "dropout", m.cpam.dropout);
    }
    if (mj.contains("pgcs")) {
      const json& p = mj["pgcs"];
      check_keys(p, "model.pgcs", {"decoder_widths", "gate_hidden", "background_weight"});
      read(p, "decoder_widths", m.pgcs.decoder_widths);
      read(p, "gate_hidden", m.pgcs.gate_hidden);
      read(p, "background_weight", m.pgcs.background_weight);
    }
    if (mj.contains("iim")) {
      const json& i = mj["iim"];
      check_keys(i, "model.iim",
                 {"num_queries", "query_dim", "heads", "encoder_layers", "stages", "ffn_dim", "split_box_head"});
      read(i, "num_queries", m.iim.num_queries);
      read(i, "query_dim", m.iim.query_dim);
      read(i, "heads", m.iim.heads);
      read(i, "encoder_layers", m.iim.encoder_layers);
      read(i, "stages", m.iim.stages);
      read(i, "ffn_dim", m.iim.ffn_dim);
      read(i, "split_box_head", m.iim.split_box_head);
    }
    read(mj, "enhancer_threshold", m.enhancer_threshold);
    if (mj.contains("roi_mode")) m.roi_mode = parse_roi_mode(mj["roi_mode"].get<std::string>());
  }
  if (j.contains("ablation")) {
    const json& a = j["ablation"];
    check_keys(a, "ablation", {"cpam_enabled", "ho_enhancer_enabled", "mask_guided_enabled"});
    read(a, "cpam_enabled", m.ablation.cpam_enabled);
    read(a, "ho_enhancer_enabled", m.ablation.ho_enhancer_enabled);
    read(a, "mask_guided_enabled", m.ablation.mask_guided_enabled);
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    check_keys(l, "loss", {"alpha", "beta", "w_cls", "w_box", "w_iou", "w_no_interaction"});
    read(l, "alpha", c.loss.alpha);
    read(l, "beta", c.loss.beta);
    read(l, "w_cls", c.loss.match.cls);
    read(l, "w_box", c.loss.match.box);
    read(l, "w_iou", c.loss.match.iou);
    read(l, "w_no_interaction", c.loss.match.no_interaction);
  }
  if (j.contains("optim")) {
    const json& o = j["optim"];
    check_keys(o, "optim", {"lr", "weight_decay", "clip_norm", "batch_size", "epochs", "max_steps",
                            "teacher_force_boxes", "teacher_force_epochs", "lr_schedule", "warmup_steps"});
    read(o, "lr", c.optim.lr);
    read(o, "weight_decay", c.optim.weight_decay);
    read(o, "clip_norm", c.optim.clip_norm);
    read(o, "batch_size", c.optim.batch_size);
    read(o, "epochs", c.optim.epochs);
    read(o, "max_steps", c.optim.max_steps);
    read(o, "teacher_force_boxes", c.optim.teacher_force_boxes);
    read(o, "teacher_force_epochs", c.optim.teacher_force_epochs);
    read(o, "lr_schedule", c.optim.lr_schedule);
    read(o, "warmup_steps", c.optim.warmup_steps);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace hoic
