#include "commands.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hoic/checkpoint.hpp"
#include "hoic/train.hpp"
#include "overlay.hpp"

namespace hoic::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON lines to a file, mirrored to stderr.
class Log {
 public:
  explicit Log(const fs::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  void write(const json& j) {
    const std::string line = j.dump();
    out_ << line << '\n';
    out_.flush();
    std::cerr << line << '\n';
  }

 private:
  std::ofstream out_;
};

void event(const std::string& name, json fields = json::object()) {
  fields["event"] = name;
  std::cerr << fields.dump() << '\n';
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Dataset split_of(const RunConfig& c, const std::string& split) {
  if (split != "train" && split != "eval") throw ConfigError("split must be train or eval, got '" + split + "'");
  return load_split(c.data, split == "eval");
}

// Trains one configuration, logging every step, and returns the trainer.
std::unique_ptr<Trainer> train_logged(const RunConfig& c, const Dataset& train, Log& log, int log_every,
                                      const json& tags = json::object()) {
  auto trainer = std::make_unique<Trainer>(c, train);
  trainer->run([&](const StepRecord& r) {
    if (r.step % log_every != 0) return;
    json j = to_json(r);
    for (auto it = tags.begin(); it != tags.end(); ++it) j[it.key()] = it.value();
    log.write(j);
  });
  return trainer;
}

json metrics_row(const Evaluation& e, const Vocab& vocab) { return to_json(e.report, vocab); }

}  // namespace

RunConfig load_config(const Common& common) {
  RunConfig c = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
  if (common.seed) c.seed = *common.seed;
  c.validate();
  return c;
}

void cmd_gen(const Common& common) {
  const RunConfig c = load_config(common);
  for (const bool eval : {false, true}) {
    DataConfig d = c.data;
    d.train_dir.clear();
    d.eval_dir.clear();
    const Dataset data = load_split(d, eval);
    const fs::path dir = common.out / (eval ? "eval" : "train");
    write_dataset(data, dir);
    event("gen", {{"split", eval ? "eval" : "train"}, {"dir", dir.string()}, {"samples", data.samples.size()}});
  }
}

void cmd_train(const Common& common) {
  const RunConfig c = load_config(common);
  fs::create_directories(common.out);
  write_json(common.out / "config.json", to_json(c));
  const Dataset train = split_of(c, "train");
  Log log(common.out / "train_log.jsonl");
  const auto start = std::chrono::steady_clock::now();
  auto trainer = train_logged(c, train, log, common.log_every);
  const fs::path ckpt = common.out / "model.ckpt";
  save_checkpoint(ckpt, trainer->model(), &trainer->optimizer(), c, trainer->step());
  event("train_done", {{"steps", trainer->step()},
                       {"checkpoint", ckpt.string()},
                       {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}});
}

void cmd_eval(const Common& common, const fs::path& checkpoint, const std::string& split) {
  CheckpointInfo info = read_checkpoint_info(checkpoint);
  RunConfig c = info.config;
  if (!common.config_path.empty()) c.data = load_config(common).data;
  Model model(c.resolved_model(), c.seed);
  load_checkpoint(checkpoint, model);
  const Dataset data = split_of(c, split);
  const Evaluation e = evaluate(model, data);
  json report = metrics_row(e, data.vocab);
  report["split"] = split;
  report["samples"] = data.samples.size();
  report["checkpoint_step"] = info.step;
  fs::create_directories(common.out);
  write_json(common.out / "metrics.json", report);
  std::cout << report.dump(2) << '\n';
}

void cmd_ablate(const Common& common, const std::string& split) {
  const RunConfig base = load_config(common);
  fs::create_directories(common.out);
  const Dataset train = split_of(base, "train");
  const Dataset held = split == "train" ? Dataset{} : split_of(base, split);
  const Dataset& scored = split == "train" ? train : held;
  // Cumulative: each row adds one module to the previous.
  const std::vector<std::pair<std::string, AblationFlags>> rows{{"baseline", {false, false, false}},
                                                                {"+CPAM", {true, false, false}},
                                                                {"+H-O", {true, true, false}},
                                                                {"+M-G", {true, true, true}}};
  Log log(common.out / "ablate_log.jsonl");
  json table = json::array();
  for (const auto& [label, flags] : rows) {
    RunConfig c = base;
    c.model.ablation = flags;
    auto trainer = train_logged(c, train, log, common.log_every, {{"row", label}});
    json row = metrics_row(evaluate(trainer->model(), scored), scored.vocab);
    row["row"] = label;
    row["cpam_enabled"] = flags.cpam_enabled;
    row["ho_enhancer_enabled"] = flags.ho_enhancer_enabled;
    row["mask_guided_enabled"] = flags.mask_guided_enabled;
    table.push_back(row);
    event("ablate_row", row);
  }
  write_json(common.out / "ablation.json", {{"split", split}, {"seed", base.seed}, {"rows", table}});
}

void cmd_sweep_loss(const Common& common, const std::vector<std::pair<double, double>>& grid,
                    const std::string& split) {
  const RunConfig base = load_config(common);
  fs::create_directories(common.out);
  const Dataset train = split_of(base, "train");
  const Dataset held = split == "train" ? Dataset{} : split_of(base, split);
  const Dataset& scored = split == "train" ? train : held;
  Log log(common.out / "sweep_log.jsonl");
  json table = json::array();
  for (const auto& [alpha, beta] : grid) {
    RunConfig c = base;
    c.loss.alpha = alpha;
    c.loss.beta = beta;
    c.validate();
    auto trainer = train_logged(c, train, log, common.log_every, {{"alpha_cfg", alpha}, {"beta_cfg", beta}});
    json row = metrics_row(evaluate(trainer->model(), scored), scored.vocab);
    row["alpha"] = alpha;
    row["beta"] = beta;
    table.push_back(row);
    event("sweep_row", row);
  }
  write_json(common.out / "sweep.json", {{"split", split}, {"seed", base.seed}, {"rows", table}});
}

void cmd_viz(const Common& common, const fs::path& checkpoint, const std::vector<int>& ids, const std::string& split,
             double min_confidence, int max_pairs) {
  const CheckpointInfo info = read_checkpoint_info(checkpoint);
  RunConfig c = info.config;
  if (!common.config_path.empty()) c.data = load_config(common).data;
  Model model(c.resolved_model(), c.seed);
  load_checkpoint(checkpoint, model);
  const Dataset data = split_of(c, split);
  const Evaluation e = evaluate(model, data);
  fs::create_directories(common.out);
  std::vector<int> chosen = ids;
  if (chosen.empty()) {
    for (int i = 0; i < static_cast<int>(data.samples.size()); ++i) chosen.push_back(i);
  }
  for (int id : chosen) {
    if (id < 0 || id >= static_cast<int>(data.samples.size())) {
      throw ConfigError("sample id " + std::to_string(id) + " out of range");
    }
    std::vector<ScoredPair> pairs = e.pairs[static_cast<std::size_t>(id)];
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
    std::vector<ScoredPair> shown;
    for (const ScoredPair& p : pairs) {
      if (p.confidence < min_confidence || static_cast<int>(shown.size()) >= max_pairs) break;
      const bool duplicate = std::any_of(shown.begin(), shown.end(), [&](const ScoredPair& s) {
        return s.action_class == p.action_class && s.object_class == p.object_class &&
               iou(s.human_box, p.human_box) > 0.7 && iou(s.object_box, p.object_box) > 0.7;
      });
      if (!duplicate) shown.push_back(p);
    }
    const auto canvas = viz::render_overlay(data.samples[static_cast<std::size_t>(id)], shown,
                                            e.pred_maps[static_cast<std::size_t>(id)], data.vocab);
    const fs::path png = common.out / ("overlay_" + std::to_string(id) + ".png");
    image_io::write_png(png, canvas.image());
    event("viz", {{"sample", id}, {"pairs", shown.size()}, {"png", png.string()}});
  }
}

std::vector<std::pair<double, double>> parse_grid(const std::string& text) {
  std::vector<std::pair<double, double>> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("grid entry '" + item + "' is not alpha:beta");
    try {
      grid.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    } catch (const std::logic_error&) {
      throw ConfigError("grid entry '" + item + "' is not numeric");
    }
  }
  if (grid.empty()) throw ConfigError("empty loss grid");
  return grid;
}

const std::vector<std::pair<double, double>>& default_loss_grid() {
  static const std::vector<std::pair<double, double>> grid{{0.1, 1.0}, {0.5, 1.0}, {1.0, 1.0},
                                                           {0.1, 0.5}, {0.5, 0.1}, {1.0, 0.1}};
  return grid;
}

}  // namespace hoic::cli
