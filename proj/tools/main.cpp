#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "hoic/checkpoint.hpp"
#include "hoic/dataset.hpp"
#include "hoic/train.hpp"

int main(int argc, char** argv) {
  using namespace hoic::cli;
  CLI::App app{"Contact-aware human-object interaction detector"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Overrides the configured seed");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--log-every", common.log_every, "Log every N training steps")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen", "Generate train and eval datasets");
  auto* train = app.add_subcommand("train", "Train and write a checkpoint plus a JSONL loss log");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write metrics.json");
  auto* ablate = app.add_subcommand("ablate", "Train baseline, +CPAM, +H-O, +M-G and tabulate metrics");
  auto* sweep = app.add_subcommand("sweep-loss", "Train over an (alpha, beta) grid and tabulate metrics");
  auto* viz = app.add_subcommand("viz", "Render PNG overlays of predictions");
  for (auto* sub : {gen, train, eval, ablate, sweep, viz}) add_common(sub);

  std::string checkpoint, split = "eval", grid;
  std::vector<int> ids;
  double min_conf = 0.3;
  int max_pairs = 4;
  for (auto* sub : {eval, viz}) sub->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  for (auto* sub : {eval, ablate, sweep, viz}) {
    sub->add_option("--split", split, "Split to score: train or eval")->check(CLI::IsMember({"train", "eval"}));
  }
  sweep->add_option("--grid", grid, "alpha:beta pairs, comma separated (default: the six-point grid)");
  viz->add_option("--ids", ids, "Sample ids (default: all)");
  viz->add_option("--min-confidence", min_conf, "Hide pairs below this confidence")->capture_default_str();
  viz->add_option("--max-pairs", max_pairs, "Pairs drawn per image")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  for (auto* sub : {gen, train, eval, ablate, sweep, viz}) {
    if (sub->parsed() && sub->count("--seed")) common.seed = seed;
  }

  try {
    if (gen->parsed()) cmd_gen(common);
    if (train->parsed()) cmd_train(common);
    if (eval->parsed()) cmd_eval(common, checkpoint, split);
    if (ablate->parsed()) cmd_ablate(common, split);
    if (sweep->parsed()) cmd_sweep_loss(common, grid.empty() ? default_loss_grid() : parse_grid(grid), split);
    if (viz->parsed()) cmd_viz(common, checkpoint, ids, split, min_conf, max_pairs);
  } catch (const hoic::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const hoic::SchemaError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return 3;
  } catch (const hoic::TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
