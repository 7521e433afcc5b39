#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hoic/config.hpp"

namespace hoic::cli {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  int log_every = 1;
};

RunConfig load_config(const Common& common);

void cmd_gen(const Common& common);
void cmd_train(const Common& common);
void cmd_eval(const Common& common, const std::filesystem::path& checkpoint, const std::string& split);
void cmd_ablate(const Common& common, const std::string& split);
void cmd_sweep_loss(const Common& common, const std::vector<std::pair<double, double>>& grid,
                    const std::string& split);
void cmd_viz(const Common& common, const std::filesystem::path& checkpoint, const std::vector<int>& ids,
             const std::string& split, double min_confidence, int max_pairs);

/// Parses "a:b,a:b,..." into (alpha, beta) pairs.
std::vector<std::pair<double, double>> parse_grid(const std::string& text);
const std::vector<std::pair<double, double>>& default_loss_grid();

}  // namespace hoic::cli
