#pragma once

#include <filesystem>

#include "hoic/config.hpp"
#include "hoic/model.hpp"
#include "hoic/optim.hpp"

namespace hoic {

// Checkpoint file layout:
//   8 bytes   magic "HOICKPT1"
//   8 bytes   little-endian uint64 header length N
//   N bytes   JSON header {"config", "step", "optimizer_steps",
//             "entries": [{"name", "kind", "size"}]}
//   then, for each entry in order, `size` little-endian float64 values.
// kind is "param", "buffer", "adam_m" or "adam_v"; names are module paths.

struct CheckpointInfo {
  RunConfig config;
  long long step = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const AdamW* optimizer,
                     const RunConfig& config, long long step);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Restores parameters, buffers and, when given, optimizer state. The model
/// must have been built from the checkpoint's config.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, Model& model, AdamW* optimizer = nullptr);

}  // namespace hoic
