#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoic/scene.hpp"

namespace hoic {

/// Raised when a dataset directory violates the on-disk schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Vocab vocab;
  int height = 0;
  int width = 0;
  std::vector<SceneSample> samples;
};

/// Generates `count` scenes with seeds base_seed, base_seed + 1, ...
/// Sample ids are 0 .. count-1.
Dataset generate_dataset(std::uint64_t base_seed, int count, const SceneConfig& config);

// Layout of a dataset directory:
//   manifest.json   {"format": "hoic-dataset", "version": 1, "height", "width",
//                    "vocab": {"body_parts", "actions", "objects"},
//                    "samples": [{"id", "image", "mask", "annotation"}]}
//   img_<id>.npy    float32 (H, W, 3) in [0, 1]
//   mask_<id>.png   8-bit grayscale, pixel value = part index, 0 background
//   ann_<id>.json   {"id", "pairs": [{"human_box": [x1, y1, x2, y2],
//                    "object_box", "object_class", "action_class",
//                    "contact_parts"}], "contact_labels": [17 x {0,1}]}
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Checks a mask against the declared geometry; throws SchemaError naming
/// the sample and the number of out-of-range pixels.
void validate_mask(int sample_id, const ContactMap& map, int height, int width);

}  // namespace hoic
