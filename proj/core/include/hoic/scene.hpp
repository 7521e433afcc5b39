#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hoic {

inline constexpr int kNumParts = 17;
inline constexpr int kStride = 32;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Names for body parts, actions and object categories.
///
/// The last action is always "no_interaction"; it supervises query slots that
/// are not matched to any ground-truth pair.
struct Vocab {
  std::vector<std::string> body_parts;
  std::vector<std::string> actions;
  std::vector<std::string> objects;

  // First `num_actions` interaction verbs (plus no_interaction) and first
  // `num_objects` object names of the built-in tables.
  static Vocab standard(int num_actions = 8, int num_objects = 6);

  int num_actions() const { return static_cast<int>(actions.size()); }  // includes no_interaction
  int num_objects() const { return static_cast<int>(objects.size()); }
  int no_interaction() const { return num_actions() - 1; }

  void validate() const;
  bool operator==(const Vocab&) const = default;
};

/// Axis-aligned box in pixels, (x1, y1) top-left and (x2, y2) bottom-right.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
  bool valid_in(int width_px, int height_px) const {
    return 0 <= x1 && x1 < x2 && x2 <= width_px && 0 <= y1 && y1 < y2 && y2 <= height_px;
  }
  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);
// Generalized IoU: IoU minus the fraction of the enclosing box not covered
// by the union.
double generalized_iou(const Box& a, const Box& b);

struct InteractionPair {
  Box human_box;
  Box object_box;
  int object_class = 0;
  int action_class = 0;
  std::vector<int> contact_parts;  // sorted, values in [1, 17]
  bool operator==(const InteractionPair&) const = default;
};

/// Per-pixel part labels: 0 background, k in [1, 17] contact of part k.
struct ContactMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  ContactMap() = default;
  ContactMap(int h, int w) : height(h), width(w), labels(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const ContactMap&) const = default;
};

using ContactLabels = std::array<std::uint8_t, kNumParts>;

struct SceneSample {
  int id = 0;
  int height = 0;
  int width = 0;
  std::vector<float> image;  // (H, W, 3) row-major, values in [0, 1]
  std::vector<InteractionPair> pairs;
  ContactMap contact_map;
  ContactLabels contact_labels{};

  float pixel(int y, int x, int c) const { return image[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const SceneSample&) const = default;
};

struct SceneConfig {
  int height = 128;
  int width = 128;
  int min_pairs = 1;
  int max_pairs = 2;
  Vocab vocab = Vocab::standard();
  // When non-empty, one pair per entry with exactly these action indices.
  std::vector<int> forced_actions;
  double noise = 0.03;

  void validate() const;
};

/// Deterministic synthetic scene for a seed.
///
/// Each pair gets a vertical slot of the image. The human is a composite of
/// 17 rectangular part regions; the object is placed relative to the parts
/// its action touches. Contact bands are the overlap of each touched part
/// with the object, dilated by one pixel and clipped to the pair's
/// enclosing rectangle; lower part indices win shared pixels.
SceneSample generate_scene(std::uint64_t seed, const SceneConfig& config);

/// Binary presence vector: entry k-1 is 1 iff label k occurs in the map.
ContactLabels encode_contact_labels(const ContactMap& map);

/// Part indices touched by an action in the generator's rules (empty for
/// non-contact actions). Indexed by the standard action table.
const std::vector<int>& action_contact_parts(const std::string& action);

/// RGB color used to render part k (1-based) in images and overlays.
std::array<float, 3> part_color(int part);

}  // namespace hoic
