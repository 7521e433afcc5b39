#include "hoic/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

namespace hoic {

namespace {

const std::vector<std::string> kPartNames = {
    "head",        "neck",        "chest",      "abdomen",    "buttocks",   "left_upper_arm",
    "right_upper_arm", "left_forearm", "right_forearm", "left_hand", "right_hand", "left_thigh",
    "right_thigh", "left_shin",   "right_shin", "left_foot",  "right_foot"};

// Part regions relative to the human box: u along x, v along y.
struct RelRect {
  double u0, v0, u1, v1;
};
const std::array<RelRect, kNumParts> kPartLayout = {{
    {0.30, 0.00, 0.70, 0.18},  // head
    {0.42, 0.18, 0.58, 0.22},  // neck
    {0.25, 0.22, 0.75, 0.38},  // chest
    {0.25, 0.38, 0.75, 0.50},  // abdomen
    {0.25, 0.50, 0.75, 0.56},  // buttocks
    {0.05, 0.22, 0.25, 0.36},  // left upper arm
    {0.75, 0.22, 0.95, 0.36},  // right upper arm
    {0.05, 0.36, 0.25, 0.48},  // left forearm
    {0.75, 0.36, 0.95, 0.48},  // right forearm
    {0.00, 0.48, 0.25, 0.55},  // left hand
    {0.75, 0.48, 1.00, 0.55},  // right hand
    {0.25, 0.56, 0.50, 0.74},  // left thigh
    {0.50, 0.56, 0.75, 0.74},  // right thigh
    {0.25, 0.74, 0.50, 0.92},  // left shin
    {0.50, 0.74, 0.75, 0.92},  // right shin
    {0.20, 0.92, 0.50, 1.00},  // left foot
    {0.50, 0.92, 0.80, 1.00},  // right foot
}};

enum class Shape { circle, rect, trapezoid };

struct ObjectKind {
  std::string name;
  int width, height;  // at 128 px scale
  Shape shape;
  std::array<float, 3> color;
};
const std::vector<ObjectKind> kObjects = {
    {"ball", 10, 10, Shape::circle, {1.00f, 0.55f, 0.05f}},
    {"box", 10, 10, Shape::rect, {0.55f, 0.33f, 0.12f}},
    {"chair", 18, 10, Shape::rect, {0.15f, 0.30f, 0.95f}},
    {"hat", 14, 7, Shape::trapezoid, {0.65f, 0.10f, 0.75f}},
    {"cup", 6, 9, Shape::rect, {0.10f, 0.90f, 0.90f}},
    {"board", 22, 5, Shape::rect, {0.95f, 0.95f, 0.20f}},
};

enum class Anchor { relative, right_of_head };

struct ActionRule {
  std::string name;
  std::vector<int> parts;
  std::vector<std::string> objects;  // candidates, in preference order
  Anchor anchor;
  double u, v;        // object center relative to the human box
  double dy_px = 0;   // extra vertical offset at 128 px scale
};
const std::vector<ActionRule> kActions = {
    {"hold", {11}, {"cup", "ball", "box"}, Anchor::relative, 0.875, 0.515},
    {"carry", {3, 7}, {"box", "ball", "board"}, Anchor::relative, 0.75, 0.29},
    {"kick", {17}, {"ball", "box"}, Anchor::relative, 0.85, 0.96},
    {"sit_on", {5, 12, 13}, {"chair", "box"}, Anchor::relative, 0.50, 0.60},
    {"wear", {1}, {"hat"}, Anchor::relative, 0.50, 0.02},
    {"step_on", {16, 17}, {"board", "box"}, Anchor::relative, 0.50, 1.00, -1.0},
    {"lean_on", {8, 10}, {"box", "chair"}, Anchor::relative, 0.12, 0.47},
    {"look_at", {}, {"ball", "cup", "hat", "box"}, Anchor::right_of_head, 0.0, 0.10},
};

// SplitMix64 stream; std distributions are not portable across libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ull) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

struct PixRect {
  int x0, y0, x1, y1;  // exclusive max
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

PixRect part_rect(const PixRect& human, int part) {
  const auto& r = kPartLayout[static_cast<std::size_t>(part - 1)];
  const int w = human.x1 - human.x0, h = human.y1 - human.y0;
  PixRect p{human.x0 + static_cast<int>(std::lround(r.u0 * w)), human.y0 + static_cast<int>(std::lround(r.v0 * h)),
            human.x0 + static_cast<int>(std::lround(r.u1 * w)), human.y0 + static_cast<int>(std::lround(r.v1 * h))};
  p.x1 = std::max(p.x1, p.x0 + 1);
  p.y1 = std::max(p.y1, p.y0 + 1);
  return p;
}

const ActionRule* find_rule(const std::string& name) {
  for (const auto& r : kActions) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

int find_object(const Vocab& vocab, const std::string& name) {
  for (int i = 0; i < vocab.num_objects(); ++i) {
    if (vocab.objects[static_cast<std::size_t>(i)] == name) return i;
  }
  return -1;
}

const ObjectKind& object_kind(const std::string& name) {
  for (const auto& o : kObjects) {
    if (o.name == name) return o;
  }
  throw ConfigError("no rendering rule for object '" + name + "'");
}

std::array<float, 3> hsv(double h, double s, double v) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {float(v), float(t), float(p)};
    case 1: return {float(q), float(v), float(p)};
    case 2: return {float(p), float(v), float(t)};
    case 3: return {float(p), float(q), float(v)};
    case 4: return {float(t), float(p), float(v)};
    default: return {float(v), float(p), float(q)};
  }
}

}  // namespace

Vocab Vocab::standard(int num_actions, int num_objects) {
  if (num_actions < 1 || num_actions > static_cast<int>(kActions.size())) {
    throw ConfigError("num_actions must be in [1, " + std::to_string(kActions.size()) + "]");
  }
  if (num_objects < 1 || num_objects > static_cast<int>(kObjects.size())) {
    throw ConfigError("num_objects must be in [1, " + std::to_string(kObjects.size()) + "]");
  }
  Vocab v;
  v.body_parts = kPartNames;
  for (int i = 0; i < num_actions; ++i) v.actions.push_back(kActions[static_cast<std::size_t>(i)].name);
  v.actions.push_back("no_interaction");
  for (int i = 0; i < num_objects; ++i) v.objects.push_back(kObjects[static_cast<std::size_t>(i)].name);
  return v;
}

void Vocab::validate() const {
  if (body_parts.size() != kNumParts) {
    throw ConfigError("vocab must list exactly 17 body parts, got " + std::to_string(body_parts.size()));
  }
  if (actions.size() < 2) throw ConfigError("vocab needs at least one action besides no_interaction");
  if (actions.back() != "no_interaction") throw ConfigError("last vocab action must be no_interaction");
  if (objects.empty()) throw ConfigError("vocab has no object categories");
  for (const auto* list : {&body_parts, &actions, &objects}) {
    std::set<std::string> seen(list->begin(), list->end());
    if (seen.size() != list->size()) throw ConfigError("vocab names must be unique");
  }
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = iw > 0 && ih > 0 ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double generalized_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = iw > 0 && ih > 0 ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  const double hull = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  return inter / uni - (hull - uni) / hull;
}

void SceneConfig::validate() const {
  if (height <= 0 || width <= 0 || height % kStride != 0 || width % kStride != 0) {
    throw ConfigError("scene height and width must be positive multiples of 32, got " + std::to_string(height) +
                      "x" + std::to_string(width));
  }
  if (min_pairs < 0 || max_pairs < min_pairs) throw ConfigError("invalid pair count range");
  vocab.validate();
  for (int a : forced_actions) {
    if (a < 0 || a >= vocab.no_interaction()) throw ConfigError("forced action index out of range");
  }
  for (std::size_t i = 0; i + 1 < vocab.actions.size(); ++i) {
    if (!find_rule(vocab.actions[i])) throw ConfigError("no generator rule for action '" + vocab.actions[i] + "'");
  }
  for (const auto& o : vocab.objects) object_kind(o);
}

const std::vector<int>& action_contact_parts(const std::string& action) {
  static const std::vector<int> none;
  const ActionRule* r = find_rule(action);
  return r ? r->parts : none;
}

std::array<float, 3> part_color(int part) {
  // Alternate saturation so neighbouring hues stay distinguishable.
  return hsv(static_cast<double>(part - 1) / kNumParts, part % 2 ? 0.85 : 0.55, part % 2 ? 0.95 : 0.75);
}

ContactLabels encode_contact_labels(const ContactMap& map) {
  ContactLabels out{};
  for (std::uint8_t v : map.labels) {
    if (v >= 1 && v <= kNumParts) out[v - 1] = 1;
  }
  return out;
}

SceneSample generate_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  Rng rng(seed);
  const int H = config.height, W = config.width;
  const double scale = std::min(H, W) / 128.0;

  SceneSample s;
  s.id = static_cast<int>(seed);
  s.height = H;
  s.width = W;
  s.image.assign(static_cast<std::size_t>(H) * W * 3, 0.0f);
  s.contact_map = ContactMap(H, W);

  // Background: dark gray with per-pixel noise.
  const double base = rng.uniform(0.08, 0.2);
  for (auto& px : s.image) px = static_cast<float>(std::clamp(base + rng.uniform(-config.noise, config.noise), 0.0, 1.0));

  std::vector<int> actions = config.forced_actions;
  if (actions.empty()) {
    const int n = rng.integer(config.min_pairs, config.max_pairs);
    for (int i = 0; i < n; ++i) actions.push_back(rng.integer(0, config.vocab.no_interaction() - 1));
  }
  const int n = static_cast<int>(actions.size());
  if (n == 0) return s;
  const int slot_w = W / n;

  auto paint = [&](int x, int y, const std::array<float, 3>& c, double shade) {
    if (x < 0 || y < 0 || x >= W || y >= H) return;
    for (int ch = 0; ch < 3; ++ch) {
      s.image[(static_cast<std::size_t>(y) * W + x) * 3 + ch] =
          static_cast<float>(std::clamp(c[static_cast<std::size_t>(ch)] * shade, 0.0, 1.0));
    }
  };

  for (int i = 0; i < n; ++i) {
    const ActionRule& rule = *find_rule(config.vocab.actions[static_cast<std::size_t>(actions[static_cast<std::size_t>(i)])]);

    // Object class: a candidate present in the vocab, else any vocab object.
    std::vector<int> candidates;
    for (const auto& name : rule.objects) {
      if (int k = find_object(config.vocab, name); k >= 0) candidates.push_back(k);
    }
    if (candidates.empty()) {
      for (int k = 0; k < config.vocab.num_objects(); ++k) candidates.push_back(k);
    }
    const int obj_class = candidates[static_cast<std::size_t>(rng.integer(0, static_cast<int>(candidates.size()) - 1))];
    const ObjectKind& kind = object_kind(config.vocab.objects[static_cast<std::size_t>(obj_class)]);

    // Human placement inside the slot.
    const int hw = static_cast<int>(std::lround(slot_w * rng.uniform(0.30, 0.36)));
    const int human_w = std::max(12, std::min(hw, static_cast<int>(std::lround(26 * scale))));
    const int human_h = std::max(24, static_cast<int>(std::lround(H * rng.uniform(0.42, 0.50))));
    const int slot_x0 = i * slot_w;
    const int cx = slot_x0 + slot_w / 2 + rng.integer(-static_cast<int>(4 * scale), static_cast<int>(4 * scale));
    const int top_margin = static_cast<int>(std::lround(8 * scale));
    const int bottom_margin = static_cast<int>(std::lround(8 * scale));
    const int y0 = rng.integer(top_margin, std::max(top_margin, H - human_h - bottom_margin));
    const PixRect human{cx - human_w / 2, y0, cx - human_w / 2 + human_w, y0 + human_h};

    std::array<PixRect, kNumParts> parts{};
    for (int k = 1; k <= kNumParts; ++k) parts[static_cast<std::size_t>(k - 1)] = part_rect(human, k);

    // Render parts from the highest index down so lower indices end on top.
    const double shade = rng.uniform(0.85, 1.0);
    for (int k = kNumParts; k >= 1; --k) {
      const auto& r = parts[static_cast<std::size_t>(k - 1)];
      for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) paint(x, y, part_color(k), shade);
      }
    }

    // Object placement.
    const int ow = std::max(2, static_cast<int>(std::lround(kind.width * scale)));
    const int oh = std::max(2, static_cast<int>(std::lround(kind.height * scale)));
    double ocx, ocy;
    if (rule.anchor == Anchor::right_of_head) {
      ocx = human.x1 + 2.0 * scale + ow / 2.0;
      ocy = human.y0 + rule.v * human_h;
    } else {
      ocx = human.x0 + rule.u * human_w;
      ocy = human.y0 + rule.v * human_h + rule.dy_px * scale;
    }
    const int ox0 = static_cast<int>(std::lround(ocx - ow / 2.0));
    const int oy0 = static_cast<int>(std::lround(ocy - oh / 2.0));
    const PixRect orect{ox0, oy0, ox0 + ow, oy0 + oh};

    std::vector<std::uint8_t> object_mask(static_cast<std::size_t>(H) * W, 0);
    int bx0 = W, by0 = H, bx1 = 0, by1 = 0;
    for (int y = std::max(0, orect.y0); y < std::min(H, orect.y1); ++y) {
      for (int x = std::max(0, orect.x0); x < std::min(W, orect.x1); ++x) {
        const double fx = (x + 0.5 - orect.x0) / ow, fy = (y + 0.5 - orect.y0) / oh;
        bool inside = true;
        if (kind.shape == Shape::circle) {
          inside = (fx - 0.5) * (fx - 0.5) + (fy - 0.5) * (fy - 0.5) <= 0.25;
        } else if (kind.shape == Shape::trapezoid) {
          const double inset = 0.3 * (1.0 - fy);
          inside = fx >= inset && fx <= 1.0 - inset;
        }
        if (!inside) continue;
        object_mask[static_cast<std::size_t>(y) * W + x] = 1;
        paint(x, y, kind.color, 1.0);
        bx0 = std::min(bx0, x);
        by0 = std::min(by0, y);
        bx1 = std::max(bx1, x + 1);
        by1 = std::max(by1, y + 1);
      }
    }

    InteractionPair pair;
    pair.human_box = Box{double(std::max(0, human.x0)), double(std::max(0, human.y0)), double(std::min(W, human.x1)),
                         double(std::min(H, human.y1))};
    pair.object_box = Box{double(bx0), double(by0), double(bx1), double(by1)};
    pair.object_class = obj_class;
    pair.action_class = actions[static_cast<std::size_t>(i)];

    // Contact bands, clipped to the pair's enclosing rectangle.
    const PixRect clip{static_cast<int>(std::min(pair.human_box.x1, pair.object_box.x1)),
                       static_cast<int>(std::min(pair.human_box.y1, pair.object_box.y1)),
                       static_cast<int>(std::max(pair.human_box.x2, pair.object_box.x2)),
                       static_cast<int>(std::max(pair.human_box.y2, pair.object_box.y2))};
    std::vector<std::pair<int, int>> band_pixels;
    for (int k : rule.parts) {
      const auto& pr = parts[static_cast<std::size_t>(k - 1)];
      std::vector<std::uint8_t> overlap(static_cast<std::size_t>(H) * W, 0);
      for (int y = std::max(0, pr.y0); y < std::min(H, pr.y1); ++y) {
        for (int x = std::max(0, pr.x0); x < std::min(W, pr.x1); ++x) {
          overlap[static_cast<std::size_t>(y) * W + x] = object_mask[static_cast<std::size_t>(y) * W + x];
        }
      }
      for (int y = clip.y0; y < clip.y1; ++y) {
        for (int x = clip.x0; x < clip.x1; ++x) {
          bool hit = false;
          for (int dy = -1; dy <= 1 && !hit; ++dy) {
            for (int dx = -1; dx <= 1 && !hit; ++dx) {
              const int yy = y + dy, xx = x + dx;
              hit = yy >= 0 && yy < H && xx >= 0 && xx < W && overlap[static_cast<std::size_t>(yy) * W + xx];
            }
          }
          if (!hit) continue;
          auto& lbl = s.contact_map.at(y, x);
          if (lbl == 0 || lbl > k) lbl = static_cast<std::uint8_t>(k);
          band_pixels.emplace_back(y, x);
        }
      }
    }
    std::set<int> present;
    for (auto [y, x] : band_pixels) present.insert(s.contact_map.at(y, x));
    pair.contact_parts.assign(present.begin(), present.end());
    s.pairs.push_back(std::move(pair));
  }

  s.contact_labels = encode_contact_labels(s.contact_map);
  return s;
}

}  // namespace hoic
