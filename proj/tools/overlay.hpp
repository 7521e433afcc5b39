#pragma once

#include <string>
#include <vector>

#include "hoic/image_io.hpp"
#include "hoic/metrics.hpp"
#include "hoic/scene.hpp"

namespace hoic::viz {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
};

inline constexpr Color kRed{230, 40, 40};
inline constexpr Color kGreen{40, 210, 60};

class Canvas {
 public:
  Canvas(int width, int height);

  void fill_rect(int x0, int y0, int x1, int y1, Color c);
  void draw_rect(int x0, int y0, int x1, int y1, Color c, int thickness = 1);
  // 5x7 glyphs scaled by `scale`; unsupported characters render as boxes.
  void draw_text(int x, int y, const std::string& text, Color c, int scale = 1);
  static int text_width(const std::string& text, int scale = 1) { return static_cast<int>(text.size()) * 6 * scale; }

  void set(int x, int y, Color c);
  int width() const { return width_; }
  int height() const { return height_; }
  const image_io::Rgb8& image() const { return image_; }

 private:
  int width_, height_;
  image_io::Rgb8 image_;
};

Color part_color(int part);

/// Two panels side by side, each `zoom` times the scene size: the scene with
/// red human boxes, green object boxes and "action object" captions, and the
/// contact regions on black.
Canvas render_overlay(const SceneSample& scene, const std::vector<ScoredPair>& pairs, const ContactMap& contact,
                      const Vocab& vocab, int zoom = 3);

}  // namespace hoic::viz
