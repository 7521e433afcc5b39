#include "overlay.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>

namespace hoic::viz {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

const std::map<char, Glyph>& font() {
  static const std::map<char, Glyph> f{
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}}, {'b', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x1E}},
      {'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}}, {'d', {0x01, 0x01, 0x0D, 0x13, 0x11, 0x11, 0x0F}},
      {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}}, {'f', {0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08}},
      {'g', {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}}, {'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'i', {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E}}, {'j', {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C}},
      {'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}}, {'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'m', {0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11}}, {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'o', {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}}, {'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
      {'q', {0x00, 0x00, 0x0D, 0x13, 0x0F, 0x01, 0x01}}, {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
      {'s', {0x00, 0x00, 0x0E, 0x10, 0x0E, 0x01, 0x1E}}, {'t', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}},
      {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D}}, {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'w', {0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0A}}, {'x', {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11}},
      {'y', {0x00, 0x00, 0x11, 0x11, 0x0F, 0x01, 0x0E}}, {'z', {0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}, {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  return f;
}

constexpr Glyph kUnknown{0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};

}  // namespace

Canvas::Canvas(int width, int height) : width_(width), height_(height) {
  image_.width = width;
  image_.height = height;
  image_.pixels.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

void Canvas::set(int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  image_.pixels[i] = c.r;
  image_.pixels[i + 1] = c.g;
  image_.pixels[i + 2] = c.b;
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Color c) {
  for (int y = std::max(0, y0); y < std::min(height_, y1); ++y)
    for (int x = std::max(0, x0); x < std::min(width_, x1); ++x) set(x, y, c);
}

void Canvas::draw_rect(int x0, int y0, int x1, int y1, Color c, int thickness) {
  fill_rect(x0, y0, x1, y0 + thickness, c);
  fill_rect(x0, y1 - thickness, x1, y1, c);
  fill_rect(x0, y0, x0 + thickness, y1, c);
  fill_rect(x1 - thickness, y0, x1, y1, c);
}

void Canvas::draw_text(int x, int y, const std::string& text, Color c, int scale) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    const auto it = font().find(ch);
    const Glyph& g = it == font().end() ? kUnknown : it->second;
    const int ox = x + static_cast<int>(i) * 6 * scale;
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (g[static_cast<std::size_t>(row)] & (0x10 >> col)) {
          fill_rect(ox + col * scale, y + row * scale, ox + (col + 1) * scale, y + (row + 1) * scale, c);
        }
      }
    }
  }
}

Color part_color(int part) {
  // Evenly spaced hues, full saturation.
  const double h = std::fmod((part - 1) * 360.0 / kNumParts, 360.0) / 60.0;
  const double x = 1 - std::abs(std::fmod(h, 2.0) - 1);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  auto u8 = [](double v) { return static_cast<std::uint8_t>(std::lround(55 + 200 * v)); };
  return {u8(r), u8(g), u8(b)};
}

Canvas render_overlay(const SceneSample& scene, const std::vector<ScoredPair>& pairs, const ContactMap& contact,
                      const Vocab& vocab, int zoom) {
  const int w = scene.width * zoom, h = scene.height * zoom;
  Canvas canvas(2 * w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y / zoom) * scene.width + x / zoom) * 3;
      auto u8 = [&](std::size_t k) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(scene.image[i + k]), 0.0, 1.0) * 255));
      };
      canvas.set(x, y, {u8(0), u8(1), u8(2)});
      const int part = contact.at(y / zoom, x / zoom);
      if (part > 0) canvas.set(w + x, y, part_color(part));
    }
  }
  auto scaled = [&](const Box& b, int& x0, int& y0, int& x1, int& y1) {
    x0 = static_cast<int>(std::lround(b.x1 * zoom));
    y0 = static_cast<int>(std::lround(b.y1 * zoom));
    x1 = static_cast<int>(std::lround(b.x2 * zoom));
    y1 = static_cast<int>(std::lround(b.y2 * zoom));
  };
  for (const ScoredPair& p : pairs) {
    int x0, y0, x1, y1;
    scaled(p.object_box, x0, y0, x1, y1);
    canvas.draw_rect(x0, y0, x1, y1, kGreen, 2);
    scaled(p.human_box, x0, y0, x1, y1);
    canvas.draw_rect(x0, y0, x1, y1, kRed, 2);
    const std::string caption = vocab.actions.at(static_cast<std::size_t>(p.action_class)) + " " +
                                vocab.objects.at(static_cast<std::size_t>(p.object_class));
    const int ty = std::max(0, y0 - 10);
    const int tx = std::clamp(x0, 0, std::max(0, w - Canvas::text_width(caption)));
    canvas.fill_rect(tx - 1, ty - 1, tx + Canvas::text_width(caption), ty + 8, {0, 0, 0});
    canvas.draw_text(tx, ty, caption, {255, 255, 255});
  }
  return canvas;
}

}  // namespace hoic::viz
