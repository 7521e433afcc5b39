#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hoic::image_io {

struct Gray8 {
  int height = 0, width = 0;
  std::vector<std::uint8_t> pixels;
};

struct Rgb8 {
  int height = 0, width = 0;
  std::vector<std::uint8_t> pixels;  // (H, W, 3)
};

void write_png(const std::filesystem::path& path, const Gray8& image);
void write_png(const std::filesystem::path& path, const Rgb8& image);
// Reads an 8-bit single-channel PNG. Throws std::runtime_error otherwise.
Gray8 read_png_gray8(const std::filesystem::path& path);

// NumPy .npy (format 1.0) little-endian float32 array of the given shape.
void write_npy_f32(const std::filesystem::path& path, const std::vector<int>& shape, const std::vector<float>& data);
std::vector<float> read_npy_f32(const std::filesystem::path& path, std::vector<int>& shape);

}  // namespace hoic::image_io
