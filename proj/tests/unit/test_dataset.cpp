#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hoic/dataset.hpp"
#include "hoic/image_io.hpp"

using namespace hoic;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hoic_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Dataset, RoundTripIsLossless) {
  const fs::path dir = temp_dir("roundtrip");
  const Dataset d = generate_dataset(7, 10, SceneConfig{});
  write_dataset(d, dir);
  const Dataset r = read_dataset(dir);
  EXPECT_EQ(r.vocab, d.vocab);
  EXPECT_EQ(r.height, d.height);
  EXPECT_EQ(r.width, d.width);
  ASSERT_EQ(r.samples.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(r.samples[i], d.samples[i]) << i;
  fs::remove_all(dir);
}

TEST(Dataset, MissingMaskIsSchemaError) {
  const fs::path dir = temp_dir("missing");
  write_dataset(generate_dataset(0, 2, SceneConfig{}), dir);
  fs::remove(dir / "mask_1.png");
  try {
    read_dataset(dir);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 1"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, OutOfRangeLabelNamesPixelCount) {
  const fs::path dir = temp_dir("badlabel");
  write_dataset(generate_dataset(0, 1, SceneConfig{}), dir);
  auto mask = image_io::read_png_gray8(dir / "mask_0.png");
  mask.pixels[0] = 18;
  mask.pixels[5] = 18;
  mask.pixels[9] = 200;
  image_io::write_png(dir / "mask_0.png", mask);
  try {
    read_dataset(dir);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("3 pixel(s)"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, MaskShapeMismatchRejected) {
  const fs::path dir = temp_dir("shape");
  write_dataset(generate_dataset(0, 1, SceneConfig{}), dir);
  image_io::write_png(dir / "mask_0.png", image_io::Gray8{64, 64, std::vector<std::uint8_t>(64 * 64, 0)});
  EXPECT_THROW(read_dataset(dir), SchemaError);
  fs::remove_all(dir);
}

TEST(Dataset, MalformedManifestRejected) {
  const fs::path dir = temp_dir("manifest");
  write_dataset(generate_dataset(0, 1, SceneConfig{}), dir);
  std::ofstream(dir / "manifest.json") << "{\"format\": \"hoic-dataset\", \"height\": 128";
  EXPECT_THROW(read_dataset(dir), SchemaError);
  fs::remove_all(dir);
}

TEST(ImageIo, NpyRoundTrip) {
  const fs::path dir = temp_dir("npy");
  fs::create_directories(dir);
  const std::vector<float> v = {0.f, 0.25f, 1.f, 0.5f, 0.75f, 0.125f};
  image_io::write_npy_f32(dir / "a.npy", {1, 2, 3}, v);
  std::vector<int> shape;
  EXPECT_EQ(image_io::read_npy_f32(dir / "a.npy", shape), v);
  EXPECT_EQ(shape, (std::vector<int>{1, 2, 3}));
  fs::remove_all(dir);
}
