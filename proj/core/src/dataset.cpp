#include "hoic/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

#include "hoic/image_io.hpp"

namespace hoic {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json box_json(const Box& b) {
  json arr = json::array();
  for (double v : {b.x1, b.y1, b.x2, b.y2}) {
    if (v == std::floor(v)) {
      arr.push_back(static_cast<long long>(v));
    } else {
      arr.push_back(v);
    }
  }
  return arr;
}

[[noreturn]] void fail(int id, const std::string& what) {
  throw SchemaError("sample " + std::to_string(id) + ": " + what);
}

Box parse_box(int id, const json& j, int height, int width) {
  if (!j.is_array() || j.size() != 4) fail(id, "box must be [x1, y1, x2, y2]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid_in(width, height)) fail(id, "box outside image or degenerate");
  return b;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("missing file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset generate_dataset(std::uint64_t base_seed, int count, const SceneConfig& config) {
  Dataset d;
  d.vocab = config.vocab;
  d.height = config.height;
  d.width = config.width;
  for (int i = 0; i < count; ++i) {
    SceneSample s = generate_scene(base_seed + static_cast<std::uint64_t>(i), config);
    s.id = i;
    d.samples.push_back(std::move(s));
  }
  return d;
}

void validate_mask(int sample_id, const ContactMap& map, int height, int width) {
  if (map.height != height || map.width != width) {
    fail(sample_id, "mask is " + std::to_string(map.height) + "x" + std::to_string(map.width) + ", manifest declares " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
  std::size_t bad = 0;
  for (auto v : map.labels) bad += v > kNumParts ? 1 : 0;
  if (bad) fail(sample_id, "mask has " + std::to_string(bad) + " pixel(s) with label > 17");
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "hoic-dataset";
  manifest["version"] = 1;
  manifest["height"] = dataset.height;
  manifest["width"] = dataset.width;
  manifest["vocab"] = {{"body_parts", dataset.vocab.body_parts},
                       {"actions", dataset.vocab.actions},
                       {"objects", dataset.vocab.objects}};
  manifest["samples"] = json::array();
  for (const auto& s : dataset.samples) {
    validate_mask(s.id, s.contact_map, dataset.height, dataset.width);
    const std::string id = std::to_string(s.id);
    const std::string img = "img_" + id + ".npy", mask = "mask_" + id + ".png", ann = "ann_" + id + ".json";
    image_io::write_npy_f32(dir / img, {s.height, s.width, 3}, s.image);
    image_io::write_png(dir / mask, image_io::Gray8{s.height, s.width, s.contact_map.labels});
    json a;
    a["id"] = s.id;
    a["pairs"] = json::array();
    for (const auto& p : s.pairs) {
      a["pairs"].push_back({{"human_box", box_json(p.human_box)},
                            {"object_box", box_json(p.object_box)},
                            {"object_class", p.object_class},
                            {"action_class", p.action_class},
                            {"contact_parts", p.contact_parts}});
    }
    a["contact_labels"] = std::vector<int>(s.contact_labels.begin(), s.contact_labels.end());
    std::ofstream(dir / ann) << a.dump(1) << '\n';
    manifest["samples"].push_back({{"id", s.id}, {"image", img}, {"mask", mask}, {"annotation", ann}});
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(1) << '\n';
}

Dataset read_dataset(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  Dataset d;
  try {
    if (manifest.at("format") != "hoic-dataset") throw SchemaError("manifest format is not hoic-dataset");
    d.height = manifest.at("height").get<int>();
    d.width = manifest.at("width").get<int>();
    const json& v = manifest.at("vocab");
    d.vocab.body_parts = v.at("body_parts").get<std::vector<std::string>>();
    d.vocab.actions = v.at("actions").get<std::vector<std::string>>();
    d.vocab.objects = v.at("objects").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  }
  try {
    d.vocab.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("manifest vocab: ") + e.what());
  }

  for (const json& entry : manifest.at("samples")) {
    int id = -1;
    try {
      id = entry.at("id").get<int>();
      SceneSample s;
      s.id = id;
      s.height = d.height;
      s.width = d.width;

      const fs::path img_path = dir / entry.at("image").get<std::string>();
      const fs::path mask_path = dir / entry.at("mask").get<std::string>();
      const fs::path ann_path = dir / entry.at("annotation").get<std::string>();
      for (const auto& p : {img_path, mask_path, ann_path}) {
        if (!fs::exists(p)) fail(id, "missing file " + p.filename().string());
      }

      std::vector<int> shape;
      s.image = image_io::read_npy_f32(img_path, shape);
      if (shape != std::vector<int>{d.height, d.width, 3}) fail(id, "image shape does not match manifest");

      const auto mask = image_io::read_png_gray8(mask_path);
      s.contact_map.height = mask.height;
      s.contact_map.width = mask.width;
      s.contact_map.labels = mask.pixels;
      validate_mask(id, s.contact_map, d.height, d.width);

      const json ann = read_json(ann_path);
      for (const json& pj : ann.at("pairs")) {
        InteractionPair p;
        p.human_box = parse_box(id, pj.at("human_box"), d.height, d.width);
        p.object_box = parse_box(id, pj.at("object_box"), d.height, d.width);
        p.object_class = pj.at("object_class").get<int>();
        p.action_class = pj.at("action_class").get<int>();
        p.contact_parts = pj.at("contact_parts").get<std::vector<int>>();
        if (p.object_class < 0 || p.object_class >= d.vocab.num_objects()) fail(id, "object_class out of range");
        if (p.action_class < 0 || p.action_class >= d.vocab.no_interaction()) fail(id, "action_class out of range");
        for (int k : p.contact_parts) {
          if (k < 1 || k > kNumParts) fail(id, "contact part out of range");
        }
        s.pairs.push_back(std::move(p));
      }
      const auto labels = ann.at("contact_labels").get<std::vector<int>>();
      if (labels.size() != kNumParts) fail(id, "contact_labels must have 17 entries");
      for (int k = 0; k < kNumParts; ++k) {
        if (labels[static_cast<std::size_t>(k)] != 0 && labels[static_cast<std::size_t>(k)] != 1) {
          fail(id, "contact_labels entries must be 0 or 1");
        }
        s.contact_labels[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(labels[static_cast<std::size_t>(k)]);
      }
      if (s.contact_labels != encode_contact_labels(s.contact_map)) fail(id, "contact_labels disagree with mask");
      d.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      fail(id, std::string("malformed annotation: ") + e.what());
    } catch (const std::runtime_error& e) {
      if (dynamic_cast<const SchemaError*>(&e)) throw;
      fail(id, e.what());
    }
  }
  return d;
}

}  // namespace hoic
