#include "hoic/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace hoic {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'O', 'I', 'C', 'K', 'P', 'T', '1'};

struct Header {
  json j;
  std::streamoff data_offset = 0;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error(path.string() + " is not a checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  return {json::parse(text), static_cast<std::streamoff>(16 + len)};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const AdamW* optimizer,
                     const RunConfig& config, long long step) {
  json entries = json::array();
  std::vector<const std::vector<double>*> blobs;
  std::vector<std::vector<double>> scratch;
  scratch.reserve(model.params().params().size());
  for (const auto& [name, t] : model.params().params()) {
    scratch.emplace_back(t.data().begin(), t.data().end());
    entries.push_back({{"name", name}, {"kind", "param"}, {"size", t.size()}});
    blobs.push_back(&scratch.back());
  }
  for (const auto& [name, buf] : model.params().buffers()) {
    entries.push_back({{"name", name}, {"kind", "buffer"}, {"size", buf->size()}});
    blobs.push_back(buf);
  }
  if (optimizer) {
    for (const auto& [name, v] : optimizer->first_moments()) {
      entries.push_back({{"name", name}, {"kind", "adam_m"}, {"size", v.size()}});
      blobs.push_back(&v);
    }
    for (const auto& [name, v] : optimizer->second_moments()) {
      entries.push_back({{"name", name}, {"kind", "adam_v"}, {"size", v.size()}});
      blobs.push_back(&v);
    }
  }
  const json header = {{"config", to_json(config)},
                       {"step", step},
                       {"optimizer_steps", optimizer ? optimizer->steps() : 0},
                       {"entries", entries}};
  const std::string text = header.dump();
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kMagic, 8);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* b : blobs) {
      out.write(reinterpret_cast<const char*>(b->data()), static_cast<std::streamsize>(b->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const Header h = read_header(in, path);
  return {run_config_from_json(h.j.at("config")), h.j.at("step").get<long long>()};
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, Model& model, AdamW* optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const Header h = read_header(in, path);
  auto& params = model.params().params();
  auto& buffers = model.params().buffers();
  std::size_t restored = 0;
  for (const json& e : h.j.at("entries")) {
    const std::string name = e.at("name"), kind = e.at("kind");
    const auto size = e.at("size").get<std::size_t>();
    std::vector<double> values(size);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(size * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + ": truncated data at " + name);
    auto check = [&](std::size_t expected) {
      if (expected != size) throw std::runtime_error(path.string() + ": size mismatch for " + name);
    };
    if (kind == "param") {
      auto it = params.find(name);
      if (it == params.end()) throw std::runtime_error(path.string() + ": unknown parameter " + name);
      check(static_cast<std::size_t>(it->second.size()));
      std::copy(values.begin(), values.end(), it->second.mutable_data().begin());
      ++restored;
    } else if (kind == "buffer") {
      auto it = buffers.find(name);
      if (it == buffers.end()) throw std::runtime_error(path.string() + ": unknown buffer " + name);
      check(it->second->size());
      *it->second = std::move(values);
    } else if (optimizer && kind == "adam_m") {
      optimizer->first_moments()[name] = std::move(values);
    } else if (optimizer && kind == "adam_v") {
      optimizer->second_moments()[name] = std::move(values);
    }
  }
  if (restored != params.size()) throw std::runtime_error(path.string() + ": checkpoint is missing parameters");
  if (optimizer) optimizer->set_steps(h.j.at("optimizer_steps").get<long long>());
  return {run_config_from_json(h.j.at("config")), h.j.at("step").get<long long>()};
}

}  // namespace hoic
