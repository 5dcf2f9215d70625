// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pathroute/error.hpp"

namespace pathroute::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_floats(std::ostream& out, const float* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
}

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    T v;
    take(&v, sizeof(T));
    return v;
  }

  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError(origin_ + ": truncated checkpoint");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::vector<float> floats(std::size_t n) {
    std::vector<float> v(n);
    take(v.data(), n * sizeof(float));
    return v;
  }

  std::string rest() { return bytes_.substr(pos_); }

 private:
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

kv::KeyValues model_config_keys(const model::ModelConfig& cfg) {
  return {
      {"blocks", std::to_string(cfg.blocks)},
      {"paths", std::to_string(cfg.paths)},
      {"pathfinder_convs", std::to_string(cfg.pathfinder_convs)},
      {"features", std::to_string(cfg.features)},
      {"hidden", std::to_string(cfg.hidden)},
      {"pathfinder_width", std::to_string(cfg.pathfinder_width)},
      {"patch", std::to_string(cfg.patch)},
      {"channels", std::to_string(cfg.channels)},
  };
}

model::ModelConfig model_config_from(const kv::KeyValues& meta) {
  model::ModelConfig cfg;
  auto read = [&](const char* key, int& field) {
    if (auto it = meta.find(key); it != meta.end()) field = kv::to_int(key, it->second);
  };
  read("blocks", cfg.blocks);
  read("paths", cfg.paths);
  read("pathfinder_convs", cfg.pathfinder_convs);
  read("features", cfg.features);
  read("hidden", cfg.hidden);
  read("pathfinder_width", cfg.pathfinder_width);
  read("patch", cfg.patch);
  read("channels", cfg.channels);
  cfg.validate();
  return cfg;
}

void save(const std::filesystem::path& path, model::RoutedNet& model, const kv::KeyValues& meta) {
  const auto params = model.parameters();
  std::ostringstream out(std::ios::binary);
  out.write("PRST", 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const nn::Parameter* p : params) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    const nn::Shape& s = p->value.shape();
    put<std::uint8_t>(out, 4);
    for (int e : {s.n, s.c, s.h, s.w}) put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    const std::size_t n = p->value.numel();
    put_floats(out, p->value.ptr(), n);
    std::vector<float> zeros;
    const float* m = p->adam_m.size() == n ? p->adam_m.data() : (zeros.assign(n, 0.0f), zeros.data());
    put_floats(out, m, n);
    const float* v = p->adam_v.size() == n ? p->adam_v.data() : (zeros.assign(n, 0.0f), zeros.data());
    put_floats(out, v, n);
    put<std::uint64_t>(out, p->step);
  }
  // The architecture is always recorded so the file can be loaded on its own.
  kv::KeyValues all = meta;
  for (auto& [k, v] : model_config_keys(model.config())) all[k] = v;
  const std::string text = kv::format(all);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  // Write to a sibling file and rename so an interrupted save never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint '" + tmp.string() + "'");
    const std::string bytes = out.str();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  Reader r(ss.str(), path.string());
  char magic[4];
  r.take(magic, 4);
  if (std::memcmp(magic, "PRST", 4) != 0) throw IoError(path.string() + ": not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name.resize(r.get<std::uint16_t>());
    r.take(e.name.data(), e.name.size());
    const auto rank = r.get<std::uint8_t>();
    if (rank != 4) throw IoError(path.string() + ": entry '" + e.name + "' has rank " + std::to_string(rank));
    int ext[4];
    for (int& x : ext) x = static_cast<int>(r.get<std::uint32_t>());
    const nn::Shape shape{ext[0], ext[1], ext[2], ext[3]};
    e.value = nn::Tensor(shape, r.floats(shape.numel()));
    e.adam_m = r.floats(shape.numel());
    e.adam_v = r.floats(shape.numel());
    e.step = r.get<std::uint64_t>();
    ckpt.entries.push_back(std::move(e));
  }
  try {
    ckpt.meta = kv::parse(r.rest());
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": malformed trailing config: " + e.what());
  }
  return ckpt;
}

void apply(const Checkpoint& ckpt, model::RoutedNet& model) {
  const auto params = model.parameters();
  if (params.size() != ckpt.entries.size()) {
    throw ConfigError("checkpoint has " + std::to_string(ckpt.entries.size()) + " entries, model expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Parameter& p = *params[i];
    const Entry& e = ckpt.entries[i];
    if (e.name != p.name || e.value.shape() != p.value.shape()) {
      throw ConfigError("checkpoint entry '" + e.name + "' " + e.value.shape().str() + " does not match '" +
                        p.name + "' " + p.value.shape().str());
    }
    p.value = e.value;
    p.adam_m = e.adam_m;
    p.adam_v = e.adam_v;
    p.step = e.step;
  }
}

std::unique_ptr<model::RoutedNet> load_model(const std::filesystem::path& path, Checkpoint* out) {
  Checkpoint ckpt = read(path);
  auto m = std::make_unique<model::RoutedNet>(model_config_from(ckpt.meta), 0);
  apply(ckpt, *m);
  if (out) *out = std::move(ckpt);
  return m;
}

}  // namespace pathroute::checkpoint
