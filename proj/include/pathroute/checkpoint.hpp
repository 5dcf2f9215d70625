// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pathroute/keyvalue.hpp"
#include "pathroute/model.hpp"

namespace pathroute::checkpoint {

constexpr std::uint32_t kVersion = 1;

// Layout, all little-endian:
//   "PRST" | u32 version | u32 entry count
//   per entry: u16 name length, name bytes, u8 rank, u32 extents[rank],
//              f32 values, f32 adam_m, f32 adam_v, u64 adam step
//   trailing UTF-8 `key = value` block to end of file.

struct Entry {
  std::string name;
  nn::Tensor value;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  std::uint64_t step = 0;
};

struct Checkpoint {
  std::vector<Entry> entries;
  kv::KeyValues meta;
};

kv::KeyValues model_config_keys(const model::ModelConfig& cfg);

/// Reads `blocks`, `paths`, ... back; missing keys keep their defaults.
model::ModelConfig model_config_from(const kv::KeyValues& meta);

/// Writes parameters, Adam state and `meta` plus the model configuration keys.
void save(const std::filesystem::path& path, model::RoutedNet& model, const kv::KeyValues& meta);

Checkpoint read(const std::filesystem::path& path);

/// Copies values and optimizer state into `model`; names and shapes must match.
void apply(const Checkpoint& ckpt, model::RoutedNet& model);

std::unique_ptr<model::RoutedNet> load_model(const std::filesystem::path& path, Checkpoint* out = nullptr);

}  // namespace pathroute::checkpoint
