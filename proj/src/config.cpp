// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/config.hpp"

#include <functional>
#include <map>

#include "pathroute/checkpoint.hpp"
#include "pathroute/error.hpp"

namespace pathroute::config {

namespace {

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

template <typename F>
Setter int_field(F member) {
  return [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = kv::to_int(k, v); };
}

template <typename F>
Setter double_field(F member) {
  return [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = kv::to_double(k, v); };
}

template <typename F>
Setter string_field(F member) {
  return [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; };
}

SweepVariants parse_variants(const std::string& v) {
  if (v == "regulated") return SweepVariants::Regulated;
  if (v == "non-regulated") return SweepVariants::NonRegulated;
  if (v == "both") return SweepVariants::Both;
  throw ConfigError("sweep_variants must be regulated, non-regulated or both, got '" + v + "'");
}

std::string to_string(SweepVariants v) {
  switch (v) {
    case SweepVariants::Regulated: return "regulated";
    case SweepVariants::NonRegulated: return "non-regulated";
    case SweepVariants::Both: return "both";
  }
  return "both";
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"blocks", int_field([](RunConfig& c) -> int& { return c.model.blocks; })},
      {"paths", int_field([](RunConfig& c) -> int& { return c.model.paths; })},
      {"pathfinder_convs", int_field([](RunConfig& c) -> int& { return c.model.pathfinder_convs; })},
      {"features", int_field([](RunConfig& c) -> int& { return c.model.features; })},
      {"hidden", int_field([](RunConfig& c) -> int& { return c.model.hidden; })},
      {"pathfinder_width", int_field([](RunConfig& c) -> int& { return c.model.pathfinder_width; })},
      {"channels", int_field([](RunConfig& c) -> int& { return c.model.channels; })},
      {"alpha", double_field([](RunConfig& c) -> double& { return c.train.alpha; })},
      {"lr0", double_field([](RunConfig& c) -> double& { return c.train.lr0; })},
      {"iters_stage1", int_field([](RunConfig& c) -> int& { return c.train.iters_stage1; })},
      {"iters_stage2", int_field([](RunConfig& c) -> int& { return c.train.iters_stage2; })},
      {"batch", int_field([](RunConfig& c) -> int& { return c.train.batch; })},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = kv::to_uint64(k, v); }},
      {"cnn_lr_scale", double_field([](RunConfig& c) -> double& { return c.train.cnn_lr_scale; })},
      {"pathfinder_lr_scale", double_field([](RunConfig& c) -> double& { return c.train.pathfinder_lr_scale; })},
      {"log_interval", int_field([](RunConfig& c) -> int& { return c.train.log_interval; })},
      {"checkpoint_interval", int_field([](RunConfig& c) -> int& { return c.train.checkpoint_interval; })},
      {"penalty", double_field([](RunConfig& c) -> double& { return c.train.reward.penalty; })},
      {"threshold", double_field([](RunConfig& c) -> double& { return c.train.reward.threshold; })},
      {"regulated",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.reward.regulated = kv::to_bool(k, v); }},
      {"task", [](RunConfig& c, const std::string&, const std::string& v) { c.synthesis.task = dataset::parse_task(v); }},
      {"noise",
       [](RunConfig& c, const std::string&, const std::string& v) { c.synthesis.noise = distortion::parse_noise_kind(v); }},
      {"sigma_max", double_field([](RunConfig& c) -> double& { return c.synthesis.sigma_max; })},
      {"blur_max", double_field([](RunConfig& c) -> double& { return c.synthesis.blur_max; })},
      {"quality_min", int_field([](RunConfig& c) -> int& { return c.synthesis.quality_min; })},
      {"clean_dir", string_field([](RunConfig& c) -> std::string& { return c.clean_dir; })},
      {"clean_count", int_field([](RunConfig& c) -> int& { return c.clean_count; })},
      {"clean_size", int_field([](RunConfig& c) -> int& { return c.clean_size; })},
      {"synth_count", int_field([](RunConfig& c) -> int& { return c.synth_count; })},
      {"holdout_count", int_field([](RunConfig& c) -> int& { return c.holdout_count; })},
      {"holdout_sigma", double_field([](RunConfig& c) -> double& { return c.holdout_sigma; })},
      {"test_dir", string_field([](RunConfig& c) -> std::string& { return c.test_dir; })},
      {"test_count", int_field([](RunConfig& c) -> int& { return c.test_count; })},
      {"test_size", int_field([](RunConfig& c) -> int& { return c.test_size; })},
      {"test_noise",
       [](RunConfig& c, const std::string&, const std::string& v) { c.test_noise = distortion::parse_noise_kind(v); }},
      {"test_sigma", double_field([](RunConfig& c) -> double& { return c.test_sigma; })},
      {"checkpoint", string_field([](RunConfig& c) -> std::string& { return c.checkpoint; })},
      {"route_image", string_field([](RunConfig& c) -> std::string& { return c.route_image; })},
      {"sweep_penalties",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep_penalties = kv::to_double_list(k, v); }},
      {"sweep_iters", int_field([](RunConfig& c) -> int& { return c.sweep_iters; })},
      {"sweep_variants",
       [](RunConfig& c, const std::string&, const std::string& v) { c.sweep_variants = parse_variants(v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  synthesis.validate();
  if (synthesis.patch != model.patch) throw ConfigError("synthesis patch must equal the model patch");
  if (clean_dir.empty() && (clean_count < 1 || clean_size < model.patch)) {
    throw ConfigError("clean_count must be >= 1 and clean_size >= " + std::to_string(model.patch));
  }
  if (synth_count < 0) throw ConfigError("synth_count must be >= 0");
  if (holdout_count < 0) throw ConfigError("holdout_count must be >= 0");
  if (holdout_sigma < 0.0 || holdout_sigma > distortion::kMaxSigma) throw ConfigError("holdout_sigma outside [0, 50]");
  if (test_dir.empty() && (test_count < 1 || test_size < model.patch)) {
    throw ConfigError("test_count must be >= 1 and test_size >= " + std::to_string(model.patch));
  }
  if (test_sigma < 0.0 || test_sigma > distortion::kMaxSigma) throw ConfigError("test_sigma outside [0, 50]");
  if (sweep_penalties.empty()) throw ConfigError("sweep_penalties must not be empty");
  for (double p : sweep_penalties) {
    if (!(p >= 0.0)) throw ConfigError("sweep penalties must be >= 0");
  }
  if (sweep_iters < 1) throw ConfigError("sweep_iters must be >= 1");
}

kv::KeyValues RunConfig::keys() const {
  kv::KeyValues out = checkpoint::model_config_keys(model);
  out.erase("patch");
  for (auto& [k, v] : train.keys()) out[k] = v;
  out["task"] = dataset::to_string(synthesis.task);
  out["noise"] = distortion::to_string(synthesis.noise);
  out["sigma_max"] = kv::from_double(synthesis.sigma_max);
  out["blur_max"] = kv::from_double(synthesis.blur_max);
  out["quality_min"] = std::to_string(synthesis.quality_min);
  out["clean_dir"] = clean_dir;
  out["clean_count"] = std::to_string(clean_count);
  out["clean_size"] = std::to_string(clean_size);
  out["synth_count"] = std::to_string(synth_count);
  out["holdout_count"] = std::to_string(holdout_count);
  out["holdout_sigma"] = kv::from_double(holdout_sigma);
  out["test_dir"] = test_dir;
  out["test_count"] = std::to_string(test_count);
  out["test_size"] = std::to_string(test_size);
  out["test_noise"] = distortion::to_string(test_noise);
  out["test_sigma"] = kv::from_double(test_sigma);
  out["checkpoint"] = checkpoint;
  out["route_image"] = route_image;
  std::string pens;
  for (std::size_t i = 0; i < sweep_penalties.size(); ++i) {
    pens += (i ? "," : "") + kv::from_double(sweep_penalties[i]);
  }
  out["sweep_penalties"] = pens;
  out["sweep_iters"] = std::to_string(sweep_iters);
  out["sweep_variants"] = to_string(sweep_variants);
  return out;
}

RunConfig from_keys(const kv::KeyValues& kv) {
  RunConfig cfg;
  const auto& table = setters();
  for (const auto& [key, value] : kv) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, key, value);
  }
  return cfg;
}

RunConfig load(const std::string& path) {
  const kv::KeyValues keys = kv::read_file(path);
  try {
    return from_keys(keys);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : setters()) out.push_back(k);
  return out;
}

}  // namespace pathroute::config
