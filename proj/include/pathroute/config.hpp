// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pathroute/dataset.hpp"
#include "pathroute/keyvalue.hpp"
#include "pathroute/model.hpp"
#include "pathroute/trainer.hpp"

namespace pathroute::config {

enum class SweepVariants { Regulated, NonRegulated, Both };

/// Everything a pipeline command needs, parsed from a flat key = value file.
struct RunConfig {
  model::ModelConfig model;
  trainer::TrainConfig train;
  dataset::SynthesisSpec synthesis;

  // Clean training sources: images from clean_dir, or procedural scenes.
  std::string clean_dir;
  int clean_count = 48;
  int clean_size = 160;
  int synth_count = 100;  // pairs written by `synth`

  int holdout_count = 8;  // 63x63 patches scored in the metrics log
  double holdout_sigma = 25.0;

  // Test set for `eval` and `sweep`: clean images from test_dir or procedural ones.
  std::string test_dir;
  int test_count = 4;
  int test_size = 256;
  distortion::NoiseKind test_noise = distortion::NoiseKind::Uniform;
  double test_sigma = 25.0;

  std::string checkpoint;   // model for eval / route-map when --init is absent
  std::string route_image;  // degraded input for route-map; synthesized when empty

  std::vector<double> sweep_penalties{3e-6, 5e-6, 8e-6};
  int sweep_iters = 4000;
  SweepVariants sweep_variants = SweepVariants::Both;

  void validate() const;

  /// Every key with its effective value, suitable for echoing next to outputs.
  kv::KeyValues keys() const;
};

/// Applies `kv` over the defaults; unknown keys throw ConfigError.
RunConfig from_keys(const kv::KeyValues& kv);

RunConfig load(const std::string& path);

/// Names of every accepted key, sorted.
std::vector<std::string> known_keys();

}  // namespace pathroute::config
