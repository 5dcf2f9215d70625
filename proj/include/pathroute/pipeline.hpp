// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathroute/config.hpp"
#include "pathroute/metrics.hpp"
#include "pathroute/trainer.hpp"

namespace pathroute::pipeline {

namespace fs = std::filesystem;

struct CommandOptions {
  fs::path out = "out";
  bool force = false;          // allow writing into a directory holding earlier outputs
  std::optional<int> stage;    // train only
  std::string init;            // checkpoint to start from
  std::string config_text;     // echoed verbatim as config.txt
  // Reuse finished training runs whose recorded settings match (library use).
  bool reuse = false;
  std::function<void(const std::string&)> progress;
};

/// Creates `out`; refuses a directory that already holds a config.txt unless
/// `force` is set. Writes the verbatim and effective configs.
void prepare_output(const fs::path& out, const config::RunConfig& cfg, const CommandOptions& opts);

std::vector<image::Image> clean_sources(const config::RunConfig& cfg);

/// Clean test images (test_dir or procedural) degraded with test_noise at test_sigma.
std::vector<metrics::TestPair> test_set(const config::RunConfig& cfg);

/// holdout_count patches at holdout_sigma uniform noise, disjoint from the training scenes.
/// Per-pixel noise sigma (8-bit units) of each test_set() image.
std::vector<distortion::NoiseMap> test_noise_maps(const config::RunConfig& cfg);
std::vector<trainer::Pair> holdout_set(const config::RunConfig& cfg);

/// FNV-1a over every parameter value, for identifying weights across files.
std::uint64_t weights_hash(model::RoutedNet& model);

// synth: <out>/pairs/NNNNNN_{degraded,clean}.pgm|ppm and <out>/manifest.csv.
std::size_t cmd_synth(const config::RunConfig& cfg, const CommandOptions& opts);

// train: <out>/metrics.csv, rolling <out>/checkpoint.prst, <out>/final.prst.
// Stage 2 needs `init` (a stage-1 checkpoint). An `init` checkpoint of the
// requested stage that is not finished is resumed in place.
fs::path cmd_train(const config::RunConfig& cfg, const CommandOptions& opts);

// eval: <out>/report.csv, <out>/report.json, <out>/restored/*.
metrics::EvalReport cmd_eval(const config::RunConfig& cfg, const CommandOptions& opts);

struct RegionRoute {
  int row = 0, col = 0, top = 0, left = 0;
  std::vector<int> actions;
  std::uint64_t flops = 0;
  double noise_sigma = -1.0;  // mean sigma over the region when the noise map is known
};

/// Greedy routes for every 63x63 region of `degraded`.
std::vector<RegionRoute> route_regions(model::RoutedNet& model, const image::Image& degraded,
                                       const distortion::NoiseMap* noise = nullptr);

/// Green (0,200,0) to red (220,0,0) by route-cost fraction between the
/// all-bypass and all-max-path counts. Later regions paint over earlier ones.
image::Image route_heatmap(const std::vector<RegionRoute>& regions, const model::ModelConfig& cfg, int height,
                           int width);

// route-map: <out>/route_map.ppm and <out>/regions.csv.
std::vector<RegionRoute> cmd_route_map(const config::RunConfig& cfg, const CommandOptions& opts);

struct SweepRow {
  double penalty = 0.0;
  double psnr = 0.0;
  double mean_flops = 0.0;
  bool regulated = true;
};

// sweep: fine-tunes stage 2 from the stage-1 checkpoint `init` once per
// (penalty, variant) into <out>/runs/, evaluates each, writes <out>/sweep.csv.
std::vector<SweepRow> cmd_sweep(const config::RunConfig& cfg, const CommandOptions& opts);

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows);

}  // namespace pathroute::pipeline
