// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pathroute/model.hpp"
#include "pathroute/tiling.hpp"

namespace pathroute::metrics {

using image::Image;

constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / mse) on [0, 1] values; identical images report the 99 dB cap.
double psnr(const Image& a, const Image& b);

/// Mean local SSIM over all fully-contained 11x11 Gaussian (sigma 1.5) windows,
/// C1 = 0.01^2, C2 = 0.03^2. Color inputs are compared on ITU-R 601 luma.
double ssim(const Image& a, const Image& b);

struct TestPair {
  std::string name;
  Image degraded;
  Image clean;
};

struct ImageReport {
  std::string name;
  double psnr = 0.0;
  double input_psnr = 0.0;
  double ssim = 0.0;
  double mean_flops = 0.0;
  std::size_t regions = 0;
};

struct RegionRecord {
  std::size_t image = 0;
  int row = 0;
  int col = 0;
  std::vector<int> actions;
  std::uint64_t flops = 0;
};

struct EvalReport {
  double psnr = 0.0;        // mean over images
  double input_psnr = 0.0;
  double ssim = 0.0;
  double mean_flops = 0.0;  // per region, over all regions
  std::size_t n_regions = 0;
  // route_histogram[block][action] = number of regions taking `action` at `block`.
  std::vector<std::vector<std::size_t>> route_histogram;
  std::vector<ImageReport> images;
  std::vector<RegionRecord> regions;
};

struct EvalOptions {
  // When set, every region takes this route instead of the pathfinder's argmax.
  std::optional<std::vector<int>> forced_route;
  bool keep_restored = false;
};

struct EvalOutput {
  EvalReport report;
  std::vector<Image> restored;
};

/// Tiles each degraded image into 63x63 regions at stride 53, restores every
/// region along its greedy route, merges with overlap averaging, and scores
/// against the clean image.
EvalOutput evaluate(model::RoutedNet& model, const std::vector<TestPair>& test_set, const EvalOptions& opts = {});

/// Columns: name,psnr,input_psnr,ssim,mean_flops,regions; final row named "summary".
void write_report_csv(std::ostream& out, const EvalReport& report);

/// Structured text block with the summary fields and the route histogram.
void write_report_json(std::ostream& out, const EvalReport& report);

}  // namespace pathroute::metrics
