// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pathroute/distortion.hpp"

namespace pathroute::dataset {

using image::Image;

/// Procedural clean image: smooth gradients plus shapes filled flat, with
/// ramps, or with periodic/grain textures, so that both easy and hard
/// regions occur.
Image procedural_scene(int height, int width, int channels, std::uint64_t seed);

std::vector<Image> procedural_set(int count, int height, int width, int channels, std::uint64_t seed);

/// Every .pgm/.ppm in a directory, sorted by file name.
std::vector<Image> load_directory(const std::filesystem::path& dir);

enum class Task { Denoise, Mixed };

Task parse_task(const std::string& name);
std::string to_string(Task task);

struct SynthesisSpec {
  Task task = Task::Denoise;
  distortion::NoiseKind noise = distortion::NoiseKind::Uniform;
  double sigma_max = 50.0;  // uniform noise draws sigma ~ U[0, sigma_max]
  double blur_max = 5.0;    // mixed task only
  int quality_min = 10;     // mixed task only
  int patch = 63;

  void validate() const;
};

struct SampleMeta {
  std::size_t index = 0;
  std::size_t source = 0;  // index of the clean image
  int top = 0;
  int left = 0;
  double noise_sigma = 0.0;  // mean per-pixel sigma over the crop, 8-bit units
  double blur_sigma = 0.0;
  int quality = 100;
};

struct Sample {
  Image degraded;
  Image clean;
  SampleMeta meta;
};

/// Deterministic random-access sample stream: sample(i) depends only on
/// (seed, i), so samples can be produced in any order or in parallel.
class SampleSource {
 public:
  SampleSource(std::vector<Image> clean, SynthesisSpec spec, std::uint64_t seed);

  Sample sample(std::size_t index) const;

  const SynthesisSpec& spec() const { return spec_; }
  std::size_t source_count() const { return clean_.size(); }

 private:
  std::vector<Image> clean_;
  SynthesisSpec spec_;
  std::uint64_t seed_;
};

std::vector<Sample> make_dataset(std::vector<Image> clean, const SynthesisSpec& spec, std::size_t count,
                                 std::uint64_t seed);

/// Whole-image degradation for evaluation sets.
/// Noise map used by degrade_image; sigma is the level (uniform) or the maximum.
distortion::NoiseMap test_noise_map(distortion::NoiseKind kind, int height, int width, double sigma,
                                    std::uint64_t seed);

Image degrade_image(const Image& clean, distortion::NoiseKind kind, double sigma, std::uint64_t seed);

}  // namespace pathroute::dataset
