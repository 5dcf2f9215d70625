// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pathroute/image.hpp"

namespace pathroute::distortion {

using image::Image;

/// Per-pixel noise standard deviation in 8-bit units, row-major (h, w).
struct NoiseMap {
  int height = 0;
  int width = 0;
  std::vector<float> sigma;

  float at(int y, int x) const { return sigma[static_cast<std::size_t>(y) * width + x]; }
  float& at(int y, int x) { return sigma[static_cast<std::size_t>(y) * width + x]; }
};

enum class NoiseKind { Uniform, Linear, Peaks };

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

constexpr double kMaxSigma = 50.0;

NoiseMap noise_map_uniform(int height, int width, double sigma);

/// sigma(., c) = sigma_max * c / (w - 1): 0 at the left edge, sigma_max at the right.
NoiseMap noise_map_linear(int height, int width, double sigma_max = kMaxSigma);

/// Sum of four seeded 2-D Gaussian bumps, min-max rescaled to [0, sigma_max].
/// A constant field maps to all zeros.
NoiseMap noise_map_peaks(int height, int width, std::uint64_t seed, double sigma_max = kMaxSigma);

/// Rescale helper exposed for the degenerate-bump case.
void rescale_to_range(NoiseMap& map, double sigma_max);

/// Adds N(0, (sigma/255)^2) per pixel; each channel draws independently,
/// all channels at a position share the same sigma. Output clamped to [0, 1].
Image apply_noise(const Image& img, const NoiseMap& map, std::uint64_t seed);

/// Normalized Gaussian taps for radius ceil(3 * sigma).
std::vector<float> gaussian_kernel(double sigma);

/// Separable Gaussian blur with reflect padding; sigma = 0 is the identity.
Image gaussian_blur(const Image& img, double sigma);

/// Standard JPEG luminance quantization table (row-major 8x8).
const std::array<int, 64>& luminance_table();

/// Quantization step for table entry `base` at `quality` in [10, 100]; never below 1.
int quant_step(int base, int quality);

/// Block-DCT quantization: 8x8 DCT-II on 8-bit-scaled values, quantize with the
/// quality-scaled luminance table, reconstruct. Channels independent; clamped.
Image dct_compress(const Image& img, int quality);

/// Concrete degradation of one patch, applied blur -> noise -> compression.
struct DegradationSpec {
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;
  int quality = 100;  // 100 with compress = false skips compression
  bool compress = false;
};

Image degrade(const Image& img, const DegradationSpec& spec, std::uint64_t seed);

}  // namespace pathroute::distortion
