// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pathroute/error.hpp"
#include "pathroute/random.hpp"

namespace pathroute::distortion {

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "uniform") return NoiseKind::Uniform;
  if (name == "linear") return NoiseKind::Linear;
  if (name == "peaks") return NoiseKind::Peaks;
  throw ConfigError("unknown noise kind '" + name + "' (expected uniform, linear or peaks)");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::Linear: return "linear";
    case NoiseKind::Peaks: return "peaks";
  }
  return "unknown";
}

namespace {

void check_sigma(double sigma) {
  if (!(sigma >= 0.0 && sigma <= kMaxSigma)) {
    throw ConfigError("noise sigma " + std::to_string(sigma) + " outside [0, 50]");
  }
}

}  // namespace

NoiseMap noise_map_uniform(int height, int width, double sigma) {
  check_sigma(sigma);
  return NoiseMap{height, width,
                  std::vector<float>(static_cast<std::size_t>(height) * width, static_cast<float>(sigma))};
}

NoiseMap noise_map_linear(int height, int width, double sigma_max) {
  check_sigma(sigma_max);
  if (width < 2) throw ConfigError("linear noise map needs width >= 2");
  NoiseMap map{height, width, std::vector<float>(static_cast<std::size_t>(height) * width)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      map.at(y, x) = static_cast<float>(sigma_max * x / (width - 1));
  return map;
}

void rescale_to_range(NoiseMap& map, double sigma_max) {
  const auto [lo, hi] = std::minmax_element(map.sigma.begin(), map.sigma.end());
  const float mn = *lo, mx = *hi;
  if (!(mx > mn)) {
    std::fill(map.sigma.begin(), map.sigma.end(), 0.0f);
    return;
  }
  for (float& v : map.sigma) v = static_cast<float>((v - mn) / (mx - mn) * sigma_max);
  // Pin the extremes exactly despite rounding.
  *std::min_element(map.sigma.begin(), map.sigma.end()) = 0.0f;
  *std::max_element(map.sigma.begin(), map.sigma.end()) = static_cast<float>(sigma_max);
}

NoiseMap noise_map_peaks(int height, int width, std::uint64_t seed, double sigma_max) {
  check_sigma(sigma_max);
  Rng rng(seed);
  NoiseMap map{height, width, std::vector<float>(static_cast<std::size_t>(height) * width, 0.0f)};
  const double extent = std::max(height, width);
  for (int k = 0; k < 4; ++k) {
    const double cy = uniform(rng, 0.0, height);
    const double cx = uniform(rng, 0.0, width);
    const double spread = uniform(rng, 0.1, 0.35) * extent;
    const double amp = uniform(rng, 0.5, 1.0);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        map.at(y, x) += static_cast<float>(amp * std::exp(-r2 / (2.0 * spread * spread)));
      }
  }
  rescale_to_range(map, sigma_max);
  return map;
}

Image apply_noise(const Image& img, const NoiseMap& map, std::uint64_t seed) {
  if (map.height != img.height || map.width != img.width) {
    throw ConfigError("noise map " + std::to_string(map.height) + "x" + std::to_string(map.width) +
                      " does not match image " + std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  Image out = img;
  Rng rng(seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const float sigma = map.at(y, x) / 255.0f;
        const float z = unit(rng);
        if (sigma > 0.0f) out.at(c, y, x) += sigma * z;
      }
  image::clamp01(out);
  return out;
}

std::vector<float> gaussian_kernel(double sigma) {
  if (sigma < 0.0) throw ConfigError("blur sigma must be >= 0");
  if (sigma == 0.0) return {1.0f};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += taps[static_cast<std::size_t>(i + radius)];
  }
  std::vector<float> out(taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i) out[i] = static_cast<float>(taps[i] / total);
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma == 0.0) return img;
  const std::vector<float> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Image tmp(img.channels, img.height, img.width);
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += k[static_cast<std::size_t>(i + r)] * img.at(c, y, image::reflect_index(x + i, img.width));
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += k[static_cast<std::size_t>(i + r)] * tmp.at(c, image::reflect_index(y + i, img.height), x);
        out.at(c, y, x) = static_cast<float>(acc);
      }
  }
  image::clamp01(out);
  return out;
}

const std::array<int, 64>& luminance_table() {
  static const std::array<int, 64> table = {
      16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
      14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
      18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
      49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  return table;
}

int quant_step(int base, int quality) {
  if (quality < 10 || quality > 100) throw ConfigError("quality must be in [10, 100]");
  const double scale = quality < 50 ? 50.0 / quality : 2.0 - quality / 50.0;
  return std::max(1, static_cast<int>(std::lround(base * scale)));
}

namespace {

// Orthonormal 8-point DCT-II basis: basis[u][x].
const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) b[u][x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return b;
  }();
  return basis;
}

}  // namespace

Image dct_compress(const Image& img, int quality) {
  const auto& table = luminance_table();
  std::array<int, 64> steps{};
  for (int i = 0; i < 64; ++i) steps[i] = quant_step(table[i], quality);
  const auto& b = dct_basis();
  Image out = img;
  double block[8][8], tmp[8][8], coef[8][8];
  for (int c = 0; c < img.channels; ++c)
    for (int by = 0; by < img.height; by += 8)
      for (int bx = 0; bx < img.width; bx += 8) {
        // Partial edge blocks are completed by edge replication.
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            const int sy = std::min(by + y, img.height - 1);
            const int sx = std::min(bx + x, img.width - 1);
            block[y][x] = img.at(c, sy, sx) * 255.0 - 128.0;
          }
        for (int y = 0; y < 8; ++y)
          for (int u = 0; u < 8; ++u) {
            double acc = 0.0;
            for (int x = 0; x < 8; ++x) acc += b[u][x] * block[y][x];
            tmp[y][u] = acc;
          }
        for (int v = 0; v < 8; ++v)
          for (int u = 0; u < 8; ++u) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y) acc += b[v][y] * tmp[y][u];
            const int step = steps[static_cast<std::size_t>(v * 8 + u)];
            coef[v][u] = std::round(acc / step) * step;
          }
        for (int v = 0; v < 8; ++v)
          for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u) acc += b[u][x] * coef[v][u];
            tmp[v][x] = acc;
          }
        for (int y = 0; y < 8 && by + y < img.height; ++y)
          for (int x = 0; x < 8 && bx + x < img.width; ++x) {
            double acc = 0.0;
            for (int v = 0; v < 8; ++v) acc += b[v][y] * tmp[v][x];
            out.at(c, by + y, bx + x) = static_cast<float>((acc + 128.0) / 255.0);
          }
      }
  image::clamp01(out);
  return out;
}

Image degrade(const Image& img, const DegradationSpec& spec, std::uint64_t seed) {
  Image out = gaussian_blur(img, spec.blur_sigma);
  if (spec.noise_sigma > 0.0) out = apply_noise(out, noise_map_uniform(img.height, img.width, spec.noise_sigma), seed);
  if (spec.compress) out = dct_compress(out, spec.quality);
  return out;
}

}  // namespace pathroute::distortion
