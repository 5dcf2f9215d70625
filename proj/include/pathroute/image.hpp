// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "pathroute/tensor.hpp"

namespace pathroute::image {

/// Planar (channel, row, column) image with values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) { return pixels[index(c, y, x)]; }
  float at(int c, int y, int x) const { return pixels[index(c, y, x)]; }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
};

nn::Tensor to_tensor(const Image& img);
Image from_tensor(const nn::Tensor& t);

void clamp01(Image& img);

Image crop(const Image& img, int top, int left, int height, int width);

/// Mirror index without repeating the edge sample: -1 -> 1, n -> n - 2.
int reflect_index(int i, int n);

/// Grows the image to at least min_h x min_w by reflection at the bottom/right.
Image reflect_pad(const Image& img, int min_h, int min_w);

/// ITU-R 601 luma for 3-channel images; single-channel images are returned unchanged.
Image to_gray(const Image& img);

// Binary PGM (P5) and PPM (P6), 8-bit. Pixels are quantized as round(v * 255).
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& img);

// Raw tensor dump: u32 rank (= 4), four u32 extents, then little-endian f32 values.
void write_raw_tensor(const std::filesystem::path& path, const nn::Tensor& t);
nn::Tensor read_raw_tensor(const std::filesystem::path& path);

}  // namespace pathroute::image
