// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/tiling.hpp"

#include <algorithm>
#include <string>

#include "pathroute/error.hpp"

namespace pathroute::tiling {

std::vector<int> axis_anchors(int extent, int patch, int stride) {
  if (patch < 1 || stride < 1) throw ConfigError("patch and stride must be positive");
  if (extent < patch) throw ConfigError("extent " + std::to_string(extent) + " smaller than patch");
  std::vector<int> anchors{0};
  while (anchors.back() + patch < extent) anchors.push_back(std::min(anchors.back() + stride, extent - patch));
  return anchors;
}

PatchGrid make_grid(int height, int width, int patch, int stride) {
  PatchGrid g;
  g.patch = patch;
  g.stride = stride;
  g.height = height;
  g.width = width;
  g.padded_height = std::max(height, patch);
  g.padded_width = std::max(width, patch);
  g.rows = axis_anchors(g.padded_height, patch, stride);
  g.cols = axis_anchors(g.padded_width, patch, stride);
  return g;
}

Tiles extract_patches(const Image& img, int patch, int stride) {
  Tiles t;
  t.grid = make_grid(img.height, img.width, patch, stride);
  const Image padded = image::reflect_pad(img, patch, patch);
  t.patches.reserve(t.grid.size());
  for (int r : t.grid.rows)
    for (int c : t.grid.cols) t.patches.push_back(image::crop(padded, r, c, patch, patch));
  return t;
}

Image merge_patches(const std::vector<Image>& patches, const PatchGrid& grid) {
  if (patches.size() != grid.size()) {
    throw ConfigError("merge expects " + std::to_string(grid.size()) + " patches, got " +
                      std::to_string(patches.size()));
  }
  if (patches.empty()) throw ConfigError("merge of an empty patch set");
  const int channels = patches.front().channels;
  const std::size_t plane = static_cast<std::size_t>(grid.padded_height) * grid.padded_width;
  std::vector<double> sum(plane * channels, 0.0);
  std::vector<int> coverage(static_cast<std::size_t>(grid.padded_height) * grid.padded_width, 0);
  for (std::size_t k = 0; k < patches.size(); ++k) {
    const Image& p = patches[k];
    if (p.channels != channels || p.height != grid.patch || p.width != grid.patch) {
      throw ConfigError("patch " + std::to_string(k) + " has unexpected shape");
    }
    const int r0 = grid.row_of(k), c0 = grid.col_of(k);
    for (int y = 0; y < grid.patch; ++y)
      for (int x = 0; x < grid.patch; ++x) {
        coverage[static_cast<std::size_t>(r0 + y) * grid.padded_width + c0 + x] += 1;
        for (int c = 0; c < channels; ++c)
          sum[c * plane + static_cast<std::size_t>(r0 + y) * grid.padded_width + c0 + x] += p.at(c, y, x);
      }
  }
  Image out(channels, grid.height, grid.width);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < grid.height; ++y)
      for (int x = 0; x < grid.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * grid.padded_width + x;
        out.at(c, y, x) = static_cast<float>(sum[c * plane + i] / coverage[i]);
      }
  return out;
}

}  // namespace pathroute::tiling
