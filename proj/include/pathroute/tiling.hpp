// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pathroute/image.hpp"

namespace pathroute::tiling {

using image::Image;

constexpr int kPatch = 63;
constexpr int kStride = 53;

/// Region anchors along one axis: 0, stride, 2*stride, ... with the final
/// anchor clamped to extent - patch so the last region ends on the border.
std::vector<int> axis_anchors(int extent, int patch = kPatch, int stride = kStride);

struct PatchGrid {
  int patch = kPatch;
  int stride = kStride;
  int height = 0;         // original image extents
  int width = 0;
  int padded_height = 0;  // extents after reflect padding to >= patch
  int padded_width = 0;
  std::vector<int> rows;
  std::vector<int> cols;

  std::size_t size() const { return rows.size() * cols.size(); }
  // Region k in row-major anchor order.
  int row_of(std::size_t k) const { return rows[k / cols.size()]; }
  int col_of(std::size_t k) const { return cols[k % cols.size()]; }
};

PatchGrid make_grid(int height, int width, int patch = kPatch, int stride = kStride);

struct Tiles {
  PatchGrid grid;
  std::vector<Image> patches;
};

/// Images smaller than the patch are reflect-padded first.
Tiles extract_patches(const Image& img, int patch = kPatch, int stride = kStride);

/// Per-pixel mean over covering patches, cropped back to the original extents.
Image merge_patches(const std::vector<Image>& patches, const PatchGrid& grid);

}  // namespace pathroute::tiling
