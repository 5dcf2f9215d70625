// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "pathroute/error.hpp"

namespace pathroute::image {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

nn::Tensor to_tensor(const Image& img) {
  return nn::Tensor({1, img.channels, img.height, img.width}, img.pixels);
}

Image from_tensor(const nn::Tensor& t) {
  const auto s = t.shape();
  if (s.n != 1) throw ConfigError("image conversion expects batch 1, got " + s.str());
  Image img(s.c, s.h, s.w);
  std::copy(t.data().begin(), t.data().end(), img.pixels.begin());
  return img;
}

void clamp01(Image& img) {
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

Image crop(const Image& img, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || top + height > img.height || left + width > img.width) {
    throw ConfigError("crop window outside image");
  }
  Image out(img.channels, height, width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
  return out;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

Image reflect_pad(const Image& img, int min_h, int min_w) {
  const int h = std::max(img.height, min_h);
  const int w = std::max(img.width, min_w);
  if (h == img.height && w == img.width) return img;
  Image out(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(c, y, x) = img.at(c, reflect_index(y, img.height), reflect_index(x, img.width));
  return out;
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ConfigError("luma conversion expects 1 or 3 channels");
  Image out(1, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(0, y, x) = 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
  return out;
}

namespace {

int read_header_int(std::istream& in, const std::filesystem::path& path) {
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) throw IoError(path.string() + ": malformed PNM header");
  return v;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw IoError(path.string() + ": not a binary PGM/PPM file");
  }
  const int channels = magic[1] == '5' ? 1 : 3;
  const int width = read_header_int(in, path);
  const int height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (width <= 0 || height <= 0) throw IoError(path.string() + ": invalid dimensions");
  if (maxval != 255) throw IoError(path.string() + ": only 8-bit (maxval 255) files are supported");
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> raster(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!in) throw IoError(path.string() + ": truncated raster");
  Image img(channels, height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(c, y, x) = raster[(static_cast<std::size_t>(y) * width + x) * channels + c] / 255.0f;
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError("PNM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raster(static_cast<std::size_t>(img.width) * img.height * img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        raster[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

void write_raw_tensor(const std::filesystem::path& path, const nn::Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  const auto s = t.shape();
  const std::uint32_t header[5] = {4, static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                   static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!out) throw IoError(path.string() + ": write failed");
}

nn::Tensor read_raw_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::uint32_t header[5];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != 4) throw IoError(path.string() + ": not a rank-4 tensor dump");
  nn::Tensor t({static_cast<int>(header[1]), static_cast<int>(header[2]), static_cast<int>(header[3]),
                static_cast<int>(header[4])});
  in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!in) throw IoError(path.string() + ": truncated payload");
  return t;
}

}  // namespace pathroute::image
