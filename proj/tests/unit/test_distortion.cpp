// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "pathroute/dataset.hpp"
#include "pathroute/distortion.hpp"
#include "pathroute/error.hpp"

using namespace pathroute;
using image::Image;

TEST_SUITE("distortion") {

TEST_CASE("noise maps") {
  const auto u = distortion::noise_map_uniform(4, 7, 25.0);
  CHECK(u.height == 4);
  CHECK(u.width == 7);
  for (float s : u.sigma) CHECK(s == 25.0f);
  for (float s : distortion::noise_map_uniform(3, 3, 0.0).sigma) CHECK(s == 0.0f);

  const auto lin = distortion::noise_map_linear(3, 101);
  CHECK(lin.at(0, 0) == 0.0f);
  CHECK(lin.at(2, 100) == 50.0f);
  CHECK(lin.at(1, 50) == doctest::Approx(25.0f));

  const auto p1 = distortion::noise_map_peaks(40, 50, 9);
  const auto p2 = distortion::noise_map_peaks(40, 50, 9);
  CHECK(p1.sigma == p2.sigma);
  const auto [lo, hi] = std::minmax_element(p1.sigma.begin(), p1.sigma.end());
  CHECK(*lo == doctest::Approx(0.0f));
  CHECK(*hi == doctest::Approx(50.0f));

  distortion::NoiseMap flat{2, 2, {3.0f, 3.0f, 3.0f, 3.0f}};
  distortion::rescale_to_range(flat, 50.0);
  for (float s : flat.sigma) CHECK(s == 0.0f);
}

TEST_CASE("additive gaussian noise") {
  Image img(1, 256, 256, 0.5f);
  const auto zero = distortion::noise_map_uniform(256, 256, 0.0);
  CHECK(distortion::apply_noise(img, zero, 3).pixels == img.pixels);

  const auto map = distortion::noise_map_uniform(256, 256, 25.0);
  const Image noisy = distortion::apply_noise(img, map, 3);
  CHECK(distortion::apply_noise(img, map, 3).pixels == noisy.pixels);
  CHECK_FALSE(distortion::apply_noise(img, map, 4).pixels == noisy.pixels);
  double s = 0.0, s2 = 0.0;
  for (float v : noisy.pixels) {
    s += v - 0.5;
    s2 += (v - 0.5) * (v - 0.5);
  }
  const double n = static_cast<double>(noisy.pixels.size());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  CHECK(std::abs(sd - 25.0 / 255.0) < 0.03 * 25.0 / 255.0);
}

TEST_CASE("gaussian blur") {
  Image ramp(1, 9, 13);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 13; ++x) ramp.at(0, y, x) = static_cast<float>(x + 2 * y) / 40.0f;
  CHECK(distortion::gaussian_blur(ramp, 0.0).pixels == ramp.pixels);

  const Image flat(1, 12, 12, 0.3f);
  for (float v : distortion::gaussian_blur(flat, 2.0).pixels) CHECK(v == doctest::Approx(0.3f).epsilon(1e-6));

  Image impulse(1, 21, 21, 0.0f);
  impulse.at(0, 10, 10) = 1.0f;
  double norm = 0.0;
  for (int i = -3; i <= 3; ++i) norm += std::exp(-0.5 * i * i);
  const double center = 1.0 / norm;
  const Image blurred = distortion::gaussian_blur(impulse, 1.0);
  CHECK(blurred.at(0, 10, 10) == doctest::Approx(center * center).epsilon(1e-6));
  const auto k = distortion::gaussian_kernel(1.0);
  CHECK(k.size() == 7);
  CHECK(k[3] == doctest::Approx(center).epsilon(1e-6));
}

TEST_CASE("block DCT compression") {
  CHECK(distortion::quant_step(16, 50) == 16);
  CHECK(distortion::quant_step(16, 100) == 1);
  CHECK(distortion::quant_step(16, 10) == 80);
  CHECK_THROWS_AS(distortion::quant_step(16, 5), ConfigError);

  const Image flat(1, 16, 24, 0.4f);
  for (int q : {10, 50, 100}) {
    const Image out = distortion::dct_compress(flat, q);
    const float v0 = out.pixels.front();
    for (float v : out.pixels) CHECK(v == v0);
    // DC error is at most half a quantization step, spread over the 8x8 block.
    CHECK(std::abs(v0 - 0.4f) <= (distortion::quant_step(16, q) / 16.0f + 0.5f) / 255.0f + 1e-6f);
  }
  for (float v : distortion::dct_compress(flat, 100).pixels) CHECK(std::abs(v - 0.4f) <= 1.0f / 255.0f);

  const Image scene = dataset::procedural_scene(64, 64, 1, 21);
  const Image out = distortion::dct_compress(scene, 50);
  double m_in = 0.0, m_out = 0.0;
  for (std::size_t i = 0; i < scene.pixels.size(); ++i) {
    m_in += scene.pixels[i];
    m_out += out.pixels[i];
  }
  CHECK(std::abs(m_in - m_out) / static_cast<double>(scene.pixels.size()) < 0.02);
}

TEST_CASE("synthetic training stream") {
  const auto clean = dataset::procedural_set(3, 120, 160, 1, 5);
  dataset::SynthesisSpec spec;
  CHECK(dataset::make_dataset(clean, spec, 0, 1).empty());
  const auto a = dataset::make_dataset(clean, spec, 5, 1);
  const auto b = dataset::make_dataset(clean, spec, 5, 1);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a[i].degraded.pixels == b[i].degraded.pixels);
    CHECK(a[i].clean.height == 63);
    CHECK(a[i].meta.noise_sigma >= 0.0);
    CHECK(a[i].meta.noise_sigma <= 50.0);
  }

  spec.noise = distortion::NoiseKind::Linear;
  const dataset::SampleSource src(clean, spec, 2);
  double left = 0.0, right = 0.0;
  int nl = 0, nr = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto s = src.sample(i);
    if (s.meta.left + 31 < 80) {
      left += s.meta.noise_sigma;
      ++nl;
    } else {
      right += s.meta.noise_sigma;
      ++nr;
    }
  }
  REQUIRE(nl > 0);
  REQUIRE(nr > 0);
  CHECK(left / nl < right / nr);

  spec.task = dataset::Task::Mixed;
  spec.noise = distortion::NoiseKind::Uniform;
  const auto mixed = dataset::make_dataset(clean, spec, 20, 3);
  for (const auto& s : mixed) {
    CHECK(s.meta.blur_sigma <= 5.0);
    CHECK(s.meta.quality >= 10);
    CHECK(s.meta.quality <= 100);
  }
}

TEST_CASE("noise kind names") {
  CHECK(distortion::parse_noise_kind("linear") == distortion::NoiseKind::Linear);
  CHECK(distortion::to_string(distortion::NoiseKind::Peaks) == "peaks");
  CHECK_THROWS_AS(distortion::parse_noise_kind("salt"), ConfigError);
}

}
