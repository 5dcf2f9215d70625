// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pathroute/error.hpp"
#include "pathroute/random.hpp"

namespace pathroute::dataset {
namespace {

using distortion::NoiseKind;

struct Fill {
  enum Kind { Flat, Ramp, Stripes, Checker, Grain } kind;
  float base, contrast;
  double freq, angle;
  std::vector<float> grain;  // smoothed random field for Grain fills
};

float fill_value(const Fill& f, int y, int x, int width) {
  switch (f.kind) {
    case Fill::Flat: return f.base;
    case Fill::Ramp: {
      const double t = (std::cos(f.angle) * x + std::sin(f.angle) * y) / (2.0 * width) + 0.5;
      return f.base + f.contrast * static_cast<float>(t - 0.5);
    }
    case Fill::Stripes: {
      const double t = std::cos(f.angle) * x + std::sin(f.angle) * y;
      return f.base + f.contrast * static_cast<float>(std::sin(2.0 * std::numbers::pi * f.freq * t));
    }
    case Fill::Checker: {
      const int period = std::max(2, static_cast<int>(1.0 / f.freq));
      const bool on = ((x / period) + (y / period)) % 2 == 0;
      return f.base + (on ? 0.5f : -0.5f) * f.contrast;
    }
    case Fill::Grain: return f.base + f.contrast * f.grain[static_cast<std::size_t>(y) * width + x];
  }
  return f.base;
}

Fill random_fill(Rng& rng, int height, int width) {
  Fill f{};
  f.kind = static_cast<Fill::Kind>(uniform_int(rng, 0, 4));
  f.base = static_cast<float>(uniform(rng, 0.2, 0.8));
  f.contrast = static_cast<float>(uniform(rng, 0.1, 0.45));
  f.freq = uniform(rng, 0.05, 0.3);
  f.angle = uniform(rng, 0.0, std::numbers::pi);
  if (f.kind == Fill::Grain) {
    Image field(1, height, width);
    for (float& v : field.pixels) v = static_cast<float>(uniform(rng, -1.0, 1.0));
    // Light smoothing keeps the grain fine but not white.
    Image smooth(1, height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        float acc = 0.0f;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            acc += field.at(0, image::reflect_index(y + dy, height), image::reflect_index(x + dx, width));
        smooth.at(0, y, x) = acc / 9.0f;
      }
    f.grain = std::move(smooth.pixels);
  }
  return f;
}

}  // namespace

Image procedural_scene(int height, int width, int channels, std::uint64_t seed) {
  if (height < 1 || width < 1 || (channels != 1 && channels != 3)) {
    throw ConfigError("invalid procedural scene geometry");
  }
  Rng rng(seed);
  Image img(channels, height, width);
  std::vector<float> tint(static_cast<std::size_t>(channels), 1.0f);

  // Background: a gentle ramp with a low-frequency undulation.
  const double g0 = uniform(rng, 0.25, 0.75);
  const double gdir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double wave = uniform(rng, 0.0, 0.08);
  for (int c = 0; c < channels; ++c) {
    const float t = channels == 1 ? 1.0f : static_cast<float>(uniform(rng, 0.85, 1.15));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double u = (std::cos(gdir) * x + std::sin(gdir) * y) / std::max(height, width);
        img.at(c, y, x) = t * static_cast<float>(g0 + 0.15 * (u - 0.5) + wave * std::sin(3.0 * u));
      }
  }

  const int shapes = uniform_int(rng, 5, 10);
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = uniform_int(rng, 0, 1) == 1;
    const double cy = uniform(rng, 0.0, height), cx = uniform(rng, 0.0, width);
    const double ry = uniform(rng, 0.08, 0.3) * height, rx = uniform(rng, 0.08, 0.3) * width;
    const Fill fill = random_fill(rng, height, width);
    for (int c = 0; c < channels; ++c) tint[static_cast<std::size_t>(c)] = channels == 1 ? 1.0f : static_cast<float>(uniform(rng, 0.7, 1.3));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        const bool inside = ellipse ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        const float v = fill_value(fill, y, x, width);
        for (int c = 0; c < channels; ++c) img.at(c, y, x) = v * tint[static_cast<std::size_t>(c)];
      }
  }
  image::clamp01(img);
  // Slight anti-aliasing of shape edges.
  Image out = distortion::gaussian_blur(img, 0.6);
  for (float& v : out.pixels) v = 0.05f + 0.9f * v;
  return out;
}

std::vector<Image> procedural_set(int count, int height, int width, int channels, std::uint64_t seed) {
  std::vector<Image> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(procedural_scene(height, width, channels, derive_seed(seed, static_cast<std::uint64_t>(i))));
  }
  return out;
}

std::vector<Image> load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image> out;
  for (const auto& f : files) out.push_back(image::read_pnm(f));
  return out;
}

Task parse_task(const std::string& name) {
  if (name == "denoise") return Task::Denoise;
  if (name == "mixed") return Task::Mixed;
  throw ConfigError("unknown task '" + name + "' (expected denoise or mixed)");
}

std::string to_string(Task task) { return task == Task::Denoise ? "denoise" : "mixed"; }

void SynthesisSpec::validate() const {
  if (!(sigma_max >= 0.0 && sigma_max <= distortion::kMaxSigma)) throw ConfigError("sigma_max outside [0, 50]");
  if (!(blur_max >= 0.0 && blur_max <= 5.0)) throw ConfigError("blur_max outside [0, 5]");
  if (quality_min < 10 || quality_min > 100) throw ConfigError("quality_min outside [10, 100]");
  if (patch < 9) throw ConfigError("patch must be >= 9");
}

SampleSource::SampleSource(std::vector<Image> clean, SynthesisSpec spec, std::uint64_t seed)
    : clean_(std::move(clean)), spec_(spec), seed_(seed) {
  spec_.validate();
  if (clean_.empty()) throw ConfigError("sample source needs at least one clean image");
  for (const Image& img : clean_) {
    if (img.height < spec_.patch || img.width < spec_.patch) {
      throw ConfigError("clean image smaller than the training patch");
    }
  }
}

Sample SampleSource::sample(std::size_t index) const {
  Rng rng(derive_seed(seed_, index));
  Sample s;
  s.meta.index = index;
  s.meta.source = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(clean_.size()) - 1));
  const Image& src = clean_[s.meta.source];
  const int p = spec_.patch;
  s.meta.top = uniform_int(rng, 0, src.height - p);
  s.meta.left = uniform_int(rng, 0, src.width - p);
  s.clean = image::crop(src, s.meta.top, s.meta.left, p, p);
  const std::uint64_t noise_seed = rng();

  if (spec_.task == Task::Mixed) {
    distortion::DegradationSpec d;
    d.blur_sigma = uniform(rng, 0.0, spec_.blur_max);
    d.noise_sigma = uniform(rng, 0.0, spec_.sigma_max);
    d.quality = uniform_int(rng, spec_.quality_min, 100);
    d.compress = true;
    s.degraded = distortion::degrade(s.clean, d, noise_seed);
    s.meta.blur_sigma = d.blur_sigma;
    s.meta.noise_sigma = d.noise_sigma;
    s.meta.quality = d.quality;
    return s;
  }

  distortion::NoiseMap map;
  switch (spec_.noise) {
    case NoiseKind::Uniform:
      map = distortion::noise_map_uniform(p, p, uniform(rng, 0.0, spec_.sigma_max));
      break;
    case NoiseKind::Linear: {
      // The ramp spans the full source width; the crop sees its slice.
      const auto full = distortion::noise_map_linear(1, src.width, spec_.sigma_max);
      map = distortion::NoiseMap{p, p, std::vector<float>(static_cast<std::size_t>(p) * p)};
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x) map.at(y, x) = full.at(0, s.meta.left + x);
      break;
    }
    case NoiseKind::Peaks: {
      const auto full = distortion::noise_map_peaks(src.height, src.width, rng(), spec_.sigma_max);
      map = distortion::NoiseMap{p, p, std::vector<float>(static_cast<std::size_t>(p) * p)};
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x) map.at(y, x) = full.at(s.meta.top + y, s.meta.left + x);
      break;
    }
  }
  double total = 0.0;
  for (float v : map.sigma) total += v;
  s.meta.noise_sigma = total / static_cast<double>(map.sigma.size());
  s.degraded = distortion::apply_noise(s.clean, map, noise_seed);
  return s;
}

std::vector<Sample> make_dataset(std::vector<Image> clean, const SynthesisSpec& spec, std::size_t count,
                                 std::uint64_t seed) {
  if (clean.empty()) throw ConfigError("make_dataset needs at least one clean image");
  if (count == 0) return {};
  const SampleSource source(std::move(clean), spec, seed);
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(source.sample(i));
  return out;
}

distortion::NoiseMap test_noise_map(distortion::NoiseKind kind, int height, int width, double sigma,
                                    std::uint64_t seed) {
  switch (kind) {
    case NoiseKind::Uniform: return distortion::noise_map_uniform(height, width, sigma);
    case NoiseKind::Linear: return distortion::noise_map_linear(height, width, sigma);
    case NoiseKind::Peaks: return distortion::noise_map_peaks(height, width, seed ^ 0x5eed, sigma);
  }
  throw UsageError("unhandled noise kind");
}

Image degrade_image(const Image& clean, distortion::NoiseKind kind, double sigma, std::uint64_t seed) {
  return distortion::apply_noise(clean, test_noise_map(kind, clean.height, clean.width, sigma, seed), seed);
}

}  // namespace pathroute::dataset
