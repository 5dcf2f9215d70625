// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings. Images cross the boundary as float32 arrays of shape
// (H, W) or (H, W, C) with values in [0, 1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pathroute/checkpoint.hpp"
#include "pathroute/dataset.hpp"
#include "pathroute/error.hpp"
#include "pathroute/metrics.hpp"
#include "pathroute/model.hpp"
#include "pathroute/reward.hpp"
#include "pathroute/tiling.hpp"
#include "pathroute/trainer.hpp"

namespace py = pybind11;
using namespace pathroute;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

image::Image to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  if (c != 1 && c != 3) throw py::value_error("expected 1 or 3 channels");
  image::Image img(c, h, w);
  const float* src = a.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(k, y, x) = src[(static_cast<std::size_t>(y) * w + x) * c + k];
  return img;
}

Array from_image(const image::Image& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels == 3) shape.push_back(3);
  Array out(shape);
  float* dst = out.mutable_data();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int k = 0; k < img.channels; ++k)
        dst[(static_cast<std::size_t>(y) * img.width + x) * img.channels + k] = img.at(k, y, x);
  return out;
}

model::RouteMode parse_mode(const std::string& mode) {
  if (mode == "greedy") return model::RouteMode::Greedy;
  if (mode == "sample") return model::RouteMode::Sample;
  throw py::value_error("mode must be 'greedy' or 'sample'");
}

py::tuple restore_patch(model::RoutedNet& m, const Array& patch, const std::string& mode, std::uint64_t seed) {
  const auto img = to_image(patch);
  Rng rng(seed);
  const auto r = model::restore(m, image::to_tensor(img), parse_mode(mode), &rng);
  return py::make_tuple(from_image(image::from_tensor(r.restored)), r.trace.actions, r.trace.probs);
}

// Restores one patch along a fixed route, one action per block.
Array restore_route(model::RoutedNet& m, const Array& patch, const std::vector<int>& route) {
  return from_image(image::from_tensor(model::restore_forced(m, image::to_tensor(to_image(patch)), route)));
}

// Tiled restoration with greedy routes, as in evaluation.
py::tuple restore_image(model::RoutedNet& m, const Array& degraded) {
  const auto img = to_image(degraded);
  const auto tiles = tiling::extract_patches(img, m.config().patch);
  std::vector<image::Image> out;
  std::vector<std::vector<int>> routes;
  for (const auto& p : tiles.patches) {
    auto r = model::restore(m, image::to_tensor(p), model::RouteMode::Greedy, nullptr);
    out.push_back(image::from_tensor(r.restored));
    routes.push_back(std::move(r.trace.actions));
  }
  auto merged = tiling::merge_patches(out, tiles.grid);
  image::clamp01(merged);
  return py::make_tuple(from_image(merged), routes);
}

}  // namespace

PYBIND11_MODULE(_pathroute, mod) {
  mod.doc() = "Region-wise path-routed image restoration";

  py::register_exception<ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<UsageError>(mod, "UsageError", PyExc_ValueError);
  py::register_exception<IoError>(mod, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(mod, "NumericError", PyExc_ArithmeticError);

  py::class_<model::ModelConfig>(mod, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("blocks", &model::ModelConfig::blocks)
      .def_readwrite("paths", &model::ModelConfig::paths)
      .def_readwrite("pathfinder_convs", &model::ModelConfig::pathfinder_convs)
      .def_readwrite("features", &model::ModelConfig::features)
      .def_readwrite("hidden", &model::ModelConfig::hidden)
      .def_readwrite("pathfinder_width", &model::ModelConfig::pathfinder_width)
      .def_readwrite("patch", &model::ModelConfig::patch)
      .def_readwrite("channels", &model::ModelConfig::channels)
      .def("validate", &model::ModelConfig::validate)
      .def_static("denoising", &model::ModelConfig::denoising)
      .def_static("mixed", &model::ModelConfig::mixed);

  py::class_<model::RoutedNet>(mod, "RoutedNet")
      .def(py::init([](const model::ModelConfig& cfg, std::uint64_t seed) {
             return std::make_unique<model::RoutedNet>(cfg, seed);
           }),
           py::arg("config"), py::arg("seed") = 1)
      .def_property_readonly("config", &model::RoutedNet::config)
      .def("parameter_count", [](model::RoutedNet& m) {
        std::size_t n = 0;
        for (auto* p : m.parameters()) n += p->value.numel();
        return n;
      })
      .def("save", [](model::RoutedNet& m, const std::filesystem::path& path) { checkpoint::save(path, m, {}); })
      .def_static("load", [](const std::filesystem::path& path) { return checkpoint::load_model(path); });

  mod.def("restore_patch", &restore_patch, py::arg("model"), py::arg("patch"), py::arg("mode") = "greedy",
          py::arg("seed") = 0, "Restore one region; returns (restored, actions, per-block probabilities).");
  mod.def("restore_route", &restore_route, py::arg("model"), py::arg("patch"), py::arg("route"),
          "Restore one region along a fixed route, one action per block.");
  mod.def("restore_image", &restore_image, py::arg("model"), py::arg("degraded"),
          "Tile, restore each region on its greedy route and merge; returns (restored, routes).");

  mod.def("conv_flops", &model::conv_flops);
  mod.def(
      "count_flops",
      [](const std::vector<int>& route, const model::ModelConfig& cfg) {
        const auto f = model::count_flops(route, cfg);
        return py::make_tuple(f.network, f.pathfinder);
      },
      "Returns (network, pathfinder) FLOPs for one region.");

  mod.def("difficulty", &reward::difficulty, py::arg("output_loss"), py::arg("threshold"));
  mod.def("step_reward", &reward::step_reward, py::arg("block"), py::arg("blocks"), py::arg("action"),
          py::arg("penalty"), py::arg("d"), py::arg("delta_l2"));
  mod.def("lr_schedule", [](int iter, double lr0, int stage_len) {
    trainer::TrainConfig cfg;
    cfg.lr0 = lr0;
    return trainer::lr_schedule(iter, cfg, stage_len);
  });

  mod.def("psnr", [](const Array& a, const Array& b) { return metrics::psnr(to_image(a), to_image(b)); });
  mod.def("ssim", [](const Array& a, const Array& b) { return metrics::ssim(to_image(a), to_image(b)); });

  mod.def(
      "add_noise",
      [](const Array& clean, const std::string& kind, double sigma, std::uint64_t seed) {
        return from_image(dataset::degrade_image(to_image(clean), distortion::parse_noise_kind(kind), sigma, seed));
      },
      py::arg("clean"), py::arg("kind") = "uniform", py::arg("sigma") = 25.0, py::arg("seed") = 0,
      "Gaussian noise; sigma in 8-bit units is the level (uniform) or the maximum (linear, peaks).");
  mod.def(
      "gaussian_blur",
      [](const Array& img, double sigma) { return from_image(distortion::gaussian_blur(to_image(img), sigma)); });
  mod.def(
      "dct_compress",
      [](const Array& img, int quality) { return from_image(distortion::dct_compress(to_image(img), quality)); });
  mod.def(
      "procedural_scene",
      [](int height, int width, int channels, std::uint64_t seed) {
        return from_image(dataset::procedural_scene(height, width, channels, seed));
      },
      py::arg("height"), py::arg("width"), py::arg("channels") = 1, py::arg("seed") = 0);

  mod.def(
      "extract_patches",
      [](const Array& img) {
        const auto tiles = tiling::extract_patches(to_image(img));
        std::vector<Array> out;
        for (const auto& p : tiles.patches) out.push_back(from_image(p));
        return py::make_tuple(out, tiles.grid.rows, tiles.grid.cols);
      },
      "Returns (patches, row anchors, column anchors) at patch 63, stride 53.");
  mod.def(
      "merge_patches",
      [](const std::vector<Array>& patches, int height, int width) {
        std::vector<image::Image> imgs;
        for (const auto& p : patches) imgs.push_back(to_image(p));
        return from_image(tiling::merge_patches(imgs, tiling::make_grid(height, width)));
      },
      py::arg("patches"), py::arg("height"), py::arg("width"));
}
