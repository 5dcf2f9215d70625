// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/metrics.hpp"

#include <cmath>
#include <iomanip>

#include "pathroute/distortion.hpp"
#include "pathroute/error.hpp"
#include "pathroute/reward.hpp"

namespace pathroute::metrics {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ConfigError("psnr: image shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    acc += d * d;
  }
  const double m = acc / static_cast<double>(a.pixels.size());
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;

std::vector<double> window_taps() {
  std::vector<double> taps(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Valid-mode separable filtering of a single plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ConfigError("ssim: image shapes differ");
  if (a.height < kWindow || a.width < kWindow) throw ConfigError("ssim: image smaller than the 11x11 window");
  const Image ga = image::to_gray(a);
  const Image gb = image::to_gray(b);
  const int h = ga.height, w = ga.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = ga.pixels[i];
    y[i] = gb.pixels[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = window_taps();
  const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
  const auto sxx = filter_valid(xx, h, w, k), syy = filter_valid(yy, h, w, k), sxy = filter_valid(xy, h, w, k);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

EvalOutput evaluate(model::RoutedNet& model, const std::vector<TestPair>& test_set, const EvalOptions& opts) {
  const auto& cfg = model.config();
  EvalOutput out;
  EvalReport& rep = out.report;
  rep.route_histogram.assign(static_cast<std::size_t>(cfg.blocks),
                             std::vector<std::size_t>(static_cast<std::size_t>(cfg.paths), 0));
  double flops_total = 0.0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const TestPair& pair = test_set[i];
    if (!pair.degraded.same_shape(pair.clean)) throw ConfigError("test pair '" + pair.name + "' shapes differ");
    tiling::Tiles tiles = tiling::extract_patches(pair.degraded, cfg.patch, tiling::kStride);
    std::vector<Image> restored;
    restored.reserve(tiles.patches.size());
    double image_flops = 0.0;
    for (std::size_t k = 0; k < tiles.patches.size(); ++k) {
      const nn::Tensor x = image::to_tensor(tiles.patches[k]);
      RegionRecord rec{i, tiles.grid.row_of(k), tiles.grid.col_of(k), {}, 0};
      if (opts.forced_route) {
        restored.push_back(image::from_tensor(model::restore_forced(model, x, *opts.forced_route)));
        rec.actions = *opts.forced_route;
      } else {
        model::Restoration r = model::restore(model, x, model::RouteMode::Greedy, nullptr);
        restored.push_back(image::from_tensor(r.restored));
        rec.actions = r.trace.actions;
      }
      rec.flops = model::count_flops(rec.actions, cfg).total();
      for (std::size_t b = 0; b < rec.actions.size(); ++b) {
        rep.route_histogram[b][static_cast<std::size_t>(rec.actions[b])] += 1;
      }
      image_flops += static_cast<double>(rec.flops);
      rep.regions.push_back(std::move(rec));
    }
    Image merged = tiling::merge_patches(restored, tiles.grid);
    image::clamp01(merged);
    ImageReport ir;
    ir.name = pair.name;
    ir.psnr = psnr(merged, pair.clean);
    ir.input_psnr = psnr(pair.degraded, pair.clean);
    ir.ssim = ssim(merged, pair.clean);
    ir.regions = tiles.patches.size();
    ir.mean_flops = image_flops / static_cast<double>(ir.regions);
    flops_total += image_flops;
    rep.n_regions += ir.regions;
    rep.images.push_back(ir);
    if (opts.keep_restored) out.restored.push_back(std::move(merged));
  }
  if (!rep.images.empty()) {
    for (const auto& ir : rep.images) {
      rep.psnr += ir.psnr;
      rep.input_psnr += ir.input_psnr;
      rep.ssim += ir.ssim;
    }
    const double n = static_cast<double>(rep.images.size());
    rep.psnr /= n;
    rep.input_psnr /= n;
    rep.ssim /= n;
    rep.mean_flops = flops_total / static_cast<double>(rep.n_regions);
  }
  return out;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "name,psnr,input_psnr,ssim,mean_flops,regions\n";
  out << std::setprecision(10);
  for (const auto& ir : report.images) {
    out << ir.name << ',' << ir.psnr << ',' << ir.input_psnr << ',' << ir.ssim << ',' << ir.mean_flops << ','
        << ir.regions << '\n';
  }
  out << "summary," << report.psnr << ',' << report.input_psnr << ',' << report.ssim << ',' << report.mean_flops
      << ',' << report.n_regions << '\n';
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  out << std::setprecision(10);
  out << "{\n  \"psnr\": " << report.psnr << ",\n  \"input_psnr\": " << report.input_psnr
      << ",\n  \"ssim\": " << report.ssim << ",\n  \"mean_flops\": " << report.mean_flops
      << ",\n  \"n_regions\": " << report.n_regions << ",\n  \"route_histogram\": [";
  for (std::size_t b = 0; b < report.route_histogram.size(); ++b) {
    out << (b ? ", " : "") << '[';
    for (std::size_t a = 0; a < report.route_histogram[b].size(); ++a) {
      out << (a ? ", " : "") << report.route_histogram[b][a];
    }
    out << ']';
  }
  out << "]\n}\n";
}

}  // namespace pathroute::metrics
