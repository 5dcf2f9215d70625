// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pathroute/checkpoint.hpp"
#include "pathroute/error.hpp"
#include "pathroute/tiling.hpp"

namespace pathroute::pipeline {

namespace {

// Seed streams for the independent random sources of a run.
enum Stream : std::uint64_t {
  kCleanScenes = 100,
  kTestScenes = 200,
  kTestNoise = 300,
  kHoldout = 400,
  kRouteImage = 500,
  kTrainData = 600,
  kStage2Rng = 700,
};

std::uint64_t stream(const config::RunConfig& cfg, Stream s, std::uint64_t i = 0) {
  return derive_seed(derive_seed(cfg.train.seed, s), i);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw IoError("cannot write '" + path.string() + "'");
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f.precision(10);
  return f;
}

void note(const CommandOptions& opts, const std::string& msg) {
  if (opts.progress) opts.progress(msg);
}

std::string image_ext(const image::Image& img) { return img.channels == 3 ? ".ppm" : ".pgm"; }

std::unique_ptr<model::RoutedNet> eval_model(const config::RunConfig& cfg, const CommandOptions& opts) {
  const std::string path = !opts.init.empty() ? opts.init : cfg.checkpoint;
  if (path.empty()) throw ConfigError("no model given: pass --init CKPT or set 'checkpoint'");
  return checkpoint::load_model(path);
}

void reset_optimizer(model::RoutedNet& m) {
  for (nn::Parameter* p : m.parameters()) {
    std::fill(p->adam_m.begin(), p->adam_m.end(), 0.0f);
    std::fill(p->adam_v.begin(), p->adam_v.end(), 0.0f);
    p->step = 0;
  }
}

bool same_model(const model::ModelConfig& a, const model::ModelConfig& b) {
  return checkpoint::model_config_keys(a) == checkpoint::model_config_keys(b);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Settings that identify a finished training run.
kv::KeyValues run_identity(const config::RunConfig& cfg, int stage) {
  kv::KeyValues id = checkpoint::model_config_keys(cfg.model);
  for (auto& [k, v] : cfg.train.keys()) id[k] = v;
  id["stage"] = std::to_string(stage);
  id["iteration"] = std::to_string(stage == 1 ? cfg.train.iters_stage1 : cfg.train.iters_stage2);
  for (const char* k : {"task", "noise", "sigma_max", "clean_dir", "clean_count", "clean_size"}) {
    id[k] = cfg.keys().at(k);
  }
  return id;
}

bool finished_run_matches(const fs::path& final_path, const kv::KeyValues& identity, const std::string& init_hash) {
  if (!fs::exists(final_path)) return false;
  const auto meta = checkpoint::read(final_path).meta;
  for (const auto& [k, v] : identity) {
    auto it = meta.find(k);
    if (it == meta.end() || it->second != v) return false;
  }
  if (!init_hash.empty()) {
    auto it = meta.find("init_hash");
    if (it == meta.end() || it->second != init_hash) return false;
  }
  return true;
}

}  // namespace

void prepare_output(const fs::path& out, const config::RunConfig& cfg, const CommandOptions& opts) {
  if (fs::exists(out / "config.txt") && !opts.force) {
    throw UsageError("output directory '" + out.string() + "' holds earlier results; pass --force to overwrite");
  }
  fs::create_directories(out);
  write_text(out / "config.txt", opts.config_text);
  write_text(out / "config.effective.txt", kv::format(cfg.keys()));
}

std::vector<image::Image> clean_sources(const config::RunConfig& cfg) {
  if (!cfg.clean_dir.empty()) return dataset::load_directory(cfg.clean_dir);
  return dataset::procedural_set(cfg.clean_count, cfg.clean_size, cfg.clean_size, cfg.model.channels,
                                 stream(cfg, kCleanScenes));
}

std::vector<metrics::TestPair> test_set(const config::RunConfig& cfg) {
  std::vector<image::Image> clean;
  std::vector<std::string> names;
  if (!cfg.test_dir.empty()) {
    clean = dataset::load_directory(cfg.test_dir);
  } else {
    clean = dataset::procedural_set(cfg.test_count, cfg.test_size, cfg.test_size, cfg.model.channels,
                                    stream(cfg, kTestScenes));
  }
  std::vector<metrics::TestPair> out;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i].channels != cfg.model.channels) {
      throw ConfigError("test image " + std::to_string(i) + " has " + std::to_string(clean[i].channels) +
                        " channels, model expects " + std::to_string(cfg.model.channels));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "test_%03zu", i);
    metrics::TestPair p;
    p.name = name;
    p.degraded = dataset::degrade_image(clean[i], cfg.test_noise, cfg.test_sigma, stream(cfg, kTestNoise, i));
    p.clean = std::move(clean[i]);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<distortion::NoiseMap> test_noise_maps(const config::RunConfig& cfg) {
  std::vector<distortion::NoiseMap> out;
  const auto tests = test_set(cfg);
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto& img = tests[i].clean;
    out.push_back(dataset::test_noise_map(cfg.test_noise, img.height, img.width, cfg.test_sigma,
                                          stream(cfg, kTestNoise, i)));
  }
  return out;
}

std::vector<trainer::Pair> holdout_set(const config::RunConfig& cfg) {
  std::vector<trainer::Pair> out;
  const int p = cfg.model.patch;
  const auto scenes = dataset::procedural_set(cfg.holdout_count, p, p, cfg.model.channels, stream(cfg, kHoldout));
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto noisy = dataset::degrade_image(scenes[i], distortion::NoiseKind::Uniform, cfg.holdout_sigma,
                                              stream(cfg, kHoldout, i + 1));
    out.push_back({image::to_tensor(noisy), image::to_tensor(scenes[i])});
  }
  return out;
}

std::uint64_t weights_hash(model::RoutedNet& model) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const nn::Parameter* p : model.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.ptr());
    for (std::size_t i = 0; i < p->value.numel() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::size_t cmd_synth(const config::RunConfig& cfg, const CommandOptions& opts) {
  cfg.validate();
  auto clean = clean_sources(cfg);
  prepare_output(opts.out, cfg, opts);
  const fs::path dir = opts.out / "pairs";
  fs::create_directories(dir);
  const dataset::SampleSource source(std::move(clean), cfg.synthesis, stream(cfg, kTrainData, 1));
  auto manifest = open_csv(opts.out / "manifest.csv");
  manifest << "index,source,top,left,noise_sigma,blur_sigma,quality,degraded,clean\n";
  for (int i = 0; i < cfg.synth_count; ++i) {
    const dataset::Sample s = source.sample(static_cast<std::size_t>(i));
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06d", i);
    const std::string deg = std::string(stem) + "_degraded" + image_ext(s.degraded);
    const std::string cln = std::string(stem) + "_clean" + image_ext(s.clean);
    image::write_pnm(dir / deg, s.degraded);
    image::write_pnm(dir / cln, s.clean);
    const auto& m = s.meta;
    manifest << m.index << ',' << m.source << ',' << m.top << ',' << m.left << ',' << m.noise_sigma << ','
             << m.blur_sigma << ',' << m.quality << ",pairs/" << deg << ",pairs/" << cln << '\n';
  }
  if (!manifest) throw IoError("write failed for manifest.csv");
  return static_cast<std::size_t>(cfg.synth_count);
}

fs::path cmd_train(const config::RunConfig& cfg, const CommandOptions& opts) {
  cfg.validate();
  const int stage = opts.stage.value_or(1);
  if (stage != 1 && stage != 2) throw UsageError("--stage must be 1 or 2");
  if (stage == 2 && opts.init.empty()) throw UsageError("stage 2 requires --init pointing at a stage-1 checkpoint");
  const fs::path final_path = opts.out / "final.prst";

  trainer::TrainState state;
  std::string init_hash;
  bool resume = false;
  if (!opts.init.empty()) {
    state = trainer::load_state(opts.init);
    if (!same_model(state.model->config(), cfg.model)) {
      throw ConfigError("checkpoint '" + opts.init + "' was trained with a different model configuration");
    }
    const int len = stage == 1 ? cfg.train.iters_stage1 : cfg.train.iters_stage2;
    if (state.stage == stage) {
      if (state.iteration >= len) throw UsageError("checkpoint '" + opts.init + "' already finished stage " +
                                                   std::to_string(stage));
      resume = true;
    } else if (state.stage == 1 && stage == 2) {
      init_hash = hex(weights_hash(*state.model));
      state.stage = 2;
      state.iteration = 0;
      state.rng = Rng(stream(cfg, kStage2Rng));
      reset_optimizer(*state.model);
    } else {
      throw UsageError("cannot start stage " + std::to_string(stage) + " from a stage-" +
                       std::to_string(state.stage) + " checkpoint");
    }
  } else {
    state = trainer::make_state(cfg.model, cfg.train.seed);
  }

  if (opts.reuse && !resume && finished_run_matches(final_path, run_identity(cfg, stage), init_hash)) {
    note(opts, "reusing " + final_path.string());
    return final_path;
  }
  if (resume) {
    // Continuing an interrupted run in place is not an overwrite.
    fs::create_directories(opts.out);
    if (!fs::exists(opts.out / "config.txt")) prepare_output(opts.out, cfg, opts);
  } else {
    prepare_output(opts.out, cfg, opts);
  }

  const dataset::SampleSource source(clean_sources(cfg), cfg.synthesis, stream(cfg, kTrainData, stage));
  trainer::TrainRun run;
  run.out_dir = opts.out;
  run.holdout = holdout_set(cfg);
  run.echo = cfg.keys();
  if (!init_hash.empty()) run.echo["init_hash"] = init_hash;
  if (resume) {
    const auto meta = checkpoint::read(opts.init).meta;
    if (auto it = meta.find("init_hash"); it != meta.end()) run.echo["init_hash"] = it->second;
  }
  if (opts.progress) {
    run.on_log = [&opts, stage](long iter, const trainer::StepStats& s) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "stage %d iter %ld loss %.6g reward %.4g flops %.4g", stage, iter, s.loss,
                    s.mean_reward, s.mean_flops);
      opts.progress(buf);
    };
  }
  trainer::train(state, cfg.train, source, run);
  return final_path;
}

metrics::EvalReport cmd_eval(const config::RunConfig& cfg, const CommandOptions& opts) {
  cfg.validate();
  auto model = eval_model(cfg, opts);
  const auto tests = test_set(cfg);
  prepare_output(opts.out, cfg, opts);
  metrics::EvalOptions eo;
  eo.keep_restored = true;
  const auto result = metrics::evaluate(*model, tests, eo);
  fs::create_directories(opts.out / "restored");
  for (std::size_t i = 0; i < tests.size(); ++i) {
    image::write_pnm(opts.out / "restored" / (tests[i].name + image_ext(result.restored[i])), result.restored[i]);
  }
  auto csv = open_csv(opts.out / "report.csv");
  metrics::write_report_csv(csv, result.report);
  auto json = open_csv(opts.out / "report.json");
  metrics::write_report_json(json, result.report);
  if (!csv || !json) throw IoError("write failed for the evaluation report");
  return result.report;
}

std::vector<RegionRoute> route_regions(model::RoutedNet& model, const image::Image& degraded,
                                       const distortion::NoiseMap* noise) {
  const auto& mc = model.config();
  const auto tiles = tiling::extract_patches(degraded, mc.patch, tiling::kStride);
  std::vector<RegionRoute> out;
  for (std::size_t k = 0; k < tiles.patches.size(); ++k) {
    RegionRoute r;
    r.row = static_cast<int>(k / tiles.grid.cols.size());
    r.col = static_cast<int>(k % tiles.grid.cols.size());
    r.top = tiles.grid.row_of(k);
    r.left = tiles.grid.col_of(k);
    r.actions = model::restore(model, image::to_tensor(tiles.patches[k]), model::RouteMode::Greedy, nullptr).trace.actions;
    r.flops = model::count_flops(r.actions, mc).total();
    if (noise != nullptr) {
      double total = 0.0;
      int n = 0;
      for (int y = r.top; y < std::min(r.top + mc.patch, noise->height); ++y)
        for (int x = r.left; x < std::min(r.left + mc.patch, noise->width); ++x, ++n) total += noise->at(y, x);
      r.noise_sigma = n > 0 ? total / n : 0.0;
    }
    out.push_back(std::move(r));
  }
  return out;
}

image::Image route_heatmap(const std::vector<RegionRoute>& regions, const model::ModelConfig& cfg, int height,
                           int width) {
  const double lo = static_cast<double>(model::min_route_flops(cfg).total());
  const double hi = static_cast<double>(model::max_route_flops(cfg).total());
  image::Image map(3, height, width);
  for (const auto& r : regions) {
    const double f = hi > lo ? std::clamp((static_cast<double>(r.flops) - lo) / (hi - lo), 0.0, 1.0) : 0.0;
    const float red = static_cast<float>(220.0 * f / 255.0);
    const float green = static_cast<float>(200.0 * (1.0 - f) / 255.0);
    for (int y = r.top; y < std::min(r.top + cfg.patch, height); ++y)
      for (int x = r.left; x < std::min(r.left + cfg.patch, width); ++x) {
        map.at(0, y, x) = red;
        map.at(1, y, x) = green;
        map.at(2, y, x) = 0.0f;
      }
  }
  return map;
}

std::vector<RegionRoute> cmd_route_map(const config::RunConfig& cfg, const CommandOptions& opts) {
  cfg.validate();
  auto model = eval_model(cfg, opts);
  image::Image degraded;
  std::optional<distortion::NoiseMap> noise;
  if (!cfg.route_image.empty()) {
    degraded = image::read_pnm(cfg.route_image);
  } else {
    const auto clean = dataset::procedural_scene(cfg.test_size, cfg.test_size, cfg.model.channels,
                                                 stream(cfg, kRouteImage));
    noise = dataset::test_noise_map(cfg.test_noise, clean.height, clean.width, cfg.test_sigma,
                                    stream(cfg, kRouteImage, 1));
    degraded = distortion::apply_noise(clean, *noise, stream(cfg, kRouteImage, 1));
  }
  if (degraded.channels != cfg.model.channels) throw ConfigError("route image channels do not match the model");
  prepare_output(opts.out, cfg, opts);
  const auto regions = route_regions(*model, degraded, noise ? &*noise : nullptr);
  image::write_pnm(opts.out / ("input" + image_ext(degraded)), degraded);
  image::write_pnm(opts.out / "route_map.ppm", route_heatmap(regions, cfg.model, degraded.height, degraded.width));
  auto csv = open_csv(opts.out / "regions.csv");
  csv << "region,row,col,top,left";
  for (int i = 1; i <= cfg.model.blocks; ++i) csv << ",a_" << i;
  csv << ",flops,noise_sigma\n";
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const auto& r = regions[k];
    csv << k << ',' << r.row << ',' << r.col << ',' << r.top << ',' << r.left;
    for (int a : r.actions) csv << ',' << a;
    csv << ',' << r.flops << ',';
    if (r.noise_sigma >= 0.0) csv << r.noise_sigma;
    csv << '\n';
  }
  if (!csv) throw IoError("write failed for regions.csv");
  return regions;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  auto csv = open_csv(path);
  csv << "p,psnr,mean_flops,regulated\n";
  for (const auto& r : rows) {
    csv << r.penalty << ',' << r.psnr << ',' << r.mean_flops << ',' << (r.regulated ? "true" : "false") << '\n';
  }
  if (!csv) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<SweepRow> cmd_sweep(const config::RunConfig& cfg, const CommandOptions& opts) {
  cfg.validate();
  if (opts.init.empty()) throw UsageError("sweep requires --init pointing at a stage-1 checkpoint");
  prepare_output(opts.out, cfg, opts);
  const auto tests = test_set(cfg);
  std::vector<bool> variants;
  if (cfg.sweep_variants != config::SweepVariants::NonRegulated) variants.push_back(true);
  if (cfg.sweep_variants != config::SweepVariants::Regulated) variants.push_back(false);
  std::vector<SweepRow> rows;
  for (bool regulated : variants) {
    for (std::size_t i = 0; i < cfg.sweep_penalties.size(); ++i) {
      config::RunConfig run = cfg;
      run.train.reward.penalty = cfg.sweep_penalties[i];
      run.train.reward.regulated = regulated;
      run.train.iters_stage2 = cfg.sweep_iters;
      run.train.checkpoint_interval = std::max(run.train.log_interval,
                                               cfg.sweep_iters / run.train.log_interval * run.train.log_interval);
      CommandOptions sub;
      sub.out = opts.out / "runs" / ((regulated ? "regulated_p" : "nonregulated_p") + kv::from_double(run.train.reward.penalty));
      sub.force = true;
      sub.stage = 2;
      sub.init = opts.init;
      sub.config_text = kv::format(run.keys());
      sub.reuse = opts.reuse;
      sub.progress = opts.progress;
      note(opts, "sweep: p=" + kv::from_double(run.train.reward.penalty) + (regulated ? " regulated" : " non-regulated"));
      const fs::path ckpt = cmd_train(run, sub);
      auto model = checkpoint::load_model(ckpt);
      const auto report = metrics::evaluate(*model, tests).report;
      rows.push_back({run.train.reward.penalty, report.psnr, report.mean_flops, regulated});
      write_sweep_csv(opts.out / "sweep.csv", rows);
    }
  }
  return rows;
}

}  // namespace pathroute::pipeline
