// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end:
//   pathroute <synth|train|eval|route-map|sweep> --config FILE [--seed N] [--out DIR]
//             [--stage 1|2] [--init CKPT] [--force] [--non-regulated]
// Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or config error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pathroute/error.hpp"
#include "pathroute/pipeline.hpp"
#include "pathroute/runtime.hpp"

namespace {

constexpr const char* kReportHelp =
    "Outputs:\n"
    "  synth      pairs/NNNNNN_{degraded,clean}.pgm, manifest.csv\n"
    "             (index,source,top,left,noise_sigma,blur_sigma,quality,degraded,clean)\n"
    "  train      metrics.csv (iter,stage,loss,mean_reward,mean_flops,psnr), checkpoint.prst, final.prst\n"
    "  eval       report.csv (name,psnr,input_psnr,ssim,mean_flops,regions; last row 'summary'),\n"
    "             report.json (psnr, input_psnr, ssim, mean_flops, n_regions, route_histogram), restored/\n"
    "  route-map  route_map.ppm, regions.csv (region,row,col,top,left,a_1..a_N,flops,noise_sigma)\n"
    "  sweep      sweep.csv (p,psnr,mean_flops,regulated), runs/\n"
    "Every command writes config.txt (verbatim) and config.effective.txt into --out.\n"
    "Exit codes: 0 success, 1 runtime failure, 2 usage or config error.";

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pathroute::IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  namespace pl = pathroute::pipeline;
  pathroute::tune_allocator();
  CLI::App app{"Path-routed image restoration: synthesis, training, evaluation and routing analysis"};
  app.footer(kReportHelp);
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> stage;
  std::string init;
  bool force = false;
  bool non_regulated = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key = value config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out, "output directory")->capture_default_str();
    cmd->add_option("--init", init, "checkpoint to start from or evaluate");
    cmd->add_flag("--force", force, "allow overwriting earlier outputs");
    cmd->add_flag("--non-regulated", non_regulated, "fix the difficulty d to 1");
  };
  auto* synth = app.add_subcommand("synth", "write degraded/clean training pairs and a manifest");
  auto* train = app.add_subcommand("train", "run one training stage");
  auto* eval = app.add_subcommand("eval", "restore the test set and report PSNR, SSIM and FLOPs");
  auto* route_map = app.add_subcommand("route-map", "per-region route heatmap and CSV");
  auto* sweep = app.add_subcommand("sweep", "stage-2 fine-tunes over reward penalties");
  for (auto* cmd : {synth, train, eval, route_map, sweep}) add_common(cmd);
  train->add_option("--stage", stage, "1 (random routes) or 2 (joint with the pathfinder)")
      ->check(CLI::IsMember({1, 2}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    pl::CommandOptions opts;
    opts.out = out;
    opts.force = force;
    opts.stage = stage;
    opts.init = init;
    opts.config_text = slurp(config_path);
    opts.progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
    auto cfg = pathroute::config::load(config_path);
    if (seed) cfg.train.seed = *seed;
    if (non_regulated) {
      cfg.train.reward.regulated = false;
      cfg.sweep_variants = pathroute::config::SweepVariants::NonRegulated;
    }
    cfg.validate();

    if (synth->parsed()) {
      const auto n = pl::cmd_synth(cfg, opts);
      std::cout << "wrote " << n << " pairs to " << opts.out.string() << '\n';
    } else if (train->parsed()) {
      const auto path = pl::cmd_train(cfg, opts);
      std::cout << "checkpoint: " << path.string() << '\n';
    } else if (eval->parsed()) {
      const auto rep = pl::cmd_eval(cfg, opts);
      std::cout << "psnr " << rep.psnr << " dB (input " << rep.input_psnr << "), ssim " << rep.ssim
                << ", mean FLOPs/region " << rep.mean_flops << '\n';
    } else if (route_map->parsed()) {
      const auto regions = pl::cmd_route_map(cfg, opts);
      std::cout << "mapped " << regions.size() << " regions to " << (opts.out / "route_map.ppm").string() << '\n';
    } else if (sweep->parsed()) {
      const auto rows = pl::cmd_sweep(cfg, opts);
      for (const auto& r : rows) {
        std::cout << "p=" << r.penalty << (r.regulated ? " regulated" : " non-regulated") << " psnr " << r.psnr
                  << " flops " << r.mean_flops << '\n';
      }
    }
    return 0;
  } catch (const pathroute::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const pathroute::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
