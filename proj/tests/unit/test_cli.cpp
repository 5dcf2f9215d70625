// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the pathroute executable end to end on a tiny configuration.

#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pathroute/checkpoint.hpp"
#include "pathroute/image.hpp"
#include "pathroute/keyvalue.hpp"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "# tiny smoke configuration\n"
    "blocks = 2\npaths = 2\nfeatures = 4\nhidden = 4\npathfinder_width = 2\n"
    "iters_stage1 = 4\niters_stage2 = 4\nbatch = 2\nlog_interval = 2\ncheckpoint_interval = 2\n"
    "clean_count = 2\nclean_size = 80\nsynth_count = 5\nholdout_count = 2\n"
    "test_count = 2\ntest_size = 100\nsweep_penalties = 1e-5,1e-4\nsweep_iters = 2\n";

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / "pathroute_cli") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "tiny.cfg") << kTinyConfig;
  }
  ~Workspace() { fs::remove_all(dir); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(PATHROUTE_CLI) + " " + args + " --config " + (dir / "tiny.cfg").string() +
                            " > " + (dir / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long lines(const fs::path& p) {
  const auto s = slurp(p);
  return std::count(s.begin(), s.end(), '\n');
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
  Workspace ws;
  CHECK(std::system((std::string(PATHROUTE_CLI) + " > /dev/null 2>&1").c_str()) != 0);
  CHECK(ws.run("train --stage 3 --out " + ws.out("x")) == 2);
  CHECK(ws.run("train --stage 2 --out " + ws.out("x")) == 2);
  CHECK(ws.run("sweep --out " + ws.out("x")) == 2);
  CHECK(ws.run("eval --out " + ws.out("x")) == 2);
  std::ofstream(ws.dir / "bad.cfg") << "blocks = two\n";
  const int status = std::system((std::string(PATHROUTE_CLI) + " synth --config " + (ws.dir / "bad.cfg").string() +
                                  " --out " + ws.out("y") + " > /dev/null 2>&1")
                                     .c_str());
  CHECK(WEXITSTATUS(status) == 2);
}

TEST_CASE("synth writes the pairs and a manifest, reproducibly") {
  Workspace ws;
  REQUIRE(ws.run("synth --out " + ws.out("s1")) == 0);
  CHECK(lines(ws.dir / "s1" / "manifest.csv") == 6);
  CHECK(slurp(ws.dir / "s1" / "manifest.csv").rfind("index,source,top,left,noise_sigma,blur_sigma,quality,degraded,clean\n", 0) == 0);
  CHECK(fs::exists(ws.dir / "s1" / "pairs" / "000004_degraded.pgm"));
  CHECK(fs::exists(ws.dir / "s1" / "config.txt"));
  CHECK(slurp(ws.dir / "s1" / "config.txt") == kTinyConfig);
  REQUIRE(ws.run("synth --out " + ws.out("s2")) == 0);
  CHECK(slurp(ws.dir / "s1" / "pairs" / "000003_degraded.pgm") == slurp(ws.dir / "s2" / "pairs" / "000003_degraded.pgm"));
  CHECK(ws.run("synth --out " + ws.out("s1")) == 2);
  CHECK(ws.run("synth --force --out " + ws.out("s1")) == 0);
  REQUIRE(ws.run("synth --seed 9 --out " + ws.out("s3")) == 0);
  CHECK(slurp(ws.dir / "s1" / "pairs" / "000003_degraded.pgm") != slurp(ws.dir / "s3" / "pairs" / "000003_degraded.pgm"));
}

TEST_CASE("train, eval, route-map and sweep chain together") {
  Workspace ws;
  REQUIRE(ws.run("train --stage 1 --out " + ws.out("st1")) == 0);
  CHECK(lines(ws.dir / "st1" / "metrics.csv") == 1 + 4 / 2);
  REQUIRE(fs::exists(ws.dir / "st1" / "final.prst"));

  CHECK(ws.run("route-map --out " + ws.out("rm0")) == 2);  // no model given

  REQUIRE(ws.run("train --stage 2 --init " + ws.out("st1/final.prst") + " --out " + ws.out("st2")) == 0);
  const auto log = slurp(ws.dir / "st2" / "metrics.csv");
  CHECK(log.rfind("iter,stage,loss,mean_reward,mean_flops,psnr\n", 0) == 0);
  CHECK(lines(ws.dir / "st2" / "metrics.csv") == 3);

  REQUIRE(ws.run("eval --init " + ws.out("st2/final.prst") + " --out " + ws.out("ev")) == 0);
  CHECK(lines(ws.dir / "ev" / "report.csv") == 1 + 2 + 1);
  CHECK(slurp(ws.dir / "ev" / "report.json").find("\"route_histogram\"") != std::string::npos);
  CHECK(fs::exists(ws.dir / "ev" / "restored" / "test_001.pgm"));

  REQUIRE(ws.run("route-map --init " + ws.out("st2/final.prst") + " --out " + ws.out("rm")) == 0);
  // 100 px at stride 53 gives two anchors per side.
  CHECK(lines(ws.dir / "rm" / "regions.csv") == 1 + 4);
  CHECK(slurp(ws.dir / "rm" / "regions.csv").rfind("region,row,col,top,left,a_1,a_2,flops,noise_sigma\n", 0) == 0);
  CHECK(fs::exists(ws.dir / "rm" / "route_map.ppm"));

  REQUIRE(ws.run("sweep --init " + ws.out("st1/final.prst") + " --out " + ws.out("sw")) == 0);
  const auto sweep = slurp(ws.dir / "sw" / "sweep.csv");
  CHECK(sweep.rfind("p,psnr,mean_flops,regulated\n", 0) == 0);
  CHECK(lines(ws.dir / "sw" / "sweep.csv") == 1 + 2 * 2);

  const auto meta = pathroute::kv::parse(slurp(ws.dir / "sw" / "runs" / "regulated_p1e-05" / "config.effective.txt"));
  CHECK(meta.at("penalty") == "1e-05");
}

TEST_CASE("a fresh model routes every region through the bypass") {
  Workspace ws;
  REQUIRE(ws.run("train --stage 1 --out " + ws.out("st1")) == 0);
  // One stage-1 run never touches the pathfinder, whose classifier starts at zero.
  REQUIRE(ws.run("route-map --init " + ws.out("st1/final.prst") + " --out " + ws.out("rm")) == 0);
  std::istringstream csv(slurp(ws.dir / "rm" / "regions.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() >= 7);
    CHECK(f[5] == "0");
    CHECK(f[6] == "0");
    ++rows;
  }
  CHECK(rows == 4);
  const auto map = pathroute::image::read_pnm(ws.dir / "rm" / "route_map.ppm");
  CHECK(map.at(0, 10, 10) == 0.0f);
  CHECK(map.at(1, 10, 10) == doctest::Approx(200.0f / 255.0f));
}

TEST_CASE("evaluating the untrained model reports the input quality") {
  Workspace ws;
  pathroute::model::ModelConfig mc;
  mc.blocks = 2;
  mc.features = 4;
  mc.hidden = 4;
  mc.pathfinder_width = 2;
  pathroute::model::RoutedNet fresh(mc, 3);
  pathroute::checkpoint::save(ws.dir / "fresh.prst", fresh, {});
  REQUIRE(ws.run("eval --init " + ws.out("fresh.prst") + " --out " + ws.out("ev")) == 0);
  std::istringstream csv(slurp(ws.dir / "ev" / "report.csv"));
  std::string line, last;
  while (std::getline(csv, line)) last = line;
  std::vector<std::string> f;
  std::stringstream ss(last);
  for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
  REQUIRE(f.size() == 6);
  CHECK(f[0] == "summary");
  // The end convolution starts at zero, so the output is the input.
  CHECK(std::stod(f[1]) == doctest::Approx(std::stod(f[2])).epsilon(1e-9));
  const auto min = pathroute::model::min_route_flops(mc).total();
  CHECK(std::stod(f[4]) == doctest::Approx(static_cast<double>(min)));
}

}  // TEST_SUITE
