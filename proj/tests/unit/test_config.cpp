// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pathroute/checkpoint.hpp"
#include "pathroute/config.hpp"
#include "pathroute/error.hpp"
#include "pathroute/keyvalue.hpp"

using namespace pathroute;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pathroute_cfg_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("key-value text parsing") {
  const auto kv = kv::parse("# comment\n\n  blocks = 4 \nnoise=linear\n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("blocks") == "4");
  CHECK(kv.at("noise") == "linear");
  CHECK(kv::parse(kv::format(kv)) == kv);
  CHECK(error_of([] { kv::parse("a = 1\nnonsense\n"); }).find("line 2") != std::string::npos);
  CHECK_THROWS_AS(kv::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(kv::parse(" = 2\n"), ConfigError);
}

TEST_CASE("key-value conversions") {
  CHECK(kv::to_int("k", "-12") == -12);
  CHECK_THROWS_AS(kv::to_int("k", "12x"), ConfigError);
  CHECK_THROWS_AS(kv::to_int("k", ""), ConfigError);
  CHECK(kv::to_double("k", "2e-4") == 2e-4);
  CHECK(kv::to_bool("k", "yes"));
  CHECK_FALSE(kv::to_bool("k", "0"));
  CHECK_THROWS_AS(kv::to_bool("k", "maybe"), ConfigError);
  CHECK(kv::to_double_list("k", "3e-6, 5e-6,8e-6") == std::vector<double>{3e-6, 5e-6, 8e-6});
  for (double v : {0.1, 8e-6, 1.0 / 3.0, 123456.789}) CHECK(kv::to_double("k", kv::from_double(v)) == v);
}

TEST_CASE("run config round trips through its keys") {
  config::RunConfig c;
  c.model.blocks = 4;
  c.train.reward.penalty = 3e-6;
  c.sweep_penalties = {1e-6, 2e-6};
  c.test_noise = distortion::NoiseKind::Linear;
  const auto back = config::from_keys(c.keys());
  CHECK(back.keys() == c.keys());
  CHECK(back.model.blocks == 4);
  CHECK(back.train.reward.penalty == 3e-6);
  CHECK(back.test_noise == distortion::NoiseKind::Linear);
}

TEST_CASE("run config rejects bad input with a useful message") {
  CHECK(error_of([] { config::from_keys({{"blokcs", "4"}}); }).find("blokcs") != std::string::npos);
  CHECK_THROWS_AS(config::from_keys({{"blocks", "0"}}).validate(), ConfigError);
  CHECK_THROWS_AS(config::from_keys({{"batch", "0"}}).validate(), ConfigError);
  CHECK_THROWS_AS(config::from_keys({{"sigma_max", "80"}}).validate(), ConfigError);
  CHECK_THROWS_AS(config::from_keys({{"penalty", "-1"}}).validate(), ConfigError);
  CHECK_THROWS_AS(config::from_keys({{"noise", "pink"}}), ConfigError);
  CHECK_THROWS_AS(config::from_keys({{"sweep_variants", "some"}}), ConfigError);
  CHECK_THROWS_AS(config::from_keys({{"log_interval", "3"}, {"checkpoint_interval", "10"}}).validate(), ConfigError);

  const auto dir = scratch("load");
  std::ofstream(dir / "bad.cfg") << "blocks = 2\nfeatures = x\n";
  const auto msg = error_of([&] { config::load((dir / "bad.cfg").string()); });
  CHECK(msg.find("bad.cfg") != std::string::npos);
  CHECK(msg.find("features") != std::string::npos);
  CHECK_THROWS_AS(config::load((dir / "missing.cfg").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("shipped configurations load") {
  for (const char* name : {"desk.cfg", "desk_sweep.cfg"}) {
    CAPTURE(name);
    const auto c = config::load(std::string(PATHROUTE_SOURCE_DIR) + "/configs/" + name);
    CHECK(c.model.blocks == 6);
    CHECK(c.model.paths == 2);
    CHECK(c.model.features == 16);
    CHECK(c.train.iters_stage1 == 20000);
    CHECK(c.train.iters_stage2 == 20000);
  }
}

TEST_CASE("checkpoint save and read") {
  const auto dir = scratch("ckpt");
  model::ModelConfig mc;
  mc.blocks = 2;
  mc.features = 4;
  mc.hidden = 3;
  mc.pathfinder_width = 2;
  model::RoutedNet m(mc, 5);
  m.end.weight.value[0] = 0.25f;
  m.end.weight.adam_m.assign(m.end.weight.value.numel(), 0.5f);
  m.end.weight.adam_v.assign(m.end.weight.value.numel(), 0.125f);
  m.end.weight.step = 7;
  checkpoint::save(dir / "a.prst", m, {{"note", "x"}});
  auto ck = checkpoint::read(dir / "a.prst");
  CHECK(ck.meta.at("note") == "x");
  CHECK(ck.entries.size() == m.parameters().size());

  {
    checkpoint::Checkpoint out;
    auto back = checkpoint::load_model(dir / "a.prst", &out);
    CHECK(back->config().blocks == 2);
    CHECK(back->config().hidden == 3);
    auto pa = m.parameters();
    auto pb = back->parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i]->name == pb[i]->name);
      CHECK(std::memcmp(pa[i]->value.ptr(), pb[i]->value.ptr(), pa[i]->value.numel() * sizeof(float)) == 0);
      CHECK(pa[i]->step == pb[i]->step);
    }
    CHECK(back->end.weight.adam_m == m.end.weight.adam_m);
    CHECK(back->end.weight.adam_v == m.end.weight.adam_v);
  }

  SUBCASE("shape mismatch is rejected") {
    auto other = mc;
    other.features = 5;
    model::RoutedNet wrong(other, 1);
    CHECK_THROWS_AS(checkpoint::apply(ck, wrong), ConfigError);
  }
  SUBCASE("corrupt files are rejected") {
    std::ofstream(dir / "junk.prst", std::ios::binary) << "NOPE";
    CHECK_THROWS_AS(checkpoint::read(dir / "junk.prst"), IoError);
    std::ifstream in(dir / "a.prst", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    std::ofstream(dir / "cut.prst", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(checkpoint::read(dir / "cut.prst"), IoError);
    CHECK_THROWS_AS(checkpoint::read(dir / "none.prst"), IoError);
  }
  fs::remove_all(dir);
}

}  // TEST_SUITE
