// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pathroute/checkpoint.hpp"
#include "pathroute/error.hpp"
#include "pathroute/optim.hpp"
#include "pathroute/trainer.hpp"
#include "support/policy_check.hpp"

using namespace pathroute;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

model::ModelConfig small_config() {
  model::ModelConfig c;
  c.blocks = 2;
  c.paths = 2;
  c.features = 4;
  c.hidden = 4;
  c.pathfinder_width = 2;
  c.patch = 15;
  return c;
}

dataset::SampleSource small_source(std::uint64_t seed) {
  dataset::SynthesisSpec spec;
  spec.patch = 15;
  return dataset::SampleSource(dataset::procedural_set(2, 40, 40, 1, seed), spec, seed + 1);
}

std::vector<trainer::Pair> small_batch(const dataset::SampleSource& src, std::size_t first, std::size_t k) {
  std::vector<dataset::Sample> s;
  for (std::size_t i = 0; i < k; ++i) s.push_back(src.sample(first + i));
  return trainer::to_pairs(s);
}

std::vector<std::vector<float>> snapshot(std::span<nn::Parameter* const> params) {
  std::vector<std::vector<float>> out;
  for (auto* p : params) out.emplace_back(p->value.data().begin(), p->value.data().end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("pathroute_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

trainer::TrainConfig small_train() {
  trainer::TrainConfig c;
  c.batch = 2;
  c.iters_stage1 = 8;
  c.iters_stage2 = 8;
  c.log_interval = 2;
  c.checkpoint_interval = 4;
  c.lr0 = 1e-3;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("learning rate halves every quarter") {
  trainer::TrainConfig cfg;
  CHECK(trainer::lr_schedule(0, cfg, 20000) == 2e-4);
  CHECK(trainer::lr_schedule(10000, cfg, 20000) == 5e-5);
  CHECK(trainer::lr_schedule(19999, cfg, 20000) == 2.5e-5);
  CHECK(trainer::lr_schedule(4999, cfg, 20000) == 2e-4);
  CHECK(trainer::lr_schedule(5000, cfg, 20000) == 1e-4);
  CHECK_THROWS_AS(trainer::lr_schedule(20000, cfg, 20000), UsageError);
  CHECK_THROWS_AS(trainer::lr_schedule(-1, cfg, 20000), UsageError);
}

TEST_CASE("stage-1 loss combines final and intermediate terms") {
  const double inter[] = {0.02, 0.03};
  CHECK(trainer::stage1_loss(0.01, inter, 0.1) == doctest::Approx(0.015).epsilon(1e-12));
  CHECK(trainer::stage1_loss(0.01, inter, 0.0) == 0.01);
  const double zeros[] = {0.0, 0.0};
  CHECK(trainer::stage1_loss(0.0, zeros, 0.1) == 0.0);
}

TEST_CASE("stage-1 tape loss matches the scalar form") {
  auto m = trainer::make_state(small_config(), 3);
  const auto src = small_source(5);
  const auto pair = small_batch(src, 0, 1)[0];
  nn::Tape tape;
  const auto x = tape.constant(pair.x);
  const auto y = tape.constant(pair.y);
  const int route[] = {1, 0};
  auto fwd = model::model_forward_forced(*m.model, tape, x, route);
  const double got =
      tape.value(trainer::stage1_loss(tape, *m.model, x, fwd.restored, y, fwd.block_inputs, 0.1)).item();
  std::vector<double> inter;
  for (auto xi : fwd.block_inputs) {
    inter.push_back(tape.value(nn::mse(tape, model::decode(tape, *m.model, x, xi), y)).item());
  }
  const double final_mse = tape.value(nn::mse(tape, fwd.restored, y)).item();
  CHECK(got == doctest::Approx(trainer::stage1_loss(final_mse, inter, 0.1)).epsilon(1e-6));
  CHECK_THROWS_AS(trainer::stage1_loss(tape, *m.model, x, fwd.restored, y,
                                       std::span<const nn::Var>(fwd.block_inputs).first(1), 0.1),
                  UsageError);
}

TEST_CASE("stage 1 leaves the pathfinder untouched and is deterministic") {
  const auto src = small_source(7);
  const auto batch = small_batch(src, 0, 2);
  const auto cfg = small_train();
  auto a = trainer::make_state(small_config(), 11);
  auto b = trainer::make_state(small_config(), 11);
  const auto pf_before = snapshot(a.model->pathfinder_parameters());
  const auto cnn_before = snapshot(a.model->cnn_parameters());
  for (int i = 0; i < 3; ++i) {
    const auto sa = trainer::stage1_step(a, batch, cfg, 1e-3);
    const auto sb = trainer::stage1_step(b, batch, cfg, 1e-3);
    CHECK(sa.loss == sb.loss);
  }
  CHECK(snapshot(a.model->pathfinder_parameters()) == pf_before);
  CHECK(snapshot(a.model->cnn_parameters()) != cnn_before);
  CHECK(snapshot(a.model->cnn_parameters()) == snapshot(b.model->cnn_parameters()));
}

TEST_CASE("500 stage-1 steps on one pair lower its loss") {
  model::ModelConfig mc;
  mc.features = 16;
  dataset::SynthesisSpec spec;
  const dataset::SampleSource src(dataset::procedural_set(1, 96, 96, 1, 21), spec, 22);
  std::vector<dataset::Sample> one{src.sample(3)};
  const auto batch = trainer::to_pairs(one);
  auto state = trainer::make_state(mc, 23);
  trainer::TrainConfig cfg;
  cfg.batch = 1;
  const double first = trainer::stage1_step(state, batch, cfg, cfg.lr0).loss;
  double last = first;
  for (int i = 1; i < 500; ++i) last = trainer::stage1_step(state, batch, cfg, cfg.lr0).loss;
  MESSAGE("loss " << first << " -> " << last);
  CHECK(last < first);
}

TEST_CASE("centred advantages give a zero update") {
  auto m = trainer::make_state(testing::tiny_policy_config(2), 5);
  Rng rng(9);
  testing::randomize_pathfinder(*m.model, rng);
  trainer::RewardSource src;
  src.reward = [](const model::RouteTrace& t, const Tensor&, const Tensor&, const Tensor&) {
    reward::TrajectoryReward r;
    r.rewards.assign(t.size(), 0.0);
    r.rewards.back() = 0.25;
    r.returns = reward::suffix_returns(r.rewards);
    return r;
  };
  src.baseline = [](const Tensor&, const Tensor&) { return 0.25; };
  const Tensor x({1, 1, 15, 15}, 0.5f);
  std::vector<trainer::Trajectory> batch;
  std::vector<nn::Tape> tapes(3);
  for (auto& tape : tapes) batch.push_back(trainer::rollout(*m.model, tape, {x, x}, rng, src).trajectory);
  for (double g : trainer::policy_gradient(batch, *m.model)) CHECK(g == 0.0);
}

TEST_CASE("reinforce_update rejects mismatched rewards") {
  auto m = trainer::make_state(testing::tiny_policy_config(2), 5);
  Rng rng(1);
  auto src = testing::TwoStepRewards{}.source();
  Tensor x({1, 1, 15, 15});
  nn::Tape tape;
  std::vector<trainer::Trajectory> batch;
  batch.push_back(trainer::rollout(*m.model, tape, {x, x}, rng, src).trajectory);
  batch[0].reward.returns.pop_back();
  CHECK_THROWS_AS(trainer::reinforce_update(batch, *m.model), UsageError);
}

TEST_CASE("reinforce_update leaves the network weights alone") {
  auto m = trainer::make_state(testing::tiny_policy_config(2), 5);
  Rng rng(2);
  auto src = testing::TwoStepRewards{}.source();
  const Tensor x({1, 1, 15, 15}, 0.3f);
  auto cnn = m.model->cnn_parameters();
  nn::zero_grad(cnn);
  nn::Tape tape;
  std::vector<trainer::Trajectory> batch;
  batch.push_back(trainer::rollout(*m.model, tape, {x, x}, rng, src).trajectory);
  trainer::reinforce_update(batch, *m.model);
  for (auto* p : cnn) {
    for (float g : p->grad.data()) CHECK(g == 0.0f);
  }
}

TEST_CASE("a deterministic policy gives a finite estimate equal to advantage times score") {
  auto m = trainer::make_state(testing::tiny_policy_config(1), 8);
  m.model->pathfinder.fc2_bias.value.data()[1] = 60.0f;
  trainer::RewardSource src;
  src.reward = [](const model::RouteTrace& t, const Tensor&, const Tensor&, const Tensor&) {
    reward::TrajectoryReward r;
    r.rewards = {t.actions[0] == 1 ? 0.5 : 0.0};
    r.returns = r.rewards;
    return r;
  };
  src.baseline = [](const Tensor&, const Tensor&) { return 0.2; };
  const Tensor x({1, 1, 15, 15}, 0.4f);
  Rng rng(3);
  nn::Tape tape;
  std::vector<trainer::Trajectory> batch;
  batch.push_back(trainer::rollout(*m.model, tape, {x, x}, rng, src).trajectory);
  REQUIRE(batch[0].trace.actions[0] == 1);
  const auto est = trainer::policy_gradient(batch, *m.model);

  // Score of action 1 on a fresh tape.
  nn::Tape pt;
  nn::Tape main;
  auto fwd = model::model_forward_forced(*m.model, main, main.constant(x), std::vector<int>{1});
  auto out = model::pathfinder_policy(*m.model, pt, main.value(fwd.block_inputs[0]),
                                      model::initial_pathfinder_state(pt, m.model->config()));
  auto params = m.model->pathfinder_parameters();
  nn::zero_grad(params);
  pt.backward(nn::pick(pt, out.log_probs, 0, 1));
  std::size_t i = 0;
  for (auto* p : params) {
    for (float g : p->grad.data()) {
      REQUIRE(std::isfinite(est[i]));
      CHECK(est[i] == doctest::Approx(0.3 * g).epsilon(1e-5).scale(1e-12));
      ++i;
    }
  }
  nn::zero_grad(params);
}

TEST_CASE("enumerated policy gradient agrees with finite differences") {
  auto m = trainer::make_state(testing::tiny_policy_config(2), 12);
  Rng rng(13);
  testing::randomize_pathfinder(*m.model, rng);
  Tensor x({1, 1, 15, 15});
  for (float& v : x.data()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  const testing::TwoStepRewards r;
  const auto exact = testing::exact_policy_gradient(*m.model, x, r);
  std::vector<double> fd;
  const float eps = 1e-2f;
  for (auto* p : m.model->pathfinder_parameters()) {
    for (float& v : p->value.data()) {
      const float keep = v;
      v = keep + eps;
      const double up = testing::expected_return(*m.model, x, r);
      v = keep - eps;
      const double down = testing::expected_return(*m.model, x, r);
      v = keep;
      fd.push_back((up - down) / (2.0 * eps));
    }
  }
  REQUIRE(fd.size() == exact.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num = std::max(num, std::abs(fd[i] - exact[i]));
    den = std::max(den, std::abs(exact[i]));
  }
  REQUIRE(den > 0.0);
  CHECK(num / den < 1e-2);
}

TEST_CASE("sampled estimates centre on the enumerated gradient") {
  auto m = trainer::make_state(testing::tiny_policy_config(2), 12);
  Rng rng(13);
  testing::randomize_pathfinder(*m.model, rng);
  Tensor x({1, 1, 15, 15});
  for (float& v : x.data()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  const testing::TwoStepRewards r;
  const auto exact = testing::exact_policy_gradient(*m.model, x, r);
  Rng sample_rng(14);
  const auto st = testing::sample_policy_gradient(*m.model, x, r.source(), 4000, sample_rng);
  for (std::size_t i = 0; i < exact.size(); ++i) {
    CHECK(std::abs(st.mean[i] - exact[i]) <= 4.0 * st.std_error[i] + 1e-9);
  }
}

TEST_CASE("a constant reward shift with a recomputed baseline leaves the estimate unchanged") {
  auto m = trainer::make_state(testing::tiny_policy_config(1), 30);
  Rng init(31);
  testing::randomize_pathfinder(*m.model, init);
  const Tensor x({1, 1, 15, 15}, 0.6f);
  auto make_source = [](double shift) {
    trainer::RewardSource src;
    src.reward = [shift](const model::RouteTrace& t, const Tensor&, const Tensor&, const Tensor&) {
      reward::TrajectoryReward r;
      r.rewards = {(t.actions[0] == 1 ? 0.5 : 0.0) + shift};
      r.returns = r.rewards;
      return r;
    };
    // The all-bypass route earns the bypass reward, shifted the same way.
    src.baseline = [shift](const Tensor&, const Tensor&) { return shift; };
    return src;
  };
  Rng ra(40), rb(40);
  const auto a = testing::sample_policy_gradient(*m.model, x, make_source(0.0), 200, ra);
  const auto b = testing::sample_policy_gradient(*m.model, x, make_source(3.0), 200, rb);
  for (std::size_t i = 0; i < a.mean.size(); ++i) {
    CHECK(b.mean[i] == doctest::Approx(a.mean[i]).epsilon(1e-5).scale(1e-9));
  }
}

TEST_CASE("bandit policy moves towards the better path") {
  const auto curve = testing::run_bandit(60, 2, 0.01, 4, 77);
  CHECK(curve.mean_prob.front() == doctest::Approx(0.5).epsilon(1e-6));
  for (std::size_t i = 1; i < curve.mean_prob.size(); ++i) CHECK(curve.mean_prob[i] > curve.mean_prob[i - 1]);
}

TEST_CASE("stage-2 learning-rate ablations freeze their half of the model") {
  const auto src = small_source(50);
  const auto batch = small_batch(src, 0, 2);
  auto cfg = small_train();

  SUBCASE("pathfinder frozen") {
    cfg.pathfinder_lr_scale = 0.0;
    auto s = trainer::make_state(small_config(), 51);
    const auto pf = snapshot(s.model->pathfinder_parameters());
    const auto cnn = snapshot(s.model->cnn_parameters());
    trainer::stage2_step(s, batch, cfg, 1e-3);
    CHECK(snapshot(s.model->pathfinder_parameters()) == pf);
    CHECK(snapshot(s.model->cnn_parameters()) != cnn);
  }
  SUBCASE("network frozen") {
    cfg.cnn_lr_scale = 0.0;
    auto s = trainer::make_state(small_config(), 51);
    const auto pf = snapshot(s.model->pathfinder_parameters());
    const auto cnn = snapshot(s.model->cnn_parameters());
    trainer::stage2_step(s, batch, cfg, 1e-3);
    CHECK(snapshot(s.model->cnn_parameters()) == cnn);
    CHECK(snapshot(s.model->pathfinder_parameters()) != pf);
  }
}

TEST_CASE("stage 2 computes one baseline per image per step") {
  const auto src = small_source(60);
  const auto batch = small_batch(src, 0, 3);
  auto s = trainer::make_state(small_config(), 61);
  auto rs = trainer::default_reward_source(*s.model, small_train().reward);
  int calls = 0;
  auto inner = rs.baseline;
  rs.baseline = [&](const Tensor& x, const Tensor& y) {
    ++calls;
    return inner(x, y);
  };
  trainer::stage2_step(s, batch, small_train(), 1e-3, &rs);
  trainer::stage2_step(s, batch, small_train(), 1e-3, &rs);
  CHECK(calls == 6);
}

TEST_CASE("non-finite losses abort the step") {
  const auto src = small_source(70);
  auto batch = small_batch(src, 0, 1);
  batch[0].y.data()[0] = std::numeric_limits<float>::quiet_NaN();
  auto s = trainer::make_state(small_config(), 71);
  CHECK_THROWS_AS(trainer::stage1_step(s, batch, small_train(), 1e-3), NumericError);
  CHECK_THROWS_AS(trainer::stage2_step(s, batch, small_train(), 1e-3), NumericError);
}

TEST_CASE("checkpoint round trip continues bit-identically") {
  TempDir dir("trainer_ckpt");
  const auto src = small_source(80);
  const auto cfg = small_train();
  auto a = trainer::make_state(small_config(), 81);
  for (int i = 0; i < 2; ++i) trainer::stage1_step(a, small_batch(src, 2 * i, 2), cfg, 1e-3);
  a.iteration = 2;
  trainer::save_state(dir.path / "mid.prst", a, cfg);
  auto b = trainer::load_state(dir.path / "mid.prst");
  CHECK(b.iteration == 2);
  CHECK(b.stage == 1);
  for (int i = 2; i < 5; ++i) {
    const auto sa = trainer::stage1_step(a, small_batch(src, 2 * i, 2), cfg, 1e-3);
    const auto sb = trainer::stage1_step(b, small_batch(src, 2 * i, 2), cfg, 1e-3);
    CHECK(sa.loss == sb.loss);
  }
  a.stage = b.stage = 2;
  for (int i = 5; i < 8; ++i) {
    const auto sa = trainer::stage2_step(a, small_batch(src, 2 * i, 2), cfg, 1e-3);
    const auto sb = trainer::stage2_step(b, small_batch(src, 2 * i, 2), cfg, 1e-3);
    CHECK(sa.loss == sb.loss);
    CHECK(sa.mean_reward == sb.mean_reward);
  }
  CHECK(snapshot(a.model->parameters()) == snapshot(b.model->parameters()));
}

TEST_CASE("an interrupted run resumes to the same log and weights") {
  TempDir dir("trainer_resume");
  const auto src = small_source(90);
  const auto cfg = small_train();
  std::vector<trainer::Pair> holdout = small_batch(src, 1000, 2);

  for (int stage = 1; stage <= 2; ++stage) {
    CAPTURE(stage);
    const fs::path full = dir.path / ("full" + std::to_string(stage));
    const fs::path cut = dir.path / ("cut" + std::to_string(stage));
    auto s = trainer::make_state(small_config(), 91);
    s.stage = stage;
    trainer::train(s, cfg, src, {full, holdout, {}, nullptr});
    CHECK(s.iteration == 8);

    auto u = trainer::make_state(small_config(), 91);
    u.stage = stage;
    trainer::train(u, cfg, src, {cut, holdout, {}, nullptr});
    // Pretend the run died after the rolling checkpoint at iteration 4.
    auto r = trainer::load_state(cut / "checkpoint.prst");
    REQUIRE(r.iteration == 4);
    trainer::train(r, cfg, src, {cut, holdout, {}, nullptr});

    const auto log = slurp(full / "metrics.csv");
    CHECK(log == slurp(cut / "metrics.csv"));
    CHECK(std::count(log.begin(), log.end(), '\n') == 1 + 8 / cfg.log_interval);
    CHECK(slurp(full / "final.prst") == slurp(cut / "final.prst"));
  }
}

TEST_CASE("train rejects bad configurations") {
  TempDir dir("trainer_bad");
  const auto src = small_source(95);
  auto cfg = small_train();
  cfg.checkpoint_interval = 3;
  auto s = trainer::make_state(small_config(), 1);
  CHECK_THROWS_AS(trainer::train(s, cfg, src, {dir.path, {}, {}, nullptr}), ConfigError);
  cfg = small_train();
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_train();
  s.stage = 3;
  CHECK_THROWS_AS(trainer::train(s, cfg, src, {dir.path, {}, {}, nullptr}), UsageError);
}

}  // TEST_SUITE
