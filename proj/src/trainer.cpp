// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "pathroute/checkpoint.hpp"
#include "pathroute/error.hpp"
#include "pathroute/image.hpp"
#include "pathroute/metrics.hpp"
#include "pathroute/optim.hpp"

namespace pathroute::trainer {

using nn::Tape;
using nn::Tensor;
using nn::Var;

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (batch < 1) fail("batch must be >= 1");
  if (!(lr0 > 0.0)) fail("lr0 must be > 0");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (iters_stage1 < 1 || iters_stage2 < 1) fail("iteration counts must be >= 1");
  if (cnn_lr_scale < 0.0 || pathfinder_lr_scale < 0.0) fail("lr scales must be >= 0");
  if (log_interval < 1) fail("log_interval must be >= 1");
  if (checkpoint_interval < 1 || checkpoint_interval % log_interval != 0) {
    fail("checkpoint_interval must be a positive multiple of log_interval");
  }
  reward.validate();
}

kv::KeyValues TrainConfig::keys() const {
  return {
      {"alpha", kv::from_double(alpha)},
      {"lr0", kv::from_double(lr0)},
      {"iters_stage1", std::to_string(iters_stage1)},
      {"iters_stage2", std::to_string(iters_stage2)},
      {"batch", std::to_string(batch)},
      {"penalty", kv::from_double(reward.penalty)},
      {"threshold", kv::from_double(reward.threshold)},
      {"regulated", reward.regulated ? "true" : "false"},
      {"seed", std::to_string(seed)},
      {"cnn_lr_scale", kv::from_double(cnn_lr_scale)},
      {"pathfinder_lr_scale", kv::from_double(pathfinder_lr_scale)},
      {"log_interval", std::to_string(log_interval)},
      {"checkpoint_interval", std::to_string(checkpoint_interval)},
  };
}

double lr_schedule(int iter, const TrainConfig& cfg, int stage_len) {
  if (stage_len < 1 || iter < 0 || iter >= stage_len) {
    throw UsageError("lr_schedule: iteration " + std::to_string(iter) + " outside [0, " +
                     std::to_string(stage_len) + ")");
  }
  const long long quarter = (4LL * iter) / stage_len;
  const int halvings = static_cast<int>(std::min<long long>(3, quarter));
  return std::ldexp(cfg.lr0, -halvings);
}

double stage1_loss(double final_mse, std::span<const double> intermediate_mses, double alpha) {
  double sum = 0.0;
  for (double m : intermediate_mses) sum += m;
  return final_mse + alpha * sum;
}

Var stage1_loss(Tape& tape, model::RoutedNet& model, Var patch, Var restored, Var y,
                std::span<const Var> block_inputs, double alpha) {
  if (static_cast<int>(block_inputs.size()) != model.config().blocks) {
    throw UsageError("stage1_loss: expected " + std::to_string(model.config().blocks) + " intermediates, got " +
                     std::to_string(block_inputs.size()));
  }
  Var loss = nn::mse(tape, restored, y);
  if (alpha == 0.0) return loss;
  Var inter;
  for (Var xi : block_inputs) {
    Var term = nn::mse(tape, model::decode(tape, model, patch, xi), y);
    inter = inter.valid() ? nn::add(tape, inter, term) : term;
  }
  return nn::add(tape, loss, nn::scale(tape, inter, static_cast<float>(alpha)));
}

TrainState make_state(const model::ModelConfig& mcfg, std::uint64_t seed) {
  TrainState s;
  s.model = std::make_unique<model::RoutedNet>(mcfg, derive_seed(seed, 0));
  s.rng = Rng(derive_seed(seed, 1));
  return s;
}

std::vector<Pair> to_pairs(std::span<const dataset::Sample> samples) {
  std::vector<Pair> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({image::to_tensor(s.degraded), image::to_tensor(s.clean)});
  return out;
}

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " during training");
}

void apply_adam(std::span<nn::Parameter* const> params, double lr) {
  if (lr == 0.0) return;
  nn::adam_update(params, static_cast<float>(lr));
}

// Drops rows logged after `iteration`, left behind by an interrupted run.
void truncate_log(const std::filesystem::path& path, long iteration) {
  std::ifstream in(path);
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (!header) {
      const long iter = std::stol(line.substr(0, line.find(',')));
      if (iter > iteration) continue;
    }
    header = false;
    kept += line + '\n';
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << kept;
  if (!out) throw IoError("cannot rewrite metrics log '" + path.string() + "'");
}

}  // namespace

StepStats stage1_step(TrainState& state, std::span<const Pair> batch, const TrainConfig& cfg, double lr) {
  if (batch.empty()) throw UsageError("stage1_step: empty batch");
  model::RoutedNet& m = *state.model;
  const auto& mc = m.config();
  auto cnn = m.cnn_parameters();
  nn::zero_grad(cnn);
  StepStats stats;
  const float inv_k = 1.0f / static_cast<float>(batch.size());
  for (const Pair& p : batch) {
    std::vector<int> route(static_cast<std::size_t>(mc.blocks));
    for (int& a : route) a = uniform_int(state.rng, 0, mc.paths - 1);
    Tape tape;
    const Var x = tape.constant(p.x);
    const Var y = tape.constant(p.y);
    auto fwd = model::model_forward_forced(m, tape, x, route);
    const Var loss = stage1_loss(tape, m, x, fwd.restored, y, fwd.block_inputs, cfg.alpha);
    const double lv = tape.value(loss).item();
    check_finite(lv, "stage-1 loss");
    stats.loss += lv * inv_k;
    stats.mean_flops += static_cast<double>(model::count_flops(route, mc).total()) * inv_k;
    tape.backward(nn::scale(tape, loss, inv_k));
  }
  apply_adam(cnn, lr * cfg.cnn_lr_scale);
  return stats;
}

void reinforce_update(std::span<Trajectory> batch, model::RoutedNet& model) {
  if (batch.empty()) return;
  const float inv_k = 1.0f / static_cast<float>(batch.size());
  (void)model;
  for (Trajectory& t : batch) {
    const auto& r = t.reward;
    if (r.returns.size() != t.log_probs.size() || t.trace.size() != t.log_probs.size()) {
      throw UsageError("reinforce_update: trajectory of length " + std::to_string(t.log_probs.size()) +
                       " has " + std::to_string(r.returns.size()) + " returns");
    }
    if (!t.policy_tape) throw UsageError("reinforce_update: trajectory without a policy tape");
    Tape& tape = *t.policy_tape;
    Var objective;
    for (std::size_t i = 0; i < t.log_probs.size(); ++i) {
      const double adv = r.returns[i] - r.baseline;
      const Var term = nn::scale(tape, t.log_probs[i], static_cast<float>(-adv) * inv_k);
      objective = objective.valid() ? nn::add(tape, objective, term) : term;
    }
    tape.backward(objective);
  }
}

std::vector<double> policy_gradient(std::span<Trajectory> batch, model::RoutedNet& model) {
  auto params = model.pathfinder_parameters();
  nn::zero_grad(params);
  reinforce_update(batch, model);
  std::vector<double> out;
  for (nn::Parameter* p : params) {
    for (float g : p->grad.data()) out.push_back(-static_cast<double>(g));
  }
  nn::zero_grad(params);
  return out;
}

RewardSource default_reward_source(model::RoutedNet& model, const reward::RewardConfig& cfg) {
  RewardSource src;
  src.reward = [cfg](const model::RouteTrace& trace, const Tensor& x, const Tensor& restored, const Tensor& y) {
    return reward::trajectory_rewards(trace.actions, x, restored, y, cfg);
  };
  src.baseline = [&model, cfg](const Tensor& x, const Tensor& y) { return reward::baseline(x, y, model, cfg); };
  return src;
}

Rollout rollout(model::RoutedNet& model, Tape& tape, const Pair& pair, Rng& rng, const RewardSource& source) {
  // The baseline uses the parameters of this step, before any update.
  const double b = source.baseline(pair.x, pair.y);
  Rollout out;
  Trajectory& t = out.trajectory;
  t.policy_tape = std::make_unique<Tape>();
  const Var x = tape.constant(pair.x);
  auto fwd = model::model_forward(model, tape, x, model::RouteMode::Sample, &rng, t.policy_tape.get());
  out.restored = fwd.restored;
  t.trace = std::move(fwd.trace);
  t.log_probs = std::move(fwd.chosen_log_probs);
  t.reward = source.reward(t.trace, pair.x, tape.value(fwd.restored), pair.y);
  t.reward.baseline = b;
  return out;
}

StepStats stage2_step(TrainState& state, std::span<const Pair> batch, const TrainConfig& cfg, double lr,
                      const RewardSource* source) {
  if (batch.empty()) throw UsageError("stage2_step: empty batch");
  model::RoutedNet& m = *state.model;
  RewardSource fallback;
  if (source == nullptr) {
    fallback = default_reward_source(m, cfg.reward);
    source = &fallback;
  }
  auto cnn = m.cnn_parameters();
  auto pf = m.pathfinder_parameters();
  nn::zero_grad(cnn);
  nn::zero_grad(pf);
  StepStats stats;
  const float inv_k = 1.0f / static_cast<float>(batch.size());
  std::vector<Trajectory> trajectories;
  trajectories.reserve(batch.size());
  for (const Pair& p : batch) {
    Tape tape;
    Rollout r = rollout(m, tape, p, state.rng, *source);
    const Var loss = nn::mse(tape, r.restored, tape.constant(p.y));
    const double lv = tape.value(loss).item();
    check_finite(lv, "stage-2 loss");
    const Trajectory& t = r.trajectory;
    const double total = t.reward.returns.empty() ? 0.0 : t.reward.returns.front();
    check_finite(total, "reward");
    stats.loss += lv * inv_k;
    stats.mean_reward += total * inv_k;
    stats.mean_flops += static_cast<double>(model::count_flops(t.trace.actions, m.config()).total()) * inv_k;
    if (cfg.cnn_lr_scale != 0.0) tape.backward(nn::scale(tape, loss, inv_k));
    trajectories.push_back(std::move(r.trajectory));
  }
  reinforce_update(trajectories, m);
  apply_adam(cnn, lr * cfg.cnn_lr_scale);
  apply_adam(pf, lr * cfg.pathfinder_lr_scale);
  return stats;
}

double holdout_psnr(model::RoutedNet& model, std::span<const Pair> pairs,
                    const std::optional<std::vector<int>>& forced) {
  if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const Pair& p : pairs) {
    Tensor r = forced ? model::restore_forced(model, p.x, *forced)
                      : model::restore(model, p.x, model::RouteMode::Greedy, nullptr).restored;
    image::Image out = image::from_tensor(r);
    image::clamp01(out);
    total += metrics::psnr(out, image::from_tensor(p.y));
  }
  return total / static_cast<double>(pairs.size());
}

void save_state(const std::filesystem::path& path, TrainState& state, const TrainConfig& cfg,
                const kv::KeyValues& echo) {
  kv::KeyValues meta = echo;
  for (auto& [k, v] : checkpoint::model_config_keys(state.model->config())) meta[k] = v;
  for (auto& [k, v] : cfg.keys()) meta[k] = v;
  meta["stage"] = std::to_string(state.stage);
  meta["iteration"] = std::to_string(state.iteration);
  meta["rng_state"] = serialize_rng(state.rng);
  checkpoint::save(path, *state.model, meta);
}

TrainState load_state(const std::filesystem::path& path) {
  checkpoint::Checkpoint ckpt;
  TrainState s;
  s.model = checkpoint::load_model(path, &ckpt);
  auto get = [&](const char* key) -> const std::string* {
    auto it = ckpt.meta.find(key);
    return it == ckpt.meta.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("stage")) s.stage = kv::to_int("stage", *v);
  if (const auto* v = get("iteration")) s.iteration = kv::to_int64("iteration", *v);
  if (const auto* v = get("rng_state")) s.rng = deserialize_rng(*v);
  return s;
}

void train(TrainState& state, const TrainConfig& cfg, const dataset::SampleSource& source, const TrainRun& run) {
  cfg.validate();
  if (state.stage != 1 && state.stage != 2) throw UsageError("train: stage must be 1 or 2");
  const int stage_len = state.stage == 1 ? cfg.iters_stage1 : cfg.iters_stage2;
  std::filesystem::create_directories(run.out_dir);
  const auto metrics_path = run.out_dir / "metrics.csv";
  const bool fresh = state.iteration == 0 || !std::filesystem::exists(metrics_path);
  if (!fresh) truncate_log(metrics_path, state.iteration);
  std::ofstream log(metrics_path, fresh ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot open metrics log '" + metrics_path.string() + "'");
  if (fresh) log << "iter,stage,loss,mean_reward,mean_flops,psnr\n";
  log.precision(10);

  std::optional<std::vector<int>> holdout_route;
  if (state.stage == 1) holdout_route = std::vector<int>(static_cast<std::size_t>(state.model->config().blocks),
                                                         state.model->config().paths - 1);
  const auto K = static_cast<std::size_t>(cfg.batch);
  StepStats acc;
  int acc_n = 0;
  while (state.iteration < stage_len) {
    const long t = state.iteration;
    std::vector<dataset::Sample> samples;
    samples.reserve(K);
    for (std::size_t k = 0; k < K; ++k) samples.push_back(source.sample(static_cast<std::size_t>(t) * K + k));
    const auto batch = to_pairs(samples);
    const double lr = lr_schedule(static_cast<int>(t), cfg, stage_len);
    const StepStats s =
        state.stage == 1 ? stage1_step(state, batch, cfg, lr) : stage2_step(state, batch, cfg, lr);
    acc.loss += s.loss;
    acc.mean_reward += s.mean_reward;
    acc.mean_flops += s.mean_flops;
    ++acc_n;
    state.iteration = t + 1;
    if (state.iteration % cfg.log_interval == 0 || state.iteration == stage_len) {
      StepStats mean{acc.loss / acc_n, acc.mean_reward / acc_n, acc.mean_flops / acc_n};
      const double psnr = holdout_psnr(*state.model, run.holdout, holdout_route);
      log << state.iteration << ',' << state.stage << ',' << mean.loss << ',';
      if (state.stage == 1) log << "nan"; else log << mean.mean_reward;
      log << ',' << mean.mean_flops << ',' << psnr << '\n';
      log.flush();
      if (!log) throw IoError("write failed for metrics log '" + metrics_path.string() + "'");
      if (run.on_log) run.on_log(state.iteration, mean);
      acc = {};
      acc_n = 0;
    }
    if (state.iteration % cfg.checkpoint_interval == 0 && state.iteration < stage_len) {
      save_state(run.out_dir / "checkpoint.prst", state, cfg, run.echo);
    }
  }
  save_state(run.out_dir / "final.prst", state, cfg, run.echo);
}

}  // namespace pathroute::trainer
