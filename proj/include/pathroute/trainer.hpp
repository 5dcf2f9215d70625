// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pathroute/dataset.hpp"
#include "pathroute/keyvalue.hpp"
#include "pathroute/model.hpp"
#include "pathroute/reward.hpp"

namespace pathroute::trainer {

struct TrainConfig {
  double alpha = 0.1;         // intermediate-loss weight
  double lr0 = 2e-4;
  int iters_stage1 = 20000;
  int iters_stage2 = 20000;
  int batch = 4;              // K
  reward::RewardConfig reward;
  std::uint64_t seed = 1;
  // Multipliers on the scheduled rate; 0 freezes that part of the model.
  double cnn_lr_scale = 1.0;
  double pathfinder_lr_scale = 1.0;
  int log_interval = 100;
  int checkpoint_interval = 1000;  // multiple of log_interval

  void validate() const;
  kv::KeyValues keys() const;
};

/// lr0 * 2^-min(3, floor(4 iter / stage_len)).
double lr_schedule(int iter, const TrainConfig& cfg, int stage_len);

/// Scalar form: final + alpha * sum(intermediates).
double stage1_loss(double final_mse, std::span<const double> intermediate_mses, double alpha);

/// mse(restored, y) + alpha * sum_i mse(decode(x_i), y), recorded on `tape`.
nn::Var stage1_loss(nn::Tape& tape, model::RoutedNet& model, nn::Var patch, nn::Var restored, nn::Var y,
                    std::span<const nn::Var> block_inputs, double alpha);

struct TrainState {
  std::unique_ptr<model::RoutedNet> model;
  int stage = 1;
  long iteration = 0;  // next iteration to run
  Rng rng;
};

TrainState make_state(const model::ModelConfig& mcfg, std::uint64_t seed);

struct Pair {
  nn::Tensor x;  // degraded
  nn::Tensor y;  // clean
};

std::vector<Pair> to_pairs(std::span<const dataset::Sample> samples);

struct StepStats {
  double loss = 0.0;         // mean CNN loss over the batch
  double mean_reward = 0.0;  // mean total reward (stage 2)
  double mean_flops = 0.0;   // mean route FLOPs over the batch
};

/// Uniformly random routes, the intermediate-decoding loss above, one Adam step
/// on the CNN parameters. The pathfinder is not touched.
StepStats stage1_step(TrainState& state, std::span<const Pair> batch, const TrainConfig& cfg, double lr);

/// One sampled episode on a dedicated policy tape.
struct Trajectory {
  std::unique_ptr<nn::Tape> policy_tape;
  std::vector<nn::Var> log_probs;  // log pi(a_i | s_i)
  model::RouteTrace trace;
  reward::TrajectoryReward reward;  // rewards, returns and baseline
};

/// Accumulates -(1/K) sum_k sum_i (R_i - b) grad log pi(a_i) into the pathfinder
/// gradients, so that a descent step on them ascends the policy objective.
/// Consumes each trajectory's policy tape.
void reinforce_update(std::span<Trajectory> batch, model::RoutedNet& model);

/// Delta-theta of the estimator for `batch`, flattened in pathfinder_parameters()
/// order. Pathfinder gradients are left zeroed.
std::vector<double> policy_gradient(std::span<Trajectory> batch, model::RoutedNet& model);

/// Rewards and baseline supplied to stage 2; the default uses the
/// difficulty-regulated reward and the all-bypass baseline.
struct RewardSource {
  std::function<reward::TrajectoryReward(const model::RouteTrace&, const nn::Tensor& x,
                                         const nn::Tensor& restored, const nn::Tensor& y)>
      reward;
  std::function<double(const nn::Tensor& x, const nn::Tensor& y)> baseline;
};

RewardSource default_reward_source(model::RoutedNet& model, const reward::RewardConfig& cfg);

struct Rollout {
  Trajectory trajectory;
  nn::Var restored;  // on the main tape passed to rollout()
};

/// Samples one route from the live policy for `pair`, recording the network on
/// `tape` and the policy on the trajectory's own tape, then attaches rewards
/// and the baseline from `source`.
Rollout rollout(model::RoutedNet& model, nn::Tape& tape, const Pair& pair, Rng& rng, const RewardSource& source);

/// Samples routes from the live policy, updates the pathfinder by REINFORCE
/// and the CNN by mse(restored, y) on the same trajectories.
StepStats stage2_step(TrainState& state, std::span<const Pair> batch, const TrainConfig& cfg, double lr,
                      const RewardSource* source = nullptr);

struct TrainRun {
  std::filesystem::path out_dir;  // metrics.csv and checkpoints land here
  std::vector<Pair> holdout;      // mini set for the psnr column
  kv::KeyValues echo;             // extra keys stored in checkpoints
  std::function<void(long iter, const StepStats&)> on_log;  // optional progress hook
};

/// Runs state.stage from state.iteration to the end of the stage. Samples for
/// iteration t are indices [t*K, (t+1)*K) of `source`, so a resumed run sees
/// the same data. Checkpoints go to <out>/checkpoint.prst (rolling) and
/// <out>/final.prst.
void train(TrainState& state, const TrainConfig& cfg, const dataset::SampleSource& source, const TrainRun& run);

void save_state(const std::filesystem::path& path, TrainState& state, const TrainConfig& cfg,
                const kv::KeyValues& echo = {});

/// Restores model, stage, iteration and rng from a checkpoint written by save_state.
TrainState load_state(const std::filesystem::path& path);

/// Mean PSNR of `pairs` restored along greedy routes (or `forced` when set).
double holdout_psnr(model::RoutedNet& model, std::span<const Pair> pairs,
                    const std::optional<std::vector<int>>& forced = std::nullopt);

}  // namespace pathroute::trainer
