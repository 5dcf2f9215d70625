// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pathroute/model.hpp"

namespace pathroute::reward {

struct RewardConfig {
  double penalty = 8e-6;     // p, charged per non-bypass block
  double threshold = 5e-4;   // L0, on mean-squared error of [0,1] pixels
  bool regulated = true;     // false forces d = 1 (non-regulated ablation)

  void validate() const;

  static RewardConfig denoising() { return {8e-6, 5e-4, true}; }
  static RewardConfig mixed() { return {4e-5, 0.01, true}; }
};

struct TrajectoryReward {
  std::vector<double> rewards;  // r_1..r_N
  std::vector<double> returns;  // R_i = sum_{j >= i} r_j
  double baseline = 0.0;        // b, filled in by the trainer

  std::size_t size() const { return rewards.size(); }
};

/// d = L_d / L0 below the threshold, 1 at or above it.
double difficulty(double output_loss, double threshold);

/// Per-block reward; `block` is 0-based, the final term applies at block == blocks - 1.
/// action 0 is the bypass and carries no penalty.
double step_reward(int block, int blocks, int action, double penalty, double d, double delta_l2);

/// mse(restored, y) - mse(x, y); negative when the restoration helped.
double delta_l2(const nn::Tensor& x, const nn::Tensor& restored, const nn::Tensor& y);

double mse(const nn::Tensor& a, const nn::Tensor& b);

/// Returns accumulated from the end: R_i = r_i + R_{i+1}.
std::vector<double> suffix_returns(const std::vector<double>& rewards);

TrajectoryReward trajectory_rewards(std::span<const int> actions, const nn::Tensor& x,
                                    const nn::Tensor& restored, const nn::Tensor& y, const RewardConfig& cfg);

/// Total reward of the all-bypass route on (x, y). The pathfinder is not run.
double baseline(const nn::Tensor& x, const nn::Tensor& y, model::RoutedNet& model, const RewardConfig& cfg);

}  // namespace pathroute::reward
