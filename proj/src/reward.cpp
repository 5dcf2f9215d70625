// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/reward.hpp"

#include <numeric>
#include <string>

#include "pathroute/error.hpp"

namespace pathroute::reward {

void RewardConfig::validate() const {
  if (!(penalty > 0.0)) throw ConfigError("reward penalty must be > 0");
  if (!(threshold > 0.0)) throw ConfigError("reward threshold must be > 0");
}

double difficulty(double output_loss, double threshold) {
  if (output_loss < 0.0) throw UsageError("difficulty of a negative loss");
  if (!(threshold > 0.0)) throw UsageError("difficulty threshold must be > 0");
  return output_loss < threshold ? output_loss / threshold : 1.0;
}

double step_reward(int block, int blocks, int action, double penalty, double d, double delta_l2) {
  if (block < 0 || block >= blocks) {
    throw UsageError("block index " + std::to_string(block) + " out of range");
  }
  const double r = action == 0 ? 0.0 : -penalty;
  if (block < blocks - 1) return r;
  return r + d * (-delta_l2);
}

double mse(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("mse shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.numel());
}

double delta_l2(const nn::Tensor& x, const nn::Tensor& restored, const nn::Tensor& y) {
  return mse(restored, y) - mse(x, y);
}

std::vector<double> suffix_returns(const std::vector<double>& rewards) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    out[i] = acc;
  }
  return out;
}

TrajectoryReward trajectory_rewards(std::span<const int> actions, const nn::Tensor& x,
                                    const nn::Tensor& restored, const nn::Tensor& y, const RewardConfig& cfg) {
  if (actions.empty()) throw UsageError("empty trajectory");
  const double d = cfg.regulated ? difficulty(mse(restored, y), cfg.threshold) : 1.0;
  const double gain = delta_l2(x, restored, y);
  const int n = static_cast<int>(actions.size());
  TrajectoryReward out;
  for (int i = 0; i < n; ++i) {
    out.rewards.push_back(step_reward(i, n, actions[static_cast<std::size_t>(i)], cfg.penalty, d, gain));
  }
  out.returns = suffix_returns(out.rewards);
  return out;
}

double baseline(const nn::Tensor& x, const nn::Tensor& y, model::RoutedNet& model, const RewardConfig& cfg) {
  const auto route = model::all_bypass_route(model.config());
  const nn::Tensor restored = model::restore_forced(model, x, route);
  const TrajectoryReward r = trajectory_rewards(route, x, restored, y, cfg);
  return r.returns.front();
}

}  // namespace pathroute::reward
