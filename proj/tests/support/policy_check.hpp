// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

// Small policy-gradient experiments shared by the unit tests and the
// acceptance binary.

#pragma once

#include <cstdint>
#include <vector>

#include "pathroute/trainer.hpp"

namespace pathroute::testing {

/// Two-path model with a one-channel trunk and a minimal pathfinder.
model::ModelConfig tiny_policy_config(int blocks);

/// Moves every pathfinder parameter away from its initial value so that the
/// policy is neither uniform nor degenerate.
void randomize_pathfinder(model::RoutedNet& model, Rng& rng, double spread = 0.5);

/// Per-step rewards for a two-block, two-path problem. r_1 depends on a_1
/// only and r_2 on (a_1, a_2); b is a constant.
struct TwoStepRewards {
  double penalty = 0.05;
  double gain[2][2] = {{0.0, 0.3}, {0.1, 0.6}};
  double baseline = 0.1;

  std::vector<double> rewards(int a1, int a2) const;
  trainer::RewardSource source() const;
};

/// Expected value of the estimator, enumerated over all four routes.
std::vector<double> exact_policy_gradient(model::RoutedNet& model, const nn::Tensor& x, const TwoStepRewards& r);

/// Expected total reward, enumerated; used for a finite-difference cross-check.
double expected_return(model::RoutedNet& model, const nn::Tensor& x, const TwoStepRewards& r);

struct EstimatorStats {
  std::vector<double> mean;
  std::vector<double> std_error;
};

/// Mean and standard error of single-trajectory estimates.
EstimatorStats sample_policy_gradient(model::RoutedNet& model, const nn::Tensor& x,
                                      const trainer::RewardSource& source, int samples, Rng& rng);

/// Outcome of the two-path bandit: the probability of the better path after
/// each update, averaged over runs. Entry 0 is the initial probability.
struct BanditCurve {
  std::vector<double> mean_prob;
};

BanditCurve run_bandit(int updates, int runs, double lr, int batch, std::uint64_t seed);

}  // namespace pathroute::testing
