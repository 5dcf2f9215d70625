// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/policy_check.hpp"

#include <cmath>

#include "pathroute/error.hpp"
#include "pathroute/optim.hpp"

namespace pathroute::testing {

using nn::Tape;
using nn::Tensor;
using nn::Var;

model::ModelConfig tiny_policy_config(int blocks) {
  model::ModelConfig c;
  c.blocks = blocks;
  c.paths = 2;
  c.pathfinder_convs = 1;
  c.features = 1;
  c.hidden = 1;
  c.pathfinder_width = 1;
  c.patch = 15;
  return c;
}

void randomize_pathfinder(model::RoutedNet& model, Rng& rng, double spread) {
  for (nn::Parameter* p : model.pathfinder_parameters()) {
    for (float& v : p->value.data()) v += static_cast<float>(uniform(rng, -spread, spread));
  }
}

std::vector<double> TwoStepRewards::rewards(int a1, int a2) const {
  const double r1 = a1 != 0 ? -penalty : 0.0;
  const double r2 = (a2 != 0 ? -penalty : 0.0) + gain[a1][a2];
  return {r1, r2};
}

trainer::RewardSource TwoStepRewards::source() const {
  trainer::RewardSource src;
  const TwoStepRewards self = *this;
  src.reward = [self](const model::RouteTrace& trace, const Tensor&, const Tensor&, const Tensor&) {
    if (trace.size() != 2) throw UsageError("TwoStepRewards: expected two blocks");
    reward::TrajectoryReward out;
    out.rewards = self.rewards(trace.actions[0], trace.actions[1]);
    out.returns = reward::suffix_returns(out.rewards);
    return out;
  };
  src.baseline = [self](const Tensor&, const Tensor&) { return self.baseline; };
  return src;
}

namespace {

// Inputs x_1 and x_2 of the two blocks for each first action.
struct BlockInputs {
  Tensor x1;
  Tensor x2[2];
};

BlockInputs block_inputs(model::RoutedNet& model, const Tensor& x) {
  if (model.config().blocks != 2 || model.config().paths != 2) {
    throw UsageError("policy check expects two blocks with two paths");
  }
  BlockInputs out;
  for (int a1 = 0; a1 < 2; ++a1) {
    Tape tape;
    const int route[2] = {a1, 0};
    auto fwd = model::model_forward_forced(model, tape, tape.constant(x), route);
    if (a1 == 0) out.x1 = tape.value(fwd.block_inputs[0]);
    out.x2[a1] = tape.value(fwd.block_inputs[1]);
  }
  return out;
}

std::vector<double> flat_grads(model::RoutedNet& model) {
  std::vector<double> g;
  for (nn::Parameter* p : model.pathfinder_parameters()) {
    for (float v : p->grad.data()) g.push_back(v);
  }
  return g;
}

}  // namespace

std::vector<double> exact_policy_gradient(model::RoutedNet& model, const Tensor& x, const TwoStepRewards& r) {
  const BlockInputs in = block_inputs(model, x);
  auto params = model.pathfinder_parameters();
  nn::zero_grad(params);
  // grad J = sum_tau P(tau) R(tau) (grad log pi(a_1) + grad log pi(a_2 | a_1))
  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a2 = 0; a2 < 2; ++a2) {
      Tape tape;
      auto s0 = model::initial_pathfinder_state(tape, model.config());
      auto p1 = model::pathfinder_policy(model, tape, in.x1, s0);
      auto p2 = model::pathfinder_policy(model, tape, in.x2[a1], p1.next);
      const Var lp = nn::add(tape, nn::pick(tape, p1.log_probs, 0, a1), nn::pick(tape, p2.log_probs, 0, a2));
      const double prob = std::exp(static_cast<double>(tape.value(lp).item()));
      const auto rw = r.rewards(a1, a2);
      const double total = rw[0] + rw[1];
      tape.backward(nn::scale(tape, lp, static_cast<float>(prob * total)));
    }
  }
  auto g = flat_grads(model);
  nn::zero_grad(params);
  return g;
}

double expected_return(model::RoutedNet& model, const Tensor& x, const TwoStepRewards& r) {
  const BlockInputs in = block_inputs(model, x);
  double j = 0.0;
  for (int a1 = 0; a1 < 2; ++a1) {
    Tape tape;
    auto s0 = model::initial_pathfinder_state(tape, model.config());
    auto p1 = model::pathfinder_policy(model, tape, in.x1, s0);
    auto p2 = model::pathfinder_policy(model, tape, in.x2[a1], p1.next);
    for (int a2 = 0; a2 < 2; ++a2) {
      const auto rw = r.rewards(a1, a2);
      j += static_cast<double>(p1.probs[a1]) * p2.probs[a2] * (rw[0] + rw[1]);
    }
  }
  return j;
}

EstimatorStats sample_policy_gradient(model::RoutedNet& model, const Tensor& x,
                                      const trainer::RewardSource& source, int samples, Rng& rng) {
  if (samples < 2) throw UsageError("sample_policy_gradient: need at least two samples");
  std::vector<double> sum, sum_sq;
  const trainer::Pair pair{x, x};
  for (int s = 0; s < samples; ++s) {
    Tape tape;
    std::vector<trainer::Trajectory> one;
    one.push_back(trainer::rollout(model, tape, pair, rng, source).trajectory);
    const auto g = trainer::policy_gradient(one, model);
    if (sum.empty()) {
      sum.assign(g.size(), 0.0);
      sum_sq.assign(g.size(), 0.0);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      sum[i] += g[i];
      sum_sq[i] += g[i] * g[i];
    }
  }
  EstimatorStats st;
  const double n = samples;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double mean = sum[i] / n;
    const double var = std::max(0.0, (sum_sq[i] - n * mean * mean) / (n - 1.0));
    st.mean.push_back(mean);
    st.std_error.push_back(std::sqrt(var / n));
  }
  return st;
}

BanditCurve run_bandit(int updates, int runs, double lr, int batch, std::uint64_t seed) {
  BanditCurve curve;
  curve.mean_prob.assign(static_cast<std::size_t>(updates) + 1, 0.0);
  trainer::RewardSource src;
  src.reward = [](const model::RouteTrace& trace, const Tensor&, const Tensor&, const Tensor&) {
    reward::TrajectoryReward out;
    out.rewards = {trace.actions[0] == 1 ? 0.5 : 0.0};
    out.returns = out.rewards;
    return out;
  };
  src.baseline = [](const Tensor&, const Tensor&) { return 0.0; };
  trainer::TrainConfig cfg;
  cfg.batch = batch;
  cfg.cnn_lr_scale = 0.0;
  for (int run = 0; run < runs; ++run) {
    trainer::TrainState state = trainer::make_state(tiny_policy_config(1), derive_seed(seed, run));
    Rng data_rng(derive_seed(seed, 1000 + run));
    const int size = state.model->config().patch;
    Tensor x({1, 1, size, size});
    for (float& v : x.data()) v = static_cast<float>(uniform(data_rng, 0.0, 1.0));
    const std::vector<trainer::Pair> batch_pairs(static_cast<std::size_t>(batch), trainer::Pair{x, x});
    auto prob_better = [&] {
      return static_cast<double>(model::restore(*state.model, x, model::RouteMode::Greedy, nullptr).trace.probs[0][1]);
    };
    curve.mean_prob[0] += prob_better() / runs;
    for (int u = 0; u < updates; ++u) {
      trainer::stage2_step(state, batch_pairs, cfg, lr, &src);
      curve.mean_prob[static_cast<std::size_t>(u) + 1] += prob_better() / runs;
    }
  }
  return curve;
}

}  // namespace pathroute::testing
