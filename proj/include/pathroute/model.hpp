// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathroute/ops.hpp"
#include "pathroute/random.hpp"

namespace pathroute::model {

/// Architecture of the multi-path network and its pathfinder.
struct ModelConfig {
  int blocks = 6;            // dynamic blocks
  int paths = 2;             // paths per block, index 0 is the bypass
  int pathfinder_convs = 2;  // conv layers in the pathfinder
  int features = 32;         // feature channels of the main network
  int hidden = 32;           // pathfinder recurrent hidden size
  int pathfinder_width = 16;
  int patch = 63;            // region edge length for tiling and FLOPs accounting
  int channels = 1;          // image channels, 1 or 3

  void validate() const;

  static ModelConfig denoising();
  static ModelConfig mixed();
};

struct ConvLayer {
  nn::Parameter weight;
  nn::Parameter bias;
  nn::Conv2dOptions opts;

  nn::Var apply(nn::Tape& tape, nn::Var x);
  int kernel() const { return weight.value.shape().h; }
};

/// Two 3x3 convolutions with a ReLU between them, added to the input.
struct ResidualPath {
  ConvLayer first;
  ConvLayer second;
};

struct DynamicBlockParams {
  ConvLayer shared;
  // paths[j] implements action j + 1; action 0 is the parameter-free bypass.
  std::vector<ResidualPath> paths;
};

struct PathfinderParams {
  std::vector<ConvLayer> convs;
  nn::Parameter fc1_weight, fc1_bias;
  nn::Parameter lstm_w_ih, lstm_w_hh, lstm_bias;
  nn::Parameter fc2_weight, fc2_bias;
};

enum class RouteMode { Sample, Greedy };

/// Per-block actions with the distributions they were drawn from.
struct RouteTrace {
  std::vector<int> actions;
  std::vector<std::vector<float>> probs;
  std::vector<float> log_probs;

  std::size_t size() const { return actions.size(); }
};

class RoutedNet {
 public:
  RoutedNet(ModelConfig config, std::uint64_t seed);

  RoutedNet(const RoutedNet&) = delete;
  RoutedNet& operator=(const RoutedNet&) = delete;

  const ModelConfig& config() const { return config_; }

  std::vector<nn::Parameter*> cnn_parameters();
  std::vector<nn::Parameter*> pathfinder_parameters();
  std::vector<nn::Parameter*> parameters();

  ConvLayer start;
  std::vector<DynamicBlockParams> blocks;
  ConvLayer end;
  PathfinderParams pathfinder;

 private:
  ModelConfig config_;
};

struct PolicyOutput {
  nn::Var log_probs;  // (1, M, 1, 1) on the policy tape
  std::vector<float> probs;
  nn::LstmState next;
};

nn::LstmState initial_pathfinder_state(nn::Tape& tape, const ModelConfig& config);

/// Runs the shared pathfinder on one block input. The input is copied onto
/// the policy tape as a constant, so no gradient reaches the main network.
PolicyOutput pathfinder_policy(RoutedNet& model, nn::Tape& policy_tape, const nn::Tensor& block_input,
                               nn::LstmState state);

/// Categorical draw in Sample mode, argmax (lowest index on ties) in Greedy mode.
int select_action(std::span<const float> probs, RouteMode mode, Rng* rng);

/// x_{i+1} = path_a(shared(x_i)).
nn::Var dynamic_block_forward(nn::Tape& tape, nn::Var x, int action, DynamicBlockParams& block,
                              int path_count);

/// restored = patch + end(features).
nn::Var decode(nn::Tape& tape, RoutedNet& model, nn::Var patch, nn::Var features);

struct ForwardResult {
  nn::Var restored;
  RouteTrace trace;
  std::vector<nn::Var> block_inputs;       // x_1..x_N on the main tape
  std::vector<nn::Var> chosen_log_probs;   // log pi(a_i | s_i) on the policy tape
};

/// Routes chosen by the pathfinder. When policy_tape is null the policy
/// graph is built on a scratch tape and discarded.
ForwardResult model_forward(RoutedNet& model, nn::Tape& tape, nn::Var patch, RouteMode mode, Rng* rng,
                            nn::Tape* policy_tape = nullptr);

/// Externally supplied route; the pathfinder is not evaluated and the trace
/// carries actions only.
ForwardResult model_forward_forced(RoutedNet& model, nn::Tape& tape, nn::Var patch,
                                   std::span<const int> route);

struct Restoration {
  nn::Tensor restored;
  RouteTrace trace;
};

Restoration restore(RoutedNet& model, const nn::Tensor& patch, RouteMode mode, Rng* rng);
nn::Tensor restore_forced(RoutedNet& model, const nn::Tensor& patch, std::span<const int> route);

std::vector<int> all_bypass_route(const ModelConfig& config);

// FLOPs accounting: 2 * k^2 * C_in * C_out * H_out * W_out per convolution,
// 2 * in * out per fully-connected layer, 2 * (in + H) * 4H for the
// recurrent cell gates. Bias additions, activations, pooling and skip
// additions are not counted.

std::uint64_t conv_flops(int kernel, int in_ch, int out_ch, int out_h, int out_w);

struct FlopsBreakdown {
  std::uint64_t network = 0;
  std::uint64_t pathfinder = 0;
  std::uint64_t total() const { return network + pathfinder; }
};

/// Cost of one invocation of the pathfinder on an h x w block input.
std::uint64_t pathfinder_flops(const ModelConfig& config, int height, int width);

/// Cost of the residual path implementing action (>= 1) at h x w.
std::uint64_t path_flops(const ModelConfig& config, int action, int height, int width);

/// Cost of restoring one region along `route`; the pathfinder runs at every block.
FlopsBreakdown count_flops(std::span<const int> route, const ModelConfig& config, int height, int width);
FlopsBreakdown count_flops(std::span<const int> route, const ModelConfig& config);

FlopsBreakdown min_route_flops(const ModelConfig& config);
FlopsBreakdown max_route_flops(const ModelConfig& config);

}  // namespace pathroute::model
