// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pathroute/error.hpp"

namespace pathroute::model {
namespace {

using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

constexpr int kKernel = 3;

Tensor uniform_tensor(nn::Shape shape, float bound, Rng& rng) {
  Tensor t(shape);
  for (float& v : t.data()) v = static_cast<float>(uniform(rng, -bound, bound));
  return t;
}

// Fan-in-scaled uniform init; gain 6 for layers followed by ReLU, 1 otherwise.
ConvLayer make_conv(const std::string& name, int in_ch, int out_ch, nn::Conv2dOptions opts, float gain,
                    Rng& rng) {
  const float fan_in = static_cast<float>(in_ch * kKernel * kKernel);
  const float bound = gain == 0.0f ? 0.0f : std::sqrt(gain / fan_in);
  return ConvLayer{Parameter(name + ".weight", uniform_tensor({out_ch, in_ch, kKernel, kKernel}, bound, rng)),
                   Parameter(name + ".bias", Tensor({1, out_ch, 1, 1})), opts};
}

Parameter make_matrix(const std::string& name, int out, int in, float bound, Rng& rng) {
  return Parameter(name, uniform_tensor({out, in, 1, 1}, bound, rng));
}

nn::Conv2dOptions same(int dilation = 1) { return {1, dilation, dilation}; }

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (blocks < 1) fail("blocks must be >= 1");
  if (paths < 2) fail("paths must be >= 2 (bypass plus at least one residual path)");
  if (pathfinder_convs < 1) fail("pathfinder_convs must be >= 1");
  if (features < 1) fail("features must be >= 1");
  if (hidden < 1) fail("hidden must be >= 1");
  if (pathfinder_width < 1) fail("pathfinder_width must be >= 1");
  if (patch < 9) fail("patch must be >= 9");
  if (channels != 1 && channels != 3) fail("channels must be 1 or 3");
}

ModelConfig ModelConfig::denoising() { return ModelConfig{}; }

ModelConfig ModelConfig::mixed() {
  ModelConfig c;
  c.blocks = 5;
  c.paths = 4;
  c.pathfinder_convs = 4;
  return c;
}

Var ConvLayer::apply(Tape& tape, Var x) {
  return nn::conv2d(tape, x, tape.parameter(weight), tape.parameter(bias), opts);
}

RoutedNet::RoutedNet(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int f = config_.features;
  start = make_conv("start", config_.channels, f, same(), 1.0f, rng);
  for (int i = 0; i < config_.blocks; ++i) {
    const std::string prefix = "block" + std::to_string(i);
    DynamicBlockParams block;
    block.shared = make_conv(prefix + ".shared", f, f, same(), 6.0f, rng);
    for (int a = 1; a < config_.paths; ++a) {
      const std::string path = prefix + ".path" + std::to_string(a);
      // Paths differ by the dilation of their first convolution.
      block.paths.push_back(ResidualPath{make_conv(path + ".conv1", f, f, same(a), 6.0f, rng),
                                         make_conv(path + ".conv2", f, f, same(), 1.0f, rng)});
    }
    blocks.push_back(std::move(block));
  }
  end = make_conv("end", f, config_.channels, same(), 0.0f, rng);

  const int width = config_.pathfinder_width;
  const int hidden = config_.hidden;
  for (int i = 0; i < config_.pathfinder_convs; ++i) {
    pathfinder.convs.push_back(make_conv("pathfinder.conv" + std::to_string(i), i == 0 ? f : width, width,
                                         nn::Conv2dOptions{2, 1, 1}, 6.0f, rng));
  }
  pathfinder.fc1_weight = make_matrix("pathfinder.fc1.weight", hidden, width,
                                      std::sqrt(6.0f / static_cast<float>(width)), rng);
  pathfinder.fc1_bias = Parameter("pathfinder.fc1.bias", Tensor({1, hidden, 1, 1}));
  const float lstm_bound = 1.0f / std::sqrt(static_cast<float>(hidden));
  pathfinder.lstm_w_ih = make_matrix("pathfinder.lstm.w_ih", 4 * hidden, hidden, lstm_bound, rng);
  pathfinder.lstm_w_hh = make_matrix("pathfinder.lstm.w_hh", 4 * hidden, hidden, lstm_bound, rng);
  pathfinder.lstm_bias = Parameter("pathfinder.lstm.bias", Tensor({1, 4 * hidden, 1, 1}));
  // Zero classifier: the initial policy is uniform over paths.
  pathfinder.fc2_weight = Parameter("pathfinder.fc2.weight", Tensor({config_.paths, hidden, 1, 1}));
  pathfinder.fc2_bias = Parameter("pathfinder.fc2.bias", Tensor({1, config_.paths, 1, 1}));
}

std::vector<Parameter*> RoutedNet::cnn_parameters() {
  std::vector<Parameter*> out{&start.weight, &start.bias};
  for (auto& block : blocks) {
    out.push_back(&block.shared.weight);
    out.push_back(&block.shared.bias);
    for (auto& path : block.paths) {
      out.insert(out.end(), {&path.first.weight, &path.first.bias, &path.second.weight, &path.second.bias});
    }
  }
  out.push_back(&end.weight);
  out.push_back(&end.bias);
  return out;
}

std::vector<Parameter*> RoutedNet::pathfinder_parameters() {
  std::vector<Parameter*> out;
  for (auto& conv : pathfinder.convs) {
    out.push_back(&conv.weight);
    out.push_back(&conv.bias);
  }
  out.insert(out.end(), {&pathfinder.fc1_weight, &pathfinder.fc1_bias, &pathfinder.lstm_w_ih,
                         &pathfinder.lstm_w_hh, &pathfinder.lstm_bias, &pathfinder.fc2_weight,
                         &pathfinder.fc2_bias});
  return out;
}

std::vector<Parameter*> RoutedNet::parameters() {
  auto out = cnn_parameters();
  auto pf = pathfinder_parameters();
  out.insert(out.end(), pf.begin(), pf.end());
  return out;
}

nn::LstmState initial_pathfinder_state(Tape& tape, const ModelConfig& config) {
  return {tape.constant(Tensor({1, config.hidden, 1, 1})), tape.constant(Tensor({1, config.hidden, 1, 1}))};
}

PolicyOutput pathfinder_policy(RoutedNet& model, Tape& policy_tape, const Tensor& block_input,
                               nn::LstmState state) {
  const auto& cfg = model.config();
  if (block_input.shape().n != 1 || block_input.shape().c != cfg.features) {
    throw ConfigError("pathfinder expects a (1, " + std::to_string(cfg.features) + ", h, w) input, got " +
                      block_input.shape().str());
  }
  if (policy_tape.value(state.h).numel() != static_cast<std::size_t>(cfg.hidden) ||
      policy_tape.value(state.c).numel() != static_cast<std::size_t>(cfg.hidden)) {
    throw ConfigError("pathfinder state does not match hidden size " + std::to_string(cfg.hidden));
  }
  Tape& t = policy_tape;
  auto& pf = model.pathfinder;
  Var x = nn::avg_pool2(t, t.constant(block_input));
  for (auto& conv : pf.convs) x = nn::relu(t, conv.apply(t, x));
  x = nn::global_avg_pool(t, x);
  x = nn::relu(t, nn::linear(t, x, t.parameter(pf.fc1_weight), t.parameter(pf.fc1_bias)));
  const nn::LstmWeights weights{t.parameter(pf.lstm_w_ih), t.parameter(pf.lstm_w_hh), t.parameter(pf.lstm_bias)};
  const nn::LstmState next = nn::lstm_step(t, x, state, weights);
  const Var logits = nn::linear(t, next.h, t.parameter(pf.fc2_weight), t.parameter(pf.fc2_bias));
  const Var log_probs = nn::log_softmax(t, logits);
  std::vector<float> probs(static_cast<std::size_t>(cfg.paths));
  const auto lp = t.value(log_probs).data();
  for (std::size_t a = 0; a < probs.size(); ++a) probs[a] = std::exp(lp[a]);
  return {log_probs, std::move(probs), next};
}

int select_action(std::span<const float> probs, RouteMode mode, Rng* rng) {
  if (probs.empty()) throw NumericError("empty action distribution");
  double total = 0.0;
  for (float p : probs) {
    if (!std::isfinite(p) || p < 0.0f) throw NumericError("invalid action probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-4) {
    throw NumericError("action distribution sums to " + std::to_string(total));
  }
  if (mode == RouteMode::Greedy) {
    // max_element returns the first maximum: ties go to the lowest index.
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
  if (rng == nullptr) throw UsageError("sampling an action requires a random engine");
  const double u = uniform(*rng, 0.0, total);
  double acc = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    acc += probs[a];
    if (u < acc) return static_cast<int>(a);
  }
  // Rounding at the upper end: return the last action with non-zero mass.
  for (std::size_t a = probs.size(); a-- > 0;) {
    if (probs[a] > 0.0f) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

Var dynamic_block_forward(Tape& tape, Var x, int action, DynamicBlockParams& block, int path_count) {
  if (action < 0 || action >= path_count) {
    throw UsageError("action " + std::to_string(action) + " out of range [0, " + std::to_string(path_count) + ")");
  }
  const Var shared = nn::relu(tape, block.shared.apply(tape, x));
  if (action == 0) return shared;
  ResidualPath& path = block.paths[static_cast<std::size_t>(action - 1)];
  const Var hidden = nn::relu(tape, path.first.apply(tape, shared));
  return nn::add(tape, shared, path.second.apply(tape, hidden));
}

Var decode(Tape& tape, RoutedNet& model, Var patch, Var features) {
  return nn::add(tape, patch, model.end.apply(tape, features));
}

namespace {

void check_patch(const RoutedNet& model, const Tensor& patch) {
  const auto s = patch.shape();
  if (s.n != 1 || s.c != model.config().channels) {
    throw ConfigError("model expects a (1, " + std::to_string(model.config().channels) +
                      ", h, w) patch, got " + s.str());
  }
}

}  // namespace

ForwardResult model_forward(RoutedNet& model, Tape& tape, Var patch, RouteMode mode, Rng* rng,
                            Tape* policy_tape) {
  check_patch(model, tape.value(patch));
  Tape scratch;
  Tape& ptape = policy_tape != nullptr ? *policy_tape : scratch;
  ForwardResult out;
  nn::LstmState state = initial_pathfinder_state(ptape, model.config());
  Var x = model.start.apply(tape, patch);
  for (auto& block : model.blocks) {
    out.block_inputs.push_back(x);
    PolicyOutput policy = pathfinder_policy(model, ptape, tape.value(x), state);
    const int action = select_action(policy.probs, mode, rng);
    out.trace.actions.push_back(action);
    out.trace.log_probs.push_back(ptape.value(policy.log_probs)[static_cast<std::size_t>(action)]);
    out.trace.probs.push_back(std::move(policy.probs));
    if (policy_tape != nullptr) out.chosen_log_probs.push_back(nn::pick(ptape, policy.log_probs, 0, action));
    state = policy.next;
    x = dynamic_block_forward(tape, x, action, block, model.config().paths);
  }
  out.restored = decode(tape, model, patch, x);
  return out;
}

ForwardResult model_forward_forced(RoutedNet& model, Tape& tape, Var patch, std::span<const int> route) {
  check_patch(model, tape.value(patch));
  if (route.size() != model.blocks.size()) {
    throw UsageError("forced route has " + std::to_string(route.size()) + " entries, model has " +
                     std::to_string(model.blocks.size()) + " blocks");
  }
  ForwardResult out;
  Var x = model.start.apply(tape, patch);
  for (std::size_t i = 0; i < route.size(); ++i) {
    out.block_inputs.push_back(x);
    out.trace.actions.push_back(route[i]);
    x = dynamic_block_forward(tape, x, route[i], model.blocks[i], model.config().paths);
  }
  out.restored = decode(tape, model, patch, x);
  return out;
}

Restoration restore(RoutedNet& model, const Tensor& patch, RouteMode mode, Rng* rng) {
  Tape tape;
  ForwardResult fwd = model_forward(model, tape, tape.constant(patch), mode, rng);
  return {tape.value(fwd.restored), std::move(fwd.trace)};
}

Tensor restore_forced(RoutedNet& model, const Tensor& patch, std::span<const int> route) {
  Tape tape;
  ForwardResult fwd = model_forward_forced(model, tape, tape.constant(patch), route);
  return tape.value(fwd.restored);
}

std::vector<int> all_bypass_route(const ModelConfig& config) {
  return std::vector<int>(static_cast<std::size_t>(config.blocks), 0);
}

std::uint64_t conv_flops(int kernel, int in_ch, int out_ch, int out_h, int out_w) {
  return 2ULL * static_cast<std::uint64_t>(kernel) * kernel * in_ch * out_ch * out_h * out_w;
}

std::uint64_t pathfinder_flops(const ModelConfig& config, int height, int width) {
  int h = height / 2, w = width / 2;
  int in_ch = config.features;
  std::uint64_t total = 0;
  const nn::Conv2dOptions opts{2, 1, 1};
  for (int i = 0; i < config.pathfinder_convs; ++i) {
    h = nn::conv_output_extent(h, kKernel, opts);
    w = nn::conv_output_extent(w, kKernel, opts);
    total += conv_flops(kKernel, in_ch, config.pathfinder_width, h, w);
    in_ch = config.pathfinder_width;
  }
  const std::uint64_t hid = static_cast<std::uint64_t>(config.hidden);
  total += 2ULL * config.pathfinder_width * hid;        // fc1
  total += 2ULL * (hid + hid) * 4ULL * hid;              // recurrent gates
  total += 2ULL * hid * static_cast<std::uint64_t>(config.paths);  // fc2
  return total;
}

std::uint64_t path_flops(const ModelConfig& config, int action, int height, int width) {
  if (action == 0) return 0;
  return 2 * conv_flops(kKernel, config.features, config.features, height, width);
}

FlopsBreakdown count_flops(std::span<const int> route, const ModelConfig& config, int height, int width) {
  if (route.size() != static_cast<std::size_t>(config.blocks)) {
    throw UsageError("route length " + std::to_string(route.size()) + " does not match " +
                     std::to_string(config.blocks) + " blocks");
  }
  const int f = config.features;
  FlopsBreakdown out;
  out.network += conv_flops(kKernel, config.channels, f, height, width);
  for (int action : route) {
    if (action < 0 || action >= config.paths) throw UsageError("route action out of range");
    out.network += conv_flops(kKernel, f, f, height, width);
    out.network += path_flops(config, action, height, width);
  }
  out.network += conv_flops(kKernel, f, config.channels, height, width);
  out.pathfinder = static_cast<std::uint64_t>(config.blocks) * pathfinder_flops(config, height, width);
  return out;
}

FlopsBreakdown count_flops(std::span<const int> route, const ModelConfig& config) {
  return count_flops(route, config, config.patch, config.patch);
}

FlopsBreakdown min_route_flops(const ModelConfig& config) {
  return count_flops(all_bypass_route(config), config);
}

FlopsBreakdown max_route_flops(const ModelConfig& config) {
  std::vector<int> route(static_cast<std::size_t>(config.blocks), config.paths - 1);
  return count_flops(route, config);
}

}  // namespace pathroute::model
