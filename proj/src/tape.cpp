// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/tape.hpp"

#include <cmath>
#include <string>

#include "pathroute/error.hpp"

namespace pathroute::nn {

Var Tape::constant(Tensor value) {
  if (consumed_) throw UsageError("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Parameter& p) {
  if (consumed_) throw UsageError("tape already consumed by backward()");
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  if (consumed_) throw UsageError("tape already consumed by backward()");
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op at tape node " +
                       std::to_string(nodes_.size()));
  }
  bool needs = false;
  for (Var in : inputs) needs = needs || node(in).requires_grad;
  Node n{std::move(value), {}, {}, nullptr, needs};
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

std::span<float> Tape::grad(Var v) {
  node(v);
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0f);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw UsageError("backward() called on a consumed tape");
  if (value(loss).numel() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " + value(loss).shape().str());
  }
  consumed_ = true;
  if (!requires_grad(loss)) return;
  grad(loss)[0] = 1.0f;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;
    if (n.backward) {
      // Copy: the closure may allocate other nodes' grads.
      const std::vector<float> upstream = std::move(n.grad);
      n.backward(*this, upstream);
      n.backward = nullptr;
    } else if (n.param != nullptr) {
      for (float g : n.grad) {
        if (!std::isfinite(g)) {
          throw NumericError("non-finite gradient for parameter " + n.param->name);
        }
      }
      n.param->accumulate_grad(n.grad);
      n.grad.clear();
    }
  }
}

}  // namespace pathroute::nn
