// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/optim.hpp"

#include <cmath>

#include "pathroute/error.hpp"

namespace pathroute::nn {

void adam_update(Parameter& param, float lr, const AdamOptions& opts) {
  if (!param.has_grad) {
    throw UsageError("adam_update on parameter '" + param.name + "' without a gradient");
  }
  param.step += 1;
  const double t = static_cast<double>(param.step);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(opts.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(opts.beta2), t));
  float* value = param.value.ptr();
  const float* g = param.grad.ptr();
  for (std::size_t i = 0; i < param.value.numel(); ++i) {
    param.adam_m[i] = opts.beta1 * param.adam_m[i] + (1.0f - opts.beta1) * g[i];
    param.adam_v[i] = opts.beta2 * param.adam_v[i] + (1.0f - opts.beta2) * g[i] * g[i];
    const float m_hat = param.adam_m[i] / c1;
    const float v_hat = param.adam_v[i] / c2;
    value[i] -= lr * m_hat / (std::sqrt(v_hat) + opts.eps);
  }
}

void adam_update(std::span<Parameter* const> params, float lr, const AdamOptions& opts) {
  for (Parameter* p : params) adam_update(*p, lr, opts);
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace pathroute::nn
