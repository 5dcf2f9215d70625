// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "pathroute/tensor.hpp"

namespace pathroute::nn {

struct AdamOptions {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// One bias-corrected Adam step; increments param.step.
/// Throws UsageError if the parameter carries no gradient.
void adam_update(Parameter& param, float lr, const AdamOptions& opts = {});

void adam_update(std::span<Parameter* const> params, float lr, const AdamOptions& opts = {});

void zero_grad(std::span<Parameter* const> params);

}  // namespace pathroute::nn
