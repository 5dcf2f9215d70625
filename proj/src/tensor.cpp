// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathroute/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "pathroute/error.hpp"

namespace pathroute::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), values_(shape.numel(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ConfigError("negative tensor extent " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.numel()) {
    throw ConfigError("tensor of shape " + shape_.str() + " given " +
                      std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<float> values) {
  const int len = static_cast<int>(values.size());
  return Tensor({1, len, 1, 1}, std::move(values));
}

Tensor Tensor::scalar(float value) { return Tensor({1, 1, 1, 1}, std::vector<float>{value}); }

float Tensor::item() const {
  if (values_.size() != 1) {
    throw UsageError("item() on tensor of shape " + shape_.str());
  }
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      adam_m(value.numel(), 0.0f),
      adam_v(value.numel(), 0.0f) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  } else {
    std::fill(grad.data().begin(), grad.data().end(), 0.0f);
  }
  has_grad = true;
}

void Parameter::accumulate_grad(std::span<const float> g) {
  if (!has_grad) zero_grad();
  float* dst = grad.ptr();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace pathroute::nn
