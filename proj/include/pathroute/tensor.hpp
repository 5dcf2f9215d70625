// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pathroute::nn {

/// Extents of a 4-D (batch, channel, height, width) array.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense row-major float32 array. Vectors are stored as (batch, features, 1, 1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor vector(std::vector<float> values);
  static Tensor scalar(float value);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<float> data() { return values_; }
  std::span<const float> data() const { return values_; }
  float* ptr() { return values_.data(); }
  const float* ptr() const { return values_.data(); }

  float& operator[](std::size_t i) { return values_[i]; }
  float operator[](std::size_t i) const { return values_[i]; }

  float& at(int n, int c, int h, int w) { return values_[index(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return values_[index(n, c, h, w)]; }

  // Scalar value of a single-element tensor.
  float item() const;

  bool all_finite() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_;
  std::vector<float> values_;
};

/// Trainable tensor with Adam moment buffers.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  std::uint64_t step = 0;
  bool has_grad = false;

  void zero_grad();
  void accumulate_grad(std::span<const float> g);
};

}  // namespace pathroute::nn
