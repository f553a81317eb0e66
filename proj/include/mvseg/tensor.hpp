// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvseg {

/// Dense row-major tensor, 1 to 4 dims (NCHW order for images). Templated on
/// the scalar type: the pipeline runs float, gradient checks run double.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    if (shape.empty() || shape.size() > 4)
      throw std::runtime_error("tensor rank must be 1..4");
    size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::runtime_error("tensor dims must be positive");
      n *= static_cast<size_t>(d);
    }
    v.assign(n, T(0));
  }

  static Tensor scalar(T x) {
    Tensor t(std::vector<int>{1});
    t.v[0] = x;
    return t;
  }

  size_t size() const { return v.size(); }
  int dim(size_t i) const { return shape.at(i); }
  T& operator[](size_t i) { return v[i]; }
  const T& operator[](size_t i) const { return v[i]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

}  // namespace mvseg
