// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "avsep/error.h"

namespace avsep::ad {

/// Dense row-major double tensor. Rank 1..3 in practice:
/// {n} vectors and scalars ({1}), {r, c} matrices, {C, F, N} latents.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    AVSEP_CHECK(data.size() == numel_of(shape), "tensor shape/data mismatch");
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      AVSEP_CHECK(d > 0, "tensor dims must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return s.empty() ? 0 : n;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  /// Number of rows when viewed as a matrix [shape[0] x rest].
  int rows2d() const { return shape.empty() ? 0 : shape[0]; }
  int cols2d() const {
    return shape.empty() ? 0 : static_cast<int>(numel() / static_cast<std::size_t>(shape[0]));
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

}  // namespace avsep::ad
