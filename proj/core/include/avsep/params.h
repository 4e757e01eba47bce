// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "avsep/rng.h"
#include "avsep/tensor.h"

namespace avsep {

/// Named trainable tensors with their gradients and Adam moments.
/// Iteration follows registration order, which keeps checkpoints and
/// content hashes stable across runs.
class ParamStore {
 public:
  ad::Tensor& add(const std::string& name, ad::Tensor init);

  bool has(const std::string& name) const { return values_.count(name) != 0; }
  ad::Tensor& at(const std::string& name);
  const ad::Tensor& at(const std::string& name) const;
  ad::Tensor& grad_at(const std::string& name);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t num_tensors() const { return names_.size(); }
  std::size_t num_scalars() const;

  void zero_grad();
  double grad_norm() const;
  /// Scales all gradients so the global L2 norm is at most max_norm.
  /// Returns the pre-clip norm. Throws NumericalDivergence if not finite.
  double clip_grad_norm(double max_norm);

  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  long long adam_steps() const { return adam_t_; }

  // Checkpoint plumbing: direct access to the moment buffers.
  ad::Tensor& adam_m(const std::string& name) { return adam_m_.at(name); }
  ad::Tensor& adam_v(const std::string& name) { return adam_v_.at(name); }
  const ad::Tensor& adam_m(const std::string& name) const { return adam_m_.at(name); }
  const ad::Tensor& adam_v(const std::string& name) const { return adam_v_.at(name); }
  void set_adam_steps(long long t) { adam_t_ = t; }

  /// FNV-1a over all parameter bytes in registration order; detects any
  /// weight drift between two points in time.
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, ad::Tensor> values_;
  std::unordered_map<std::string, ad::Tensor> grads_;
  std::unordered_map<std::string, ad::Tensor> adam_m_;
  std::unordered_map<std::string, ad::Tensor> adam_v_;
  long long adam_t_ = 0;
};

/// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
ad::Tensor glorot_uniform(Rng& rng, std::vector<int> shape, int fan_in, int fan_out);

/// Orthonormal rows/cols (whichever is smaller) from QR of a Gaussian draw,
/// scaled by gain. Sign-fixed so the result is deterministic given the draw.
ad::Tensor orthogonal(Rng& rng, int rows, int cols, double gain = 1.0);

ad::Tensor zeros(std::vector<int> shape);
ad::Tensor full(std::vector<int> shape, double value);

}  // namespace avsep
