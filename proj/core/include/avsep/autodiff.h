// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "avsep/tensor.h"

namespace avsep::ad {

class Tape;

/// Lightweight handle to a node on a tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape over dense tensors.
///
/// Ops record coarse-grained nodes (a whole matmul, a whole GRU sweep) with
/// hand-written adjoints; backward() walks the nodes in reverse creation
/// order, which is a valid topological order because graphs are built
/// forward. Gradients accumulate with +=. Leaves created from parameters
/// carry a sink pointer that receives the gradient at the end of backward.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A differentiable leaf. grad_sink, if given, accumulates the leaf's
  /// gradient during backward (used for trainable parameters).
  Var leaf(Tensor value, Tensor* grad_sink = nullptr);

  /// A non-differentiable input; backward never propagates into it.
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar_value(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and runs all adjoints. loss must be scalar.
  void backward(Var loss);

  /// Drops all nodes; the tape object can be reused for the next sample.
  void reset();

  std::size_t num_nodes() const { return nodes_.size(); }

  // ---- elementwise / scalar ops ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var exp_(Var a);
  Var log_(Var a);   // natural log; caller guarantees positivity
  Var sqrt_(Var a);
  Var square(Var a);
  Var abs_(Var a);   // subgradient sign(x), 0 at 0

  // ---- reductions ----
  Var sum(Var a);
  Var mean(Var a);
  Var dot(Var a, Var b);

  // ---- scalar broadcasts (s has shape {1}) ----
  Var add_bscalar(Var a, Var s);
  Var sub_bscalar(Var a, Var s);
  Var mul_bscalar(Var a, Var s);
  Var div_ss(Var a, Var b);  // scalar / scalar

  // ---- linear algebra ----
  /// W:{r,k} times X viewed as a matrix [k x cols]; output keeps X's trailing
  /// spatial dims: {r, ...X.shape[1:]}.
  Var matmul(Var w, Var x);
  /// X:{r,c} -> {c,r}.
  Var transpose(Var x);
  /// M viewed as [r x c] plus bias {r} added to every column.
  Var add_bias_rows(Var m, Var bias);
  /// M:{r,c} plus bias {c} added to every row.
  Var add_bias_cols(Var m, Var bias);

  // ---- structure ----
  Var concat_rows(const std::vector<Var>& parts);  // stack along dim 0
  Var slice_cols(Var m, int c0, int c1);           // matrix column slice
  Var gather_rows(Var m, std::vector<int> idx);
  Var reshape(Var a, std::vector<int> new_shape);

  // internal: used by fused ops in nn_ops.cpp
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Tensor* sink = nullptr;
    std::function<void(Tape&)> backward;
  };
  // deque keeps node references stable while ops append new nodes
  std::deque<Node>& nodes() { return nodes_; }
  Var emplace(Tensor value, bool needs_grad, std::function<void(Tape&)> backward);
  Tensor& grad_mut(Var v) { return nodes_[v.id].grad; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

 private:
  std::deque<Node> nodes_;
};

/// max |a-b| / max(max|b|, floor): relative max-norm gradient discrepancy.
double rel_max_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace avsep::ad
