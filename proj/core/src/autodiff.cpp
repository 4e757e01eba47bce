// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/autodiff.h"

#include <Eigen/Dense>

#include <cmath>

namespace avsep::ad {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

MatMap as_matrix(Tensor& t, int r, int c) { return MatMap(t.data.data(), r, c); }
ConstMatMap as_matrix(const Tensor& t, int r, int c) {
  return ConstMatMap(t.data.data(), r, c);
}

}  // namespace

Var Tape::emplace(Tensor value, bool needs_grad, std::function<void(Tape&)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backward = std::move(backward);
  if (needs_grad) n.grad = Tensor(n.value.shape);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, Tensor* grad_sink) {
  Var v = emplace(std::move(value), true, nullptr);
  nodes_[v.id].sink = grad_sink;
  return v;
}

Var Tape::constant(Tensor value) { return emplace(std::move(value), false, nullptr); }

double Tape::scalar_value(Var v) const {
  AVSEP_CHECK(nodes_[v.id].value.numel() == 1, "expected scalar node");
  return nodes_[v.id].value.data[0];
}

void Tape::backward(Var loss) {
  AVSEP_CHECK(loss.valid() && nodes_[loss.id].value.numel() == 1,
              "backward needs a scalar loss node");
  AVSEP_CHECK(nodes_[loss.id].needs_grad, "loss does not depend on any leaf");
  nodes_[loss.id].grad.data[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this);
    if (n.sink) {
      AVSEP_CHECK(n.sink->same_shape(n.grad), "grad sink shape mismatch");
      for (std::size_t j = 0; j < n.grad.numel(); ++j) n.sink->data[j] += n.grad.data[j];
    }
  }
}

void Tape::reset() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// elementwise

// Backward closures need the output node id, so every op emplaces the value
// first and then installs the closure.

#define AVSEP_DEFINE_BACKWARD(out_var, body)                      \
  do {                                                            \
    if (nodes_[(out_var).id].needs_grad) {                        \
      const int out_id = (out_var).id;                            \
      nodes_[out_id].backward = [=](Tape& t) { body };            \
    }                                                             \
  } while (0)

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  AVSEP_CHECK(ta.same_shape(tb), "add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
    }
  });
  return v;
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  AVSEP_CHECK(ta.same_shape(tb), "sub: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= tb.data[i];
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] -= g.data[i];
    }
  });
  return v;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  AVSEP_CHECK(ta.same_shape(tb), "mul: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& vb = t.value(b);
      for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * vb.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      const Tensor& va = t.value(a);
      for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * va.data[i];
    }
  });
  return v;
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.data) x *= c;
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += c * g.data[i];
  });
  return v;
}

Var Tape::add_const(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.data) x += c;
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
  });
  return v;
}

Var Tape::tanh_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::tanh(x);
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const Tensor& y = t.nodes_[out_id].value;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
  });
  return v;
}

Var Tape::exp_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::exp(x);
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const Tensor& y = t.nodes_[out_id].value;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * y.data[i];
  });
  return v;
}

Var Tape::sigmoid_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const Tensor& y = t.nodes_[out_id].value;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
  });
  return v;
}

Var Tape::log_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::log(x);
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] / x.data[i];
  });
  return v;
}

Var Tape::sqrt_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::sqrt(x);
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const Tensor& y = t.nodes_[out_id].value;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga.data[i] += g.data[i] * 0.5 / (y.data[i] + 1e-300);
  });
  return v;
}

Var Tape::square(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = x * x;
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga.data[i] += 2.0 * g.data[i] * x.data[i];
  });
  return v;
}

Var Tape::abs_(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::fabs(x);
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double s = x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0);
      ga.data[i] += g.data[i] * s;
    }
  });
  return v;
}

// ---------------------------------------------------------------------------
// reductions

Var Tape::sum(Var a) {
  double acc = 0.0;
  for (double x : value(a).data) acc += x;
  Var v = emplace(Tensor::scalar(acc), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const double g = t.nodes_[out_id].grad.data[0];
    Tensor& ga = t.grad_mut(a);
    for (double& x : ga.data) x += g;
  });
  return v;
}

Var Tape::mean(Var a) {
  const double inv = 1.0 / static_cast<double>(value(a).numel());
  double acc = 0.0;
  for (double x : value(a).data) acc += x;
  Var v = emplace(Tensor::scalar(acc * inv), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const double g = t.nodes_[out_id].grad.data[0] * inv;
    Tensor& ga = t.grad_mut(a);
    for (double& x : ga.data) x += g;
  });
  return v;
}

Var Tape::dot(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  AVSEP_CHECK(ta.numel() == tb.numel(), "dot: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.numel(); ++i) acc += ta.data[i] * tb.data[i];
  Var v = emplace(Tensor::scalar(acc), needs_grad(a) || needs_grad(b), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const double g = t.nodes_[out_id].grad.data[0];
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& vb = t.value(b);
      for (std::size_t i = 0; i < ga.numel(); ++i) ga.data[i] += g * vb.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      const Tensor& va = t.value(a);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb.data[i] += g * va.data[i];
    }
  });
  return v;
}

// ---------------------------------------------------------------------------
// scalar broadcasts

Var Tape::add_bscalar(Var a, Var s) {
  AVSEP_CHECK(value(s).numel() == 1, "add_bscalar: s must be scalar");
  Tensor out = value(a);
  const double sv = value(s).data[0];
  for (double& x : out.data) x += sv;
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(s), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(s)) {
      double acc = 0.0;
      for (double x : g.data) acc += x;
      t.grad_mut(s).data[0] += acc;
    }
  });
  return v;
}

Var Tape::sub_bscalar(Var a, Var s) { return add_bscalar(a, scale(s, -1.0)); }

Var Tape::mul_bscalar(Var a, Var s) {
  AVSEP_CHECK(value(s).numel() == 1, "mul_bscalar: s must be scalar");
  Tensor out = value(a);
  const double sv = value(s).data[0];
  for (double& x : out.data) x *= sv;
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(s), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    const double svv = t.value(s).data[0];
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * svv;
    }
    if (t.needs_grad(s)) {
      const Tensor& va = t.value(a);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) acc += g.data[i] * va.data[i];
      t.grad_mut(s).data[0] += acc;
    }
  });
  return v;
}

Var Tape::div_ss(Var a, Var b) {
  AVSEP_CHECK(value(a).numel() == 1 && value(b).numel() == 1, "div_ss: scalars only");
  const double av = value(a).data[0];
  const double bv = value(b).data[0];
  Var v = emplace(Tensor::scalar(av / bv), needs_grad(a) || needs_grad(b), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const double g = t.nodes_[out_id].grad.data[0];
    const double bb = t.value(b).data[0];
    if (t.needs_grad(a)) t.grad_mut(a).data[0] += g / bb;
    if (t.needs_grad(b)) t.grad_mut(b).data[0] -= g * t.value(a).data[0] / (bb * bb);
  });
  return v;
}

// ---------------------------------------------------------------------------
// linear algebra

Var Tape::matmul(Var w, Var x) {
  const Tensor& tw = value(w);
  const Tensor& tx = value(x);
  AVSEP_CHECK(tw.rank() == 2, "matmul: lhs must be rank 2");
  const int r = tw.dim(0);
  const int k = tw.dim(1);
  AVSEP_CHECK(tx.rows2d() == k, "matmul: inner dim mismatch " << k << " vs " << tx.rows2d());
  const int c = tx.cols2d();

  std::vector<int> out_shape = tx.shape;
  out_shape[0] = r;
  Tensor out(out_shape);
  as_matrix(out, r, c).noalias() = as_matrix(tw, r, k) * as_matrix(tx, k, c);

  Var v = emplace(std::move(out), needs_grad(w) || needs_grad(x), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    ConstMatMap gm(g.data.data(), r, c);
    if (t.needs_grad(w)) {
      MatMap gw = as_matrix(t.grad_mut(w), r, k);
      gw.noalias() += gm * as_matrix(t.value(x), k, c).transpose();
    }
    if (t.needs_grad(x)) {
      MatMap gx = as_matrix(t.grad_mut(x), k, c);
      gx.noalias() += as_matrix(t.value(w), r, k).transpose() * gm;
    }
  });
  return v;
}

Var Tape::transpose(Var x) {
  const Tensor& tx = value(x);
  AVSEP_CHECK(tx.rank() == 2, "transpose: rank-2 only");
  const int r = tx.dim(0), c = tx.dim(1);
  Tensor out({c, r});
  as_matrix(out, c, r) = as_matrix(tx, r, c).transpose();
  Var v = emplace(std::move(out), needs_grad(x), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    MatMap gx = as_matrix(t.grad_mut(x), r, c);
    gx.noalias() += ConstMatMap(g.data.data(), c, r).transpose();
  });
  return v;
}

Var Tape::add_bias_rows(Var m, Var bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  const int r = tm.rows2d(), c = tm.cols2d();
  AVSEP_CHECK(tb.numel() == static_cast<std::size_t>(r), "add_bias_rows: bias size");
  Tensor out = tm;
  for (int i = 0; i < r; ++i) {
    const double bv = tb.data[i];
    double* row = out.data.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) row[j] += bv;
  }
  Var v = emplace(std::move(out), needs_grad(m) || needs_grad(bias), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    if (t.needs_grad(m)) {
      Tensor& gm = t.grad_mut(m);
      for (std::size_t i = 0; i < g.numel(); ++i) gm.data[i] += g.data[i];
    }
    if (t.needs_grad(bias)) {
      Tensor& gb = t.grad_mut(bias);
      for (int i = 0; i < r; ++i) {
        const double* row = g.data.data() + static_cast<std::size_t>(i) * c;
        double acc = 0.0;
        for (int j = 0; j < c; ++j) acc += row[j];
        gb.data[i] += acc;
      }
    }
  });
  return v;
}

Var Tape::add_bias_cols(Var m, Var bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  AVSEP_CHECK(tm.rank() == 2, "add_bias_cols: rank-2 only");
  const int r = tm.dim(0), c = tm.dim(1);
  AVSEP_CHECK(tb.numel() == static_cast<std::size_t>(c), "add_bias_cols: bias size");
  Tensor out = tm;
  for (int i = 0; i < r; ++i) {
    double* row = out.data.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) row[j] += tb.data[j];
  }
  Var v = emplace(std::move(out), needs_grad(m) || needs_grad(bias), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    if (t.needs_grad(m)) {
      Tensor& gm = t.grad_mut(m);
      for (std::size_t i = 0; i < g.numel(); ++i) gm.data[i] += g.data[i];
    }
    if (t.needs_grad(bias)) {
      Tensor& gb = t.grad_mut(bias);
      for (int i = 0; i < r; ++i) {
        const double* row = g.data.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) gb.data[j] += row[j];
      }
    }
  });
  return v;
}

// ---------------------------------------------------------------------------
// structure

Var Tape::concat_rows(const std::vector<Var>& parts) {
  AVSEP_CHECK(!parts.empty(), "concat_rows: no parts");
  int total_rows = 0;
  const int cols = value(parts[0]).cols2d();
  bool ng = false;
  for (Var p : parts) {
    AVSEP_CHECK(value(p).cols2d() == cols, "concat_rows: column mismatch");
    total_rows += value(p).rows2d();
    ng = ng || needs_grad(p);
  }
  std::vector<int> shape = value(parts[0]).shape;
  shape[0] = total_rows;
  Tensor out(shape);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + off);
    off += tp.numel();
  }
  std::vector<Var> parts_copy = parts;
  Var v = emplace(std::move(out), ng, nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    std::size_t o = 0;
    for (Var p : parts_copy) {
      const std::size_t n = t.value(p).numel();
      if (t.needs_grad(p)) {
        Tensor& gp = t.grad_mut(p);
        for (std::size_t i = 0; i < n; ++i) gp.data[i] += g.data[o + i];
      }
      o += n;
    }
  });
  return v;
}

Var Tape::slice_cols(Var m, int c0, int c1) {
  const Tensor& tm = value(m);
  AVSEP_CHECK(tm.rank() == 2, "slice_cols: rank-2 only");
  const int r = tm.dim(0), c = tm.dim(1);
  AVSEP_CHECK(0 <= c0 && c0 < c1 && c1 <= c, "slice_cols: bad range");
  const int w = c1 - c0;
  Tensor out({r, w});
  for (int i = 0; i < r; ++i) {
    const double* src = tm.data.data() + static_cast<std::size_t>(i) * c + c0;
    std::copy(src, src + w, out.data.begin() + static_cast<std::size_t>(i) * w);
  }
  Var v = emplace(std::move(out), needs_grad(m), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    Tensor& gm = t.grad_mut(m);
    for (int i = 0; i < r; ++i) {
      double* dst = gm.data.data() + static_cast<std::size_t>(i) * c + c0;
      const double* src = g.data.data() + static_cast<std::size_t>(i) * w;
      for (int j = 0; j < w; ++j) dst[j] += src[j];
    }
  });
  return v;
}

Var Tape::gather_rows(Var m, std::vector<int> idx) {
  const Tensor& tm = value(m);
  const int c = tm.cols2d();
  const int r = tm.rows2d();
  Tensor out({static_cast<int>(idx.size()), c});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    AVSEP_CHECK(idx[i] >= 0 && idx[i] < r, "gather_rows: index out of range");
    const double* src = tm.data.data() + static_cast<std::size_t>(idx[i]) * c;
    std::copy(src, src + c, out.data.begin() + i * c);
  }
  Var v = emplace(std::move(out), needs_grad(m), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    Tensor& gm = t.grad_mut(m);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = gm.data.data() + static_cast<std::size_t>(idx[i]) * c;
      const double* src = g.data.data() + i * c;
      for (int j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
  return v;
}

Var Tape::reshape(Var a, std::vector<int> new_shape) {
  const Tensor& ta = value(a);
  AVSEP_CHECK(Tensor::numel_of(new_shape) == ta.numel(), "reshape: numel mismatch");
  Tensor out(new_shape, ta.data);
  Var v = emplace(std::move(out), needs_grad(a), nullptr);
  AVSEP_DEFINE_BACKWARD(v, {
    const Tensor& g = t.nodes_[out_id].grad;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
  });
  return v;
}

double rel_max_error(const Tensor& a, const Tensor& b, double floor) {
  AVSEP_CHECK(a.numel() == b.numel(), "rel_max_error: size mismatch");
  double max_diff = 0.0, max_ref = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    max_diff = std::max(max_diff, std::fabs(a.data[i] - b.data[i]));
    max_ref = std::max(max_ref, std::fabs(b.data[i]));
  }
  return max_diff / std::max(max_ref, floor);
}

}  // namespace avsep::ad
