// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/params.h"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>

#include "avsep/error.h"

namespace avsep {

ad::Tensor& ParamStore::add(const std::string& name, ad::Tensor init) {
  AVSEP_CHECK(!has(name), "duplicate parameter '" << name << "'");
  names_.push_back(name);
  grads_.emplace(name, ad::Tensor(init.shape));
  adam_m_.emplace(name, ad::Tensor(init.shape));
  adam_v_.emplace(name, ad::Tensor(init.shape));
  return values_.emplace(name, std::move(init)).first->second;
}

ad::Tensor& ParamStore::at(const std::string& name) {
  auto it = values_.find(name);
  AVSEP_CHECK(it != values_.end(), "unknown parameter '" << name << "'");
  return it->second;
}

const ad::Tensor& ParamStore::at(const std::string& name) const {
  auto it = values_.find(name);
  AVSEP_CHECK(it != values_.end(), "unknown parameter '" << name << "'");
  return it->second;
}

ad::Tensor& ParamStore::grad_at(const std::string& name) {
  auto it = grads_.find(name);
  AVSEP_CHECK(it != grads_.end(), "unknown parameter '" << name << "'");
  return it->second;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& name : names_) n += values_.at(name).numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, g] : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
}

double ParamStore::grad_norm() const {
  double acc = 0.0;
  for (const auto& name : names_) {
    for (double x : grads_.at(name).data) acc += x * x;
  }
  return std::sqrt(acc);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  AVSEP_CHECK_FINITE(std::isfinite(norm), "gradient norm is not finite");
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads_) {
      for (double& x : g.data) x *= scale;
    }
  }
  return norm;
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
  for (const auto& name : names_) {
    ad::Tensor& w = values_.at(name);
    const ad::Tensor& g = grads_.at(name);
    ad::Tensor& m = adam_m_.at(name);
    ad::Tensor& v = adam_v_.at(name);
    for (std::size_t i = 0; i < w.numel(); ++i) {
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      w.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::uint64_t ParamStore::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64-bit offset basis
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& name : names_) {
    mix_bytes(name.data(), name.size());
    const ad::Tensor& w = values_.at(name);
    mix_bytes(w.data.data(), w.data.size() * sizeof(double));
  }
  return h;
}

ad::Tensor glorot_uniform(Rng& rng, std::vector<int> shape, int fan_in, int fan_out) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  ad::Tensor t(std::move(shape));
  for (double& x : t.data) x = rng.uniform(-a, a);
  return t;
}

ad::Tensor orthogonal(Rng& rng, int rows, int cols, double gain) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  ad::Tensor t({rows, cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double v = rows >= cols ? q(i, j) : q(j, i);
      t.data[static_cast<std::size_t>(i) * cols + j] = gain * v;
    }
  return t;
}

ad::Tensor zeros(std::vector<int> shape) { return ad::Tensor(std::move(shape)); }

ad::Tensor full(std::vector<int> shape, double value) {
  ad::Tensor t(std::move(shape));
  std::fill(t.data.begin(), t.data.end(), value);
  return t;
}

}  // namespace avsep
