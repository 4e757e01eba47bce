// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <benchmark/benchmark.h>

#include "avsep/nn_ops.h"
#include "avsep/rng.h"

namespace {

using avsep::Rng;
using avsep::ad::Tape;
using avsep::ad::Tensor;
using avsep::ad::Var;

Tensor randn(Rng& rng, std::vector<int> shape, double scale = 0.3) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

// Forward+backward of one bidirectional time sweep at the toy training shape
// (C=8, F=129, N=32), the inner loop of the acceptance training run.
void BM_GruSweepFwdBwd(benchmark::State& state) {
  Rng rng(1);
  const int C = 8, H = 16;
  const Tensor x = randn(rng, {C, 129, 32});
  const Tensor wih = randn(rng, {3 * H, C});
  const Tensor bih = randn(rng, {3 * H});
  const Tensor whh = randn(rng, {3 * H, H});
  const Tensor bhh = randn(rng, {3 * H});
  for (auto _ : state) {
    Tape t;
    const Var xv = t.leaf(x);
    const Var y = gru_sweep(t, xv, t.leaf(wih), t.leaf(bih), t.leaf(whh), t.leaf(bhh),
                            avsep::ad::GruAxis::kTime, false);
    t.backward(t.sum(t.square(y)));
    benchmark::DoNotOptimize(t.grad(xv).data.data());
  }
}
BENCHMARK(BM_GruSweepFwdBwd);

void BM_Conv2dFwdBwd(benchmark::State& state) {
  Rng rng(2);
  const avsep::ad::Conv2dSpec s{8, 8, 3, 3, 1, 1};
  const Tensor x = randn(rng, {8, 129, 32});
  const Tensor w = randn(rng, {8, 72});
  const Tensor b = randn(rng, {8});
  for (auto _ : state) {
    Tape t;
    const Var xv = t.leaf(x);
    const Var y = conv2d(t, xv, t.leaf(w), t.leaf(b), s);
    t.backward(t.sum(t.square(y)));
    benchmark::DoNotOptimize(t.grad(xv).data.data());
  }
}
BENCHMARK(BM_Conv2dFwdBwd);

}  // namespace
