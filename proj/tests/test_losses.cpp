// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/losses.h"

#include <cmath>
#include <vector>

#include "avsep/error.h"
#include "avsep/metrics.h"
#include "avsep/nn_ops.h"
#include "avsep/rng.h"
#include "doctest.h"
#include "grad_check.h"
#include "json.hpp"

using avsep::AudioClip;
using avsep::LossReport;
using avsep::Rng;
using avsep::StftParams;
using avsep::ad::Tape;
using avsep::ad::Tensor;
using avsep::ad::Var;
using avsep_test::check_gradients;

namespace {

std::vector<double> random_signal(Rng& rng, int len, double scale = 0.3) {
  std::vector<double> s(len);
  for (double& v : s) v = scale * rng.normal();
  return s;
}

double sisdr_loss_value(const std::vector<double>& est, const std::vector<double>& ref) {
  Tape t;
  Var e = t.leaf(Tensor({static_cast<int>(est.size())}, est));
  return t.scalar_value(avsep::sisdr_loss(t, e, ref));
}

}  // namespace

TEST_CASE("loss report identities validate and serialize") {
  LossReport r;
  r.per_layer = {3.0, 1.0};
  r.total = 2.0;
  r.dereverb = 0.5;
  r.joint = 2.5;
  r.objective = 2.5;
  avsep::validate_loss_report(r);

  nlohmann::json j = nlohmann::json::parse(avsep::loss_report_json(r));
  CHECK(j.at("total") == 2.0);
  CHECK(j.at("joint") == 2.5);
  CHECK(j.at("per_layer").size() == 2);

  LossReport broken_total = r;
  broken_total.total = 2.1;
  CHECK_THROWS_AS(avsep::validate_loss_report(broken_total), avsep::ValidationError);
  LossReport broken_joint = r;
  broken_joint.joint = 2.4999;
  CHECK_THROWS_AS(avsep::validate_loss_report(broken_joint), avsep::ValidationError);
  LossReport nan_field = r;
  nan_field.dereverb = std::nan("");
  CHECK_THROWS_AS(avsep::validate_loss_report(nan_field), avsep::NumericalDivergence);
}

TEST_CASE("negated sisdr loss agrees with the evaluation metric") {
  Rng rng(5);
  const int len = 400;
  std::vector<double> ref = random_signal(rng, len);
  std::vector<double> noise = random_signal(rng, len, 0.1);
  std::vector<double> est(len);
  for (int i = 0; i < len; ++i) est[i] = ref[i] + noise[i];

  const double loss = sisdr_loss_value(est, ref);
  const double metric = avsep::sisdr(AudioClip(est, 8000), AudioClip(ref, 8000));
  // The loss keeps 1e-8 energy floors the metric lacks; for signals of this
  // energy that shifts the value by about 1e-8 dB.
  CHECK(loss == doctest::Approx(-metric).epsilon(1e-7));
}

TEST_CASE("sisdr loss is scale invariant and bounded at perfect estimates") {
  Rng rng(9);
  const int len = 400;
  std::vector<double> ref = random_signal(rng, len);
  std::vector<double> noisy(len), noisy3(len);
  std::vector<double> noise = random_signal(rng, len, 0.2);
  for (int i = 0; i < len; ++i) {
    noisy[i] = ref[i] + noise[i];
    noisy3[i] = 3.0 * noisy[i];
  }
  CHECK(sisdr_loss_value(noisy, ref) ==
        doctest::Approx(sisdr_loss_value(noisy3, ref)).epsilon(1e-6));

  // A perfect estimate is held near -10*log10(E/eps) by the epsilon floor
  // rather than diverging.
  const double perfect = sisdr_loss_value(ref, ref);
  CHECK(perfect < -60.0);
  CHECK(std::isfinite(perfect));
}

TEST_CASE("sisdr loss decreases strictly as the estimate approaches the reference") {
  Rng rng(11);
  const int len = 800;
  std::vector<double> ref = random_signal(rng, len);
  std::vector<double> noise = random_signal(rng, len, 0.5);
  double prev = 0.0;
  bool first = true;
  for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::vector<double> est(len);
    for (int i = 0; i < len; ++i) est[i] = ref[i] + (1.0 - alpha) * noise[i];
    const double v = sisdr_loss_value(est, ref);
    if (!first) CHECK(v < prev);
    prev = v;
    first = false;
  }
}

TEST_CASE("sisdr loss gradient matches finite differences") {
  Rng rng(3);
  const int len = 120;
  std::vector<double> ref = random_signal(rng, len);
  Tensor est({len});
  for (int i = 0; i < len; ++i) est.data[i] = ref[i] + 0.3 * rng.normal();
  check_gradients({est},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return avsep::sisdr_loss(t, in[0], ref);
                  },
                  1e-5);
}

TEST_CASE("progressive loss is the mean of its per-layer terms") {
  Rng rng(17);
  const int len = 200, K = 3;
  std::vector<std::vector<double>> targets;
  std::vector<Tensor> ests;
  for (int k = 0; k < K; ++k) {
    targets.push_back(random_signal(rng, len));
    Tensor e({len});
    for (int i = 0; i < len; ++i) e.data[i] = targets[k][i] + 0.2 * rng.normal();
    ests.push_back(e);
  }
  Tape t;
  std::vector<Var> leaves;
  for (const Tensor& e : ests) leaves.push_back(t.leaf(e));
  avsep::ProgressiveLoss pl = avsep::progressive_loss(t, leaves, targets);
  REQUIRE(pl.per_layer.size() == K);
  double mean = 0.0;
  for (Var v : pl.per_layer) mean += t.scalar_value(v);
  mean /= K;
  CHECK(t.scalar_value(pl.total) == doctest::Approx(mean).epsilon(1e-12));

  // Each layer's estimate only receives gradient from its own term.
  t.backward(pl.total);
  for (int k = 0; k < K; ++k) {
    Tape solo;
    Var e = solo.leaf(ests[k]);
    solo.backward(avsep::sisdr_loss(solo, e, targets[k]));
    const Tensor& g_joint = t.grad(leaves[k]);
    const Tensor& g_solo = solo.grad(e);
    for (int i = 0; i < len; ++i)
      CHECK(g_joint.data[i] == doctest::Approx(g_solo.data[i] / K).epsilon(1e-9));
  }
}

TEST_CASE("spectral loss is zero at the reference and matches a direct oracle") {
  Rng rng(23);
  const int len = 256;
  std::vector<double> ref = random_signal(rng, len);
  StftParams p;
  p.fft_size = 64;
  p.hop = 32;
  p.sample_rate = 8000;
  const std::vector<StftParams> res = {p};

  {
    Tape t;
    Var e = t.leaf(Tensor({len}, ref));
    CHECK(t.scalar_value(avsep::multires_stft_loss(t, e, ref, res)) < 1e-9);
  }

  std::vector<double> est(len);
  for (int i = 0; i < len; ++i) est[i] = ref[i] + 0.2 * rng.normal();
  double value;
  {
    Tape t;
    Var e = t.leaf(Tensor({len}, est));
    value = t.scalar_value(avsep::multires_stft_loss(t, e, ref, res));
  }
  CHECK(value > 0.0);

  // Independent oracle: spectral convergence + L1 log distance from plain
  // transforms, same epsilon conventions as the tape ops.
  const avsep::Spectrogram se = avsep::stft(AudioClip(est, p.sample_rate), p);
  const avsep::Spectrogram sr = avsep::stft(AudioClip(ref, p.sample_rate), p);
  const double eps = 1e-8;
  double num = 0.0, den = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < se.bins.size(); ++i) {
    const double me = std::sqrt(std::norm(se.bins[i]) + eps * eps);
    const double mr = std::sqrt(std::norm(sr.bins[i]) + eps * eps);
    num += (me - mr) * (me - mr);
    den += mr * mr;
    l1 += std::fabs(std::log(me) - std::log(mr));
  }
  const double oracle = std::sqrt(num + 1e-24) / (std::sqrt(den) + eps) +
                        l1 / static_cast<double>(se.bins.size());
  CHECK(value == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("spectral loss averages resolutions and its gradient checks out") {
  Rng rng(29);
  const int len = 160;
  std::vector<double> ref = random_signal(rng, len);
  StftParams a, b;
  a.fft_size = 64;
  a.hop = 32;
  a.sample_rate = 8000;
  b.fft_size = 32;
  b.hop = 8;
  b.sample_rate = 8000;

  Tensor est({len});
  for (int i = 0; i < len; ++i) est.data[i] = ref[i] + 0.3 * rng.normal();

  auto value_for = [&](const std::vector<StftParams>& res) {
    Tape t;
    Var e = t.leaf(Tensor({len}, est.data));
    return t.scalar_value(avsep::multires_stft_loss(t, e, ref, res));
  };
  CHECK(value_for({a, b}) ==
        doctest::Approx(0.5 * (value_for({a}) + value_for({b}))).epsilon(1e-12));

  check_gradients({est},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return avsep::multires_stft_loss(t, in[0], ref, {a, b});
                  },
                  1e-4);

  const std::vector<StftParams> defaults = avsep::stft_loss_resolutions(16000);
  REQUIRE(defaults.size() == 3);
  for (const StftParams& d : defaults) avsep::validate_stft_params(d);
  CHECK(defaults[0].fft_size == 512);
  CHECK(defaults[2].hop == 512);
}

TEST_CASE("log-magnitude mse matches brute force") {
  // Hand example first: mean of squared differences.
  {
    Tape t;
    Var e = t.leaf(Tensor({2, 2}, {1.0, 1.0, -1.0, -1.0}));
    Tensor target({2, 2}, {1.0, 0.0, -1.0, 0.0});
    CHECK(t.scalar_value(avsep::logmag_mse_loss(t, e, target)) ==
          doctest::Approx(0.5).epsilon(1e-15));
  }

  Rng rng(31);
  Tensor enh({6, 9}), target({6, 9});
  for (double& v : enh.data) v = rng.normal();
  for (double& v : target.data) v = rng.normal();
  double brute = 0.0;
  for (std::size_t i = 0; i < enh.numel(); ++i) {
    const double d = enh.data[i] - target.data[i];
    brute += d * d;
  }
  brute /= static_cast<double>(enh.numel());
  Tape t;
  Var e = t.leaf(enh);
  CHECK(t.scalar_value(avsep::logmag_mse_loss(t, e, target)) ==
        doctest::Approx(brute).epsilon(1e-12));

  check_gradients({enh},
                  [&](Tape& tp, const std::vector<Var>& in) {
                    return avsep::logmag_mse_loss(tp, in[0], target);
                  },
                  1e-6);
}

TEST_CASE("logmag_tensor matches the tape logmag on the same clip") {
  Rng rng(37);
  StftParams p;
  p.fft_size = 64;
  p.hop = 32;
  p.sample_rate = 8000;
  AudioClip clip(random_signal(rng, 320), p.sample_rate);
  Tensor direct = avsep::logmag_tensor(clip, p);

  Tape t;
  Var w = t.constant(Tensor({320}, clip.samples));
  Var lm = avsep::ad::logmag(t, avsep::ad::stft_var(t, w, p));
  const Tensor& tape_lm = t.value(lm);
  REQUIRE(tape_lm.shape == direct.shape);
  for (std::size_t i = 0; i < direct.numel(); ++i)
    CHECK(tape_lm.data[i] == doctest::Approx(direct.data[i]).epsilon(1e-12));
}

TEST_CASE("gradient of a sum of losses is the sum of the gradients") {
  Rng rng(41);
  const int len = 256;
  std::vector<double> ref = random_signal(rng, len);
  Tensor est({len});
  for (int i = 0; i < len; ++i) est.data[i] = ref[i] + 0.2 * rng.normal();
  StftParams p;
  p.fft_size = 64;
  p.hop = 32;
  p.sample_rate = 8000;

  Tensor g_sum, g_a, g_b;
  {
    Tape t;
    Var e = t.leaf(est);
    t.backward(t.add(avsep::sisdr_loss(t, e, ref),
                     avsep::multires_stft_loss(t, e, ref, {p})));
    g_sum = t.grad(e);
  }
  {
    Tape t;
    Var e = t.leaf(est);
    t.backward(avsep::sisdr_loss(t, e, ref));
    g_a = t.grad(e);
  }
  {
    Tape t;
    Var e = t.leaf(est);
    t.backward(avsep::multires_stft_loss(t, e, ref, {p}));
    g_b = t.grad(e);
  }
  for (int i = 0; i < len; ++i)
    CHECK(g_sum.data[i] == doctest::Approx(g_a.data[i] + g_b.data[i]).epsilon(1e-9));
}
