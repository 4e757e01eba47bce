// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/dereverb.h"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "avsep/error.h"
#include "avsep/rng.h"
#include "avsep/stft.h"
#include "doctest.h"

using avsep::AudioClip;
using avsep::Dereverb;
using avsep::DereverbConfig;
using avsep::Rng;
using avsep::ad::Tape;
using avsep::ad::Tensor;
using avsep::ad::Var;

namespace {

DereverbConfig tiny_config(int depth, int base) {
  DereverbConfig cfg;
  cfg.depth = depth;
  cfg.base_channels = base;
  cfg.stft.fft_size = 64;
  cfg.stft.hop = 32;
  cfg.stft.sample_rate = 8000;
  return cfg;
}

AudioClip random_clip(Rng& rng, int len, int sr) {
  std::vector<double> s(len);
  for (double& v : s) v = 0.3 * rng.normal();
  return AudioClip(s, sr);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("dereverb starts as an exact spectrogram identity") {
  Rng rng(4);
  // Lengths chosen so padded grid sizes both divide and do not divide 2^depth.
  for (int len : {1600, 1632, 2048}) {
    for (int depth : {1, 2, 3}) {
      DereverbConfig cfg = tiny_config(depth, 3);
      Dereverb model(cfg, 17);
      AudioClip in = random_clip(rng, len, cfg.stft.sample_rate);
      AudioClip out = model.forward(in);
      REQUIRE(out.size() == in.size());
      CHECK(out.sample_rate == in.sample_rate);

      // Zero head means gain exp(0)=1, so the output equals the plain
      // transform round trip of the input, bit for bit.
      AudioClip round = avsep::istft(avsep::stft(in, cfg.stft));
      CHECK(max_abs_diff(out.samples, round.samples) == 0.0);
      // And the round trip itself reconstructs the waveform.
      CHECK(max_abs_diff(out.samples, in.samples) < 1e-9);

      Tape t;
      Dereverb::GraphOutput g = model.forward_graph(t, in);
      CHECK(max_abs_diff(t.value(g.enhanced_logmag).data, t.value(g.input_logmag).data) ==
            0.0);
    }
  }
}

TEST_CASE("dereverb construction is deterministic in the seed") {
  DereverbConfig cfg = tiny_config(2, 3);
  Dereverb a(cfg, 5), b(cfg, 5), c(cfg, 6);
  CHECK(a.params().content_hash() == b.params().content_hash());
  CHECK(a.params().content_hash() != c.params().content_hash());
}

TEST_CASE("dereverb parameter gradients match finite differences") {
  DereverbConfig cfg = tiny_config(2, 2);
  Dereverb model(cfg, 9);
  Rng rng(31);
  const int len = 320;
  AudioClip in = random_clip(rng, len, cfg.stft.sample_rate);
  const int f_bins = cfg.stft.num_bins();
  const int n_frames = cfg.stft.num_frames(static_cast<std::size_t>(len));
  Tensor target({f_bins, n_frames});
  for (double& v : target.data) v = 0.1 * rng.normal();

  // The head starts at zero, which would zero most of the interesting
  // gradient paths; move it off the origin first.
  for (double& v : model.params().at("out.w").data) v = 0.05 * rng.normal();
  model.params().at("out.b").data[0] = 0.01;

  auto loss_value = [&]() {
    Tape t;
    Dereverb::GraphOutput g = model.forward_graph(t, in);
    Var ref = t.constant(target);
    return t.scalar_value(t.mean(t.square(t.sub(g.enhanced_logmag, ref))));
  };

  model.params().zero_grad();
  {
    Tape t;
    Dereverb::GraphOutput g = model.forward_graph(t, in);
    Var ref = t.constant(target);
    t.backward(t.mean(t.square(t.sub(g.enhanced_logmag, ref))));
  }

  const double h = 1e-5;
  for (const std::string& name :
       {"enc0.w", "enc1.w", "dec1.w", "dec0.w", "out.w", "out.b", "enc0.b"}) {
    Tensor& p = model.params().at(name);
    const Tensor& g = model.params().grad_at(name);
    const std::size_t stride = std::max<std::size_t>(1, p.numel() / 5);
    for (std::size_t j = 0; j < p.numel(); j += stride) {
      const double saved = p.data[j];
      p.data[j] = saved + h;
      const double fp = loss_value();
      p.data[j] = saved - h;
      const double fm = loss_value();
      p.data[j] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double err = std::fabs(g.data[j] - fd) / std::max(1.0, std::fabs(fd));
      CAPTURE(name);
      CAPTURE(j);
      REQUIRE(err < 1e-3);
    }
  }
}

TEST_CASE("dereverb graph composes with an upstream waveform variable") {
  DereverbConfig cfg = tiny_config(2, 2);
  Dereverb model(cfg, 12);
  Rng rng(8);
  const int len = 320;
  AudioClip in = random_clip(rng, len, cfg.stft.sample_rate);

  Tape t;
  Var wave = t.leaf(Tensor({len}, in.samples));
  Dereverb::GraphOutput g =
      model.forward_graph_from(t, wave, len, cfg.stft.sample_rate);
  t.backward(t.mean(t.square(g.wave)));
  double norm = 0.0;
  for (double v : t.grad(wave).data) norm += v * v;
  CHECK(norm > 0.0);
  for (double v : t.grad(wave).data) CHECK(std::isfinite(v));
}

TEST_CASE("dereverb rejects bad configs and inputs") {
  DereverbConfig cfg = tiny_config(0, 2);
  CHECK_THROWS_AS(avsep::validate_dereverb_config(cfg), avsep::ValidationError);
  cfg.depth = 1;
  cfg.base_channels = 0;
  CHECK_THROWS_AS(avsep::validate_dereverb_config(cfg), avsep::ValidationError);

  DereverbConfig ok = tiny_config(2, 2);
  Dereverb model(ok, 1);
  Rng rng(2);
  AudioClip wrong_rate = random_clip(rng, 320, 16000);
  CHECK_THROWS_AS(model.forward(wrong_rate), avsep::ValidationError);
}

TEST_CASE("non-finite dereverb output reports numerical divergence") {
  DereverbConfig cfg = tiny_config(2, 2);
  Dereverb model(cfg, 3);
  model.params().at("out.b").data[0] = std::numeric_limits<double>::infinity();
  Rng rng(6);
  AudioClip in = random_clip(rng, 320, cfg.stft.sample_rate);
  CHECK_THROWS_AS(model.forward(in), avsep::NumericalDivergence);
}
