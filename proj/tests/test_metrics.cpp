// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/metrics.h"

#include <cmath>
#include <vector>

#include "avsep/error.h"
#include "avsep/rng.h"
#include "doctest.h"

using avsep::AudioClip;
using avsep::Rng;

namespace {

// Direct-formula SI-SDR, written independently of the library code path.
double sisdr_oracle(std::vector<double> e, std::vector<double> r) {
  double me = 0.0, mr = 0.0;
  for (double v : e) me += v;
  for (double v : r) mr += v;
  me /= static_cast<double>(e.size());
  mr /= static_cast<double>(r.size());
  for (double& v : e) v -= me;
  for (double& v : r) v -= mr;
  double dot = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    dot += e[i] * r[i];
    rr += r[i] * r[i];
  }
  const double alpha = dot / rr;
  double target = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double t = alpha * r[i];
    target += t * t;
    const double d = e[i] - t;
    resid += d * d;
  }
  double db = 10.0 * std::log10(target / resid);
  if (db > 60.0) db = 60.0;
  if (db < -60.0) db = -60.0;
  return db;
}

AudioClip clip_of(std::vector<double> v, int sr = 16000) {
  return AudioClip(std::move(v), sr);
}

// Voiced-speech stand-in: harmonic series on a 120 Hz fundamental with a
// formant-ish spectral tilt and a 4 Hz syllabic energy modulation.
AudioClip harmonic_speech_like(double seconds, int sr, double f0 = 120.0) {
  AudioClip c;
  c.sample_rate = sr;
  c.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    const double t = static_cast<double>(i) / sr;
    double v = 0.0;
    for (int h = 1; h <= 12; ++h) {
      if (f0 * h >= sr / 2.0) break;
      v += std::sin(2.0 * M_PI * f0 * h * t + 0.7 * h) / (1.0 + 0.5 * (h - 1));
    }
    const double envelope = 0.55 + 0.45 * std::sin(2.0 * M_PI * 4.0 * t);
    c.samples[i] = 0.25 * envelope * v;
  }
  return c;
}

}  // namespace

TEST_CASE("sisdr matches the brute-force oracle on 1000 random pairs") {
  Rng rng(123);
  double max_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> e(256), r(256);
    for (double& v : e) v = rng.normal();
    for (double& v : r) v = rng.normal();
    const double got = avsep::sisdr(clip_of(e), clip_of(r));
    const double want = sisdr_oracle(e, r);
    max_err = std::max(max_err, std::fabs(got - want));
  }
  CHECK(max_err < 1e-9);
}

TEST_CASE("identical and scaled estimates hit the +60 dB cap") {
  Rng rng(5);
  std::vector<double> r(512);
  for (double& v : r) v = rng.normal();
  CHECK(avsep::sisdr(clip_of(r), clip_of(r)) == doctest::Approx(60.0));
  std::vector<double> e3(r);
  for (double& v : e3) v *= 3.0;
  CHECK(avsep::sisdr(clip_of(e3), clip_of(r)) == doctest::Approx(60.0));
}

TEST_CASE("worked example: alpha=1 with equal target and residual energy") {
  const AudioClip est = clip_of({1.0, 1.0, -1.0, -1.0});
  const AudioClip ref = clip_of({1.0, 0.0, -1.0, 0.0});
  CHECK(avsep::sisdr(est, ref) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sisdr is invariant to estimate gain") {
  Rng rng(17);
  std::vector<double> r(300), e(300);
  for (double& v : r) v = rng.normal();
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = r[i] + 0.5 * rng.normal();
  const double base = avsep::sisdr(clip_of(e), clip_of(r));
  for (double c : {0.1, 1.0, 10.0, -1.0}) {
    std::vector<double> ce(e);
    for (double& v : ce) v *= c;
    CHECK(std::fabs(avsep::sisdr(clip_of(ce), clip_of(r)) - base) < 1e-6);
  }
}

TEST_CASE("sisdr input validation") {
  Rng rng(9);
  std::vector<double> r(100);
  for (double& v : r) v = rng.normal();
  CHECK_THROWS_AS(avsep::sisdr(clip_of({1.0, 2.0}), clip_of(r)), avsep::ValidationError);
  CHECK_THROWS_AS(avsep::sisdr(clip_of(r), clip_of(std::vector<double>(100, 0.0))),
                  avsep::ValidationError);
}

TEST_CASE("stoi of a signal with itself is 1") {
  const AudioClip x = harmonic_speech_like(1.0, 16000);
  CHECK(avsep::stoi(x, x) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("stoi is insensitive to waveform polarity") {
  // Band energies are magnitudes, so -x and x share every envelope.
  const AudioClip x = harmonic_speech_like(1.0, 16000);
  AudioClip neg = x;
  for (double& v : neg.samples) v = -v;
  CHECK(avsep::stoi(neg, x) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("stoi of white noise against speech-like audio is low") {
  const AudioClip ref = harmonic_speech_like(2.0, 16000);
  Rng rng(31);
  AudioClip noise;
  noise.sample_rate = 16000;
  noise.samples.resize(ref.samples.size());
  for (double& v : noise.samples) v = 0.1 * rng.normal();
  const double value = avsep::stoi(noise, ref);
  CHECK(value >= 0.0);
  CHECK(value < 0.3);
}

TEST_CASE("stoi stays in [0,1] and degrades with added noise") {
  const AudioClip ref = harmonic_speech_like(1.5, 16000);
  Rng rng(77);
  double prev = 1.1;
  for (double noise_gain : {0.02, 0.2, 2.0}) {
    AudioClip noisy = ref;
    Rng local(91);
    for (double& v : noisy.samples) v += noise_gain * 0.1 * local.normal();
    const double value = avsep::stoi(noisy, ref);
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
    CHECK(value <= prev + 1e-9);
    prev = value;
  }
}

TEST_CASE("stoi rejects clips shorter than one analysis segment") {
  const AudioClip x = harmonic_speech_like(0.3, 16000);  // < 384 ms
  CHECK_THROWS_WITH_AS(avsep::stoi(x, x), doctest::Contains("too short"),
                       avsep::ValidationError);
}

TEST_CASE("compute_metrics bundles both values") {
  const AudioClip x = harmonic_speech_like(1.0, 16000);
  const avsep::MetricResult m = avsep::compute_metrics(x, x);
  CHECK(m.sisdr_db == doctest::Approx(60.0));
  CHECK(m.stoi == doctest::Approx(1.0).epsilon(1e-6));
}
