// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/stft.h"

#include <cmath>
#include <vector>

#include "avsep/error.h"
#include "avsep/rng.h"
#include "doctest.h"

using avsep::AudioClip;
using avsep::Rng;
using avsep::Spectrogram;
using avsep::StftParams;

namespace {

AudioClip random_clip(Rng& rng, std::size_t n, int sr) {
  AudioClip c;
  c.sample_rate = sr;
  c.samples.resize(n);
  for (double& v : c.samples) v = rng.normal();
  return c;
}

double rel_l2_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("48000-sample clip at the default resolution has 257 bins") {
  Rng rng(1);
  const AudioClip x = random_clip(rng, 48000, 16000);
  const Spectrogram s = avsep::stft(x, StftParams{});
  CHECK(s.num_bins == 257);
  CHECK(s.num_frames == 1 + 48000 / 256);
}

TEST_CASE("istft(stft(x)) round-trips within 1e-6 relative L2") {
  Rng rng(2);
  // Lengths deliberately include non-multiples of the hop.
  for (std::size_t n : {2048u, 12345u, 48000u}) {
    const AudioClip x = random_clip(rng, n, 16000);
    const AudioClip back = avsep::istft(avsep::stft(x, StftParams{}));
    REQUIRE(back.samples.size() == n);
    CHECK(rel_l2_error(back.samples, x.samples) < 1e-6);
  }
}

TEST_CASE("round-trip holds for the toy 8 kHz resolution") {
  Rng rng(3);
  StftParams p;
  p.fft_size = 256;
  p.hop = 128;
  p.sample_rate = 8000;
  const AudioClip x = random_clip(rng, 8000, 8000);
  const AudioClip back = avsep::istft(avsep::stft(x, p));
  REQUIRE(back.samples.size() == x.samples.size());
  CHECK(rel_l2_error(back.samples, x.samples) < 1e-6);
}

TEST_CASE("pure 1 kHz sine concentrates energy at bin 32") {
  AudioClip x;
  x.sample_rate = 16000;
  x.samples.resize(16000);
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    x.samples[i] = std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / 16000.0);
  }
  const Spectrogram s = avsep::stft(x, StftParams{});
  std::vector<double> band_energy(s.num_bins, 0.0);
  for (int f = 0; f < s.num_bins; ++f) {
    for (int m = 0; m < s.num_frames; ++m) band_energy[f] += std::norm(s.at(f, m));
  }
  int peak = 0;
  for (int f = 1; f < s.num_bins; ++f) {
    if (band_energy[f] > band_energy[peak]) peak = f;
  }
  CHECK(peak == 32);  // 1000 * 512 / 16000
}

TEST_CASE("all-zero spectrogram synthesizes silence") {
  Rng rng(4);
  const AudioClip x = random_clip(rng, 4096, 16000);
  Spectrogram s = avsep::stft(x, StftParams{});
  for (auto& b : s.bins) b = avsep::cplx(0.0, 0.0);
  const AudioClip out = avsep::istft(s);
  for (double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("stft(istft(S)) reproduces S for S produced by stft") {
  Rng rng(5);
  const AudioClip x = random_clip(rng, 8192, 16000);
  const Spectrogram s = avsep::stft(x, StftParams{});
  const Spectrogram s2 = avsep::stft(avsep::istft(s), StftParams{});
  REQUIRE(s2.num_frames == s.num_frames);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.bins.size(); ++i) {
    num += std::norm(s2.bins[i] - s.bins[i]);
    den += std::norm(s.bins[i]);
  }
  CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("clip shorter than one window is rejected") {
  Rng rng(6);
  const AudioClip x = random_clip(rng, 100, 16000);
  CHECK_THROWS_WITH_AS(avsep::stft(x, StftParams{}),
                       doctest::Contains("signal too short"), avsep::ValidationError);
}

TEST_CASE("malformed spectrogram shapes are rejected") {
  Rng rng(7);
  const AudioClip x = random_clip(rng, 4096, 16000);
  Spectrogram s = avsep::stft(x, StftParams{});
  SUBCASE("wrong bin count") {
    s.num_bins = 100;
    CHECK_THROWS_AS(avsep::istft(s), avsep::ValidationError);
  }
  SUBCASE("truncated buffer") {
    s.bins.pop_back();
    CHECK_THROWS_AS(avsep::istft(s), avsep::ValidationError);
  }
}

TEST_CASE("parameter validation enforces COLA-compatible framing") {
  StftParams p;
  SUBCASE("non power-of-two fft") {
    p.fft_size = 500;
    CHECK_THROWS_AS(avsep::validate_stft_params(p), avsep::ValidationError);
  }
  SUBCASE("hop above fft/2") {
    p.hop = 384;
    CHECK_THROWS_AS(avsep::validate_stft_params(p), avsep::ValidationError);
  }
  SUBCASE("hop not dividing fft") {
    p.hop = 96;
    CHECK_THROWS_AS(avsep::validate_stft_params(p), avsep::ValidationError);
  }
}
