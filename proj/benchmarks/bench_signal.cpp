// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "avsep/audio.h"
#include "avsep/metrics.h"
#include "avsep/rng.h"
#include "avsep/stft.h"

namespace {

avsep::AudioClip noise_clip(std::size_t n, int sr, std::uint64_t seed) {
  avsep::Rng rng(seed);
  avsep::AudioClip c;
  c.sample_rate = sr;
  c.samples.resize(n);
  for (double& v : c.samples) v = 0.3 * rng.normal();
  return c;
}

void BM_Stft3s16k(benchmark::State& state) {
  const avsep::AudioClip x = noise_clip(48000, 16000, 1);
  const avsep::StftParams p{};
  for (auto _ : state) {
    benchmark::DoNotOptimize(avsep::stft(x, p));
  }
}
BENCHMARK(BM_Stft3s16k);

void BM_StftRoundTrip3s16k(benchmark::State& state) {
  const avsep::AudioClip x = noise_clip(48000, 16000, 2);
  const avsep::StftParams p{};
  for (auto _ : state) {
    benchmark::DoNotOptimize(avsep::istft(avsep::stft(x, p)));
  }
}
BENCHMARK(BM_StftRoundTrip3s16k);

void BM_Sisdr3s16k(benchmark::State& state) {
  const avsep::AudioClip ref = noise_clip(48000, 16000, 3);
  avsep::AudioClip est = ref;
  avsep::Rng rng(4);
  for (double& v : est.samples) v += 0.1 * rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(avsep::sisdr(est, ref));
  }
}
BENCHMARK(BM_Sisdr3s16k);

void BM_Stoi3s16k(benchmark::State& state) {
  avsep::AudioClip ref;
  ref.sample_rate = 16000;
  ref.samples.resize(48000);
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    double v = 0.0;
    for (int h = 1; h <= 8; ++h) v += std::sin(2.0 * M_PI * 130.0 * h * t) / h;
    ref.samples[i] = 0.2 * (0.6 + 0.4 * std::sin(2.0 * M_PI * 3.0 * t)) * v;
  }
  avsep::AudioClip est = ref;
  avsep::Rng rng(5);
  for (double& v : est.samples) v += 0.02 * rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(avsep::stoi(est, ref));
  }
}
BENCHMARK(BM_Stoi3s16k);

void BM_ConvolveRir(benchmark::State& state) {
  const avsep::AudioClip x = noise_clip(48000, 16000, 6);
  const avsep::AudioClip rir = noise_clip(8000, 16000, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(avsep::convolve_rir(x, rir));
  }
}
BENCHMARK(BM_ConvolveRir);

}  // namespace

BENCHMARK_MAIN();
