// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/audio.h"

#include <cmath>

#include "avsep/error.h"
#include "avsep/fft.h"

namespace avsep {

namespace {
constexpr double kSilenceRms = 1e-12;
}

void validate_clip(const AudioClip& clip, const char* what) {
  AVSEP_CHECK(clip.sample_rate > 0, what << ": sample_rate must be positive");
  for (double s : clip.samples) {
    AVSEP_CHECK_FINITE(std::isfinite(s), what << ": non-finite sample");
  }
}

double rms(const AudioClip& clip) {
  AVSEP_CHECK(!clip.samples.empty(), "rms of empty clip");
  double acc = 0.0;
  for (double s : clip.samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(clip.samples.size()));
}

double gain_for_snr(const AudioClip& target_ref, const AudioClip& interferer,
                    double snr_db) {
  const double rt = rms(target_ref);
  const double ri = rms(interferer);
  AVSEP_CHECK(rt > kSilenceRms, "cannot compute SNR gain for silent target");
  AVSEP_CHECK(ri > kSilenceRms, "cannot scale silent interferer");
  return std::pow(10.0, -snr_db / 20.0) * rt / ri;
}

double measure_snr_db(const AudioClip& target, const AudioClip& interference) {
  const double rt = rms(target);
  const double ri = rms(interference);
  AVSEP_CHECK(rt > kSilenceRms && ri > kSilenceRms,
              "SNR undefined for silent signals");
  return 20.0 * std::log10(rt / ri);
}

AudioClip convolve_rir(const AudioClip& clip, const AudioClip& rir) {
  AVSEP_CHECK(clip.sample_rate == rir.sample_rate,
              "sample-rate mismatch: clip " << clip.sample_rate << " Hz vs rir "
                                            << rir.sample_rate << " Hz");
  AVSEP_CHECK(!clip.samples.empty() && !rir.samples.empty(),
              "convolve_rir: empty input");

  // Align the direct path: shift the rir so its largest-magnitude tap is lag 0.
  std::size_t peak = 0;
  for (std::size_t i = 1; i < rir.samples.size(); ++i) {
    if (std::fabs(rir.samples[i]) > std::fabs(rir.samples[peak])) peak = i;
  }
  std::vector<double> h(rir.samples.begin() + peak, rir.samples.end());

  const std::size_t n = clip.samples.size();
  const std::size_t full = n + h.size() - 1;
  std::size_t fft_n = 1;
  while (fft_n < full) fft_n <<= 1;

  std::vector<cplx> a(fft_n, cplx(0.0, 0.0));
  std::vector<cplx> b(fft_n, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < n; ++i) a[i] = cplx(clip.samples[i], 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) b[i] = cplx(h[i], 0.0);
  fft_inplace(a, false);
  fft_inplace(b, false);
  for (std::size_t i = 0; i < fft_n; ++i) a[i] *= b[i];
  fft_inplace(a, true);

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(n);
  const double scale = 1.0 / static_cast<double>(fft_n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = a[i].real() * scale;
  return out;
}

AudioClip mix_add(const AudioClip& x, const AudioClip& y) {
  AVSEP_CHECK(x.sample_rate == y.sample_rate, "mix_add: sample-rate mismatch");
  AVSEP_CHECK(x.samples.size() == y.samples.size(), "mix_add: length mismatch");
  AudioClip out = x;
  for (std::size_t i = 0; i < y.samples.size(); ++i) out.samples[i] += y.samples[i];
  return out;
}

AudioClip scale(const AudioClip& x, double c) {
  AudioClip out = x;
  for (double& s : out.samples) s *= c;
  return out;
}

}  // namespace avsep
