// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/resample.h"

#include <cmath>
#include <numeric>

#include "avsep/error.h"

namespace avsep {

namespace {

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::fabs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  AVSEP_CHECK(target_rate > 0, "resample: target rate must be positive");
  AVSEP_CHECK(clip.sample_rate > 0, "resample: invalid source rate");
  if (clip.sample_rate == target_rate) return clip;
  AVSEP_CHECK(!clip.samples.empty(), "resample: empty clip");

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  // Cutoff slightly below the narrower Nyquist; Kaiser beta 5.653 gives a
  // ~60 dB stopband for this transition width.
  const double fc = 0.45 * std::min(1.0, ratio);
  const double beta = 5.653;
  const int half_width = 32;
  const double inv_i0_beta = 1.0 / bessel_i0(beta);

  const std::size_t in_len = clip.samples.size();
  const std::size_t out_len =
      static_cast<std::size_t>(std::floor(static_cast<double>(in_len) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(out_len, 0.0);

  // When downsampling the kernel stretches by 1/ratio to keep the cutoff
  // below the target Nyquist.
  const double stretch = std::min(1.0, ratio);
  const double support = half_width / stretch;

  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const long k_lo = static_cast<long>(std::ceil(t - support));
    const long k_hi = static_cast<long>(std::floor(t + support));
    double acc = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
      if (k < 0 || k >= static_cast<long>(in_len)) continue;
      const double u = t - static_cast<double>(k);
      const double arg = u * stretch / half_width;  // in [-1, 1]
      const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - arg * arg))) *
                         inv_i0_beta;
      acc += clip.samples[k] * 2.0 * fc * sinc(2.0 * fc * u) * win;
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace avsep
