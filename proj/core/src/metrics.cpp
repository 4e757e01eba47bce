// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/metrics.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "avsep/error.h"
#include "avsep/fft.h"
#include "avsep/resample.h"
#include "avsep/stft.h"

namespace avsep {

double sisdr(const AudioClip& estimate, const AudioClip& reference) {
  AVSEP_CHECK(estimate.samples.size() == reference.samples.size(),
              "sisdr: length mismatch, " << estimate.samples.size() << " vs "
                                         << reference.samples.size());
  const std::size_t n = reference.samples.size();
  AVSEP_CHECK(n > 0, "sisdr: empty signals");

  double mean_e = 0.0, mean_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_e += estimate.samples[i];
    mean_r += reference.samples[i];
  }
  mean_e /= static_cast<double>(n);
  mean_r /= static_cast<double>(n);

  double dot_er = 0.0, dot_rr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = estimate.samples[i] - mean_e;
    const double r = reference.samples[i] - mean_r;
    dot_er += e * r;
    dot_rr += r * r;
  }
  AVSEP_CHECK(dot_rr > 1e-24, "sisdr: silent reference");

  const double alpha = dot_er / dot_rr;
  double target_energy = 0.0, residual_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = estimate.samples[i] - mean_e;
    const double r = reference.samples[i] - mean_r;
    const double t = alpha * r;
    target_energy += t * t;
    residual_energy += (e - t) * (e - t);
  }

  double value;
  if (residual_energy <= 0.0 || target_energy <= 0.0) {
    value = residual_energy <= 0.0 ? kSisdrCapDb : -kSisdrCapDb;
  } else {
    value = 10.0 * std::log10(target_energy / residual_energy);
  }
  return std::clamp(value, -kSisdrCapDb, kSisdrCapDb);
}

namespace {

// Canonical STOI parameters.
constexpr int kStoiRate = 10000;
constexpr int kFrameLen = 256;
constexpr int kFrameHop = 128;
constexpr int kFftSize = 512;
constexpr int kNumBands = 15;
constexpr double kFirstCenterHz = 150.0;
constexpr int kSegmentFrames = 30;     // 384 ms at 10 kHz / hop 128
constexpr double kClipBoundDb = -15.0;
constexpr double kSilenceRangeDb = 40.0;

using Frames = std::vector<std::vector<double>>;

// Windowed frames at 50% overlap; hann here satisfies amplitude COLA so
// overlap-adding the kept frames reconstructs the signal.
Frames frame_signal(const std::vector<double>& x, const std::vector<double>& w) {
  Frames frames;
  if (x.size() < kFrameLen) return frames;
  const std::size_t n_frames = 1 + (x.size() - kFrameLen) / kFrameHop;
  frames.reserve(n_frames);
  for (std::size_t m = 0; m < n_frames; ++m) {
    std::vector<double> fr(kFrameLen);
    const std::size_t s = m * kFrameHop;
    for (int i = 0; i < kFrameLen; ++i) fr[i] = x[s + i] * w[i];
    frames.push_back(std::move(fr));
  }
  return frames;
}

// Removes frames whose reference energy is more than 40 dB below the peak
// reference frame energy, then rebuilds both signals by overlap-add.
void remove_silent_frames(std::vector<double>& ref, std::vector<double>& est) {
  const std::vector<double> w = hann_window(kFrameLen);
  Frames rf = frame_signal(ref, w);
  Frames ef = frame_signal(est, w);
  AVSEP_CHECK(!rf.empty(), "stoi: signal too short");

  std::vector<double> energy_db(rf.size());
  double peak = -1e300;
  for (std::size_t m = 0; m < rf.size(); ++m) {
    double e = 0.0;
    for (double v : rf[m]) e += v * v;
    energy_db[m] = 10.0 * std::log10(e + 1e-300);
    peak = std::max(peak, energy_db[m]);
  }

  std::vector<std::size_t> keep;
  for (std::size_t m = 0; m < rf.size(); ++m) {
    if (energy_db[m] > peak - kSilenceRangeDb) keep.push_back(m);
  }
  AVSEP_CHECK(!keep.empty(), "stoi: reference is silent");

  const std::size_t out_len = kFrameLen + (keep.size() - 1) * kFrameHop;
  std::vector<double> ref_out(out_len, 0.0), est_out(out_len, 0.0);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const std::size_t s = j * kFrameHop;
    for (int i = 0; i < kFrameLen; ++i) {
      ref_out[s + i] += rf[keep[j]][i];
      est_out[s + i] += ef[keep[j]][i];
    }
  }
  ref = std::move(ref_out);
  est = std::move(est_out);
}

// |STFT| with 256-sample hann frames zero-padded to 512 points.
std::vector<std::vector<double>> magnitude_frames(const std::vector<double>& x) {
  const std::vector<double> w = hann_window(kFrameLen);
  Frames frames = frame_signal(x, w);
  std::vector<std::vector<double>> mags;
  mags.reserve(frames.size());
  std::vector<double> padded(kFftSize, 0.0);
  for (const auto& fr : frames) {
    std::fill(padded.begin(), padded.end(), 0.0);
    std::copy(fr.begin(), fr.end(), padded.begin());
    const std::vector<cplx> bins = rfft(padded);
    std::vector<double> mag(bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) mag[i] = std::abs(bins[i]);
    mags.push_back(std::move(mag));
  }
  return mags;
}

// One-third-octave band edges -> FFT bin ranges [lo, hi).
struct Band {
  int lo;
  int hi;
};

std::vector<Band> third_octave_bands() {
  std::vector<Band> bands(kNumBands);
  const double bin_hz = static_cast<double>(kStoiRate) / kFftSize;
  for (int k = 0; k < kNumBands; ++k) {
    const double cf = kFirstCenterHz * std::pow(2.0, k / 3.0);
    const double lo_hz = cf * std::pow(2.0, -1.0 / 6.0);
    const double hi_hz = cf * std::pow(2.0, 1.0 / 6.0);
    bands[k].lo = static_cast<int>(std::ceil(lo_hz / bin_hz));
    bands[k].hi = static_cast<int>(std::ceil(hi_hz / bin_hz));
    bands[k].hi = std::max(bands[k].hi, bands[k].lo + 1);
  }
  return bands;
}

}  // namespace

double stoi(const AudioClip& estimate, const AudioClip& reference) {
  AVSEP_CHECK(estimate.samples.size() == reference.samples.size(),
              "stoi: length mismatch");
  AVSEP_CHECK(estimate.sample_rate == reference.sample_rate,
              "stoi: sample-rate mismatch");
  const double min_seconds = 0.384;
  AVSEP_CHECK(reference.duration_seconds() >= min_seconds,
              "stoi: signal too short, need at least 384 ms");

  std::vector<double> ref = resample(reference, kStoiRate).samples;
  std::vector<double> est = resample(estimate, kStoiRate).samples;
  remove_silent_frames(ref, est);

  const auto ref_mag = magnitude_frames(ref);
  const auto est_mag = magnitude_frames(est);
  const std::size_t n_frames = std::min(ref_mag.size(), est_mag.size());
  AVSEP_CHECK(n_frames >= kSegmentFrames,
              "stoi: too few frames after silent-frame removal ("
                  << n_frames << " < " << kSegmentFrames << ")");

  const std::vector<Band> bands = third_octave_bands();

  // Band envelopes X[j][m] = sqrt(sum of squared magnitudes in band j).
  std::vector<std::vector<double>> X(kNumBands, std::vector<double>(n_frames));
  std::vector<std::vector<double>> Y(kNumBands, std::vector<double>(n_frames));
  for (std::size_t m = 0; m < n_frames; ++m) {
    for (int j = 0; j < kNumBands; ++j) {
      double ex = 0.0, ey = 0.0;
      for (int b = bands[j].lo; b < bands[j].hi && b < kFftSize / 2 + 1; ++b) {
        ex += ref_mag[m][b] * ref_mag[m][b];
        ey += est_mag[m][b] * est_mag[m][b];
      }
      X[j][m] = std::sqrt(ex);
      Y[j][m] = std::sqrt(ey);
    }
  }

  const double clip_gain = std::pow(10.0, -kClipBoundDb / 20.0);  // 10^(15/20)

  double sum_d = 0.0;
  std::size_t count = 0;
  std::vector<double> xseg(kSegmentFrames), yseg(kSegmentFrames);
  for (std::size_t m = kSegmentFrames; m <= n_frames; ++m) {
    for (int j = 0; j < kNumBands; ++j) {
      double ex = 0.0, ey = 0.0;
      for (int i = 0; i < kSegmentFrames; ++i) {
        xseg[i] = X[j][m - kSegmentFrames + i];
        yseg[i] = Y[j][m - kSegmentFrames + i];
        ex += xseg[i] * xseg[i];
        ey += yseg[i] * yseg[i];
      }
      // Normalize the degraded segment to the clean energy, then clip the
      // local SDR at -15 dB.
      const double alpha = std::sqrt(ex / (ey + 1e-300));
      double mx = 0.0, my = 0.0;
      for (int i = 0; i < kSegmentFrames; ++i) {
        yseg[i] = std::min(alpha * yseg[i], xseg[i] * (1.0 + clip_gain));
        mx += xseg[i];
        my += yseg[i];
      }
      mx /= kSegmentFrames;
      my /= kSegmentFrames;
      double num = 0.0, dx = 0.0, dy = 0.0;
      for (int i = 0; i < kSegmentFrames; ++i) {
        num += (xseg[i] - mx) * (yseg[i] - my);
        dx += (xseg[i] - mx) * (xseg[i] - mx);
        dy += (yseg[i] - my) * (yseg[i] - my);
      }
      const double denom = std::sqrt(dx * dy) + 1e-20;
      sum_d += num / denom;
      ++count;
    }
  }

  const double value = sum_d / static_cast<double>(count);
  return std::clamp(value, 0.0, 1.0);
}

MetricResult compute_metrics(const AudioClip& estimate, const AudioClip& reference) {
  MetricResult r;
  r.sisdr_db = sisdr(estimate, reference);
  r.stoi = stoi(estimate, reference);
  return r;
}

}  // namespace avsep
