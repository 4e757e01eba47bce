// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "avsep/audio.h"

namespace avsep {

/// Objective metrics for one (estimate, reference) pair.
struct MetricResult {
  double sisdr_db = 0.0;  // capped to [-60, +60]
  double stoi = 0.0;      // in [0, 1]
};

/// Scale-invariant SDR in dB, capped to [-60, +60].
///
/// Both signals are zero-meaned; the target component is the projection of the
/// estimate onto the reference, alpha = <e, r> / ||r||^2, and the value is
/// 10 log10(||alpha r||^2 / ||e - alpha r||^2). Errors on length mismatch or
/// a silent reference.
double sisdr(const AudioClip& estimate, const AudioClip& reference);

inline constexpr double kSisdrCapDb = 60.0;

/// Short-time objective intelligibility in [0, 1].
///
/// Canonical parameterization: resample to 10 kHz, 256-sample frames with
/// 128-sample hop zero-padded to a 512-point FFT, 15 one-third-octave bands
/// from 150 Hz, 30-frame (384 ms) segments, -15 dB clipping bound, and
/// silent-frame removal 40 dB below the reference peak frame energy.
/// Errors if the clips are shorter than one analysis segment.
double stoi(const AudioClip& estimate, const AudioClip& reference);

MetricResult compute_metrics(const AudioClip& estimate, const AudioClip& reference);

}  // namespace avsep
