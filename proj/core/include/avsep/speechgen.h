// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "avsep/audio.h"
#include "avsep/rng.h"

namespace avsep {

/// Synthetic speech generator: glottal pulse trains through formant-like
/// resonators, with voiced segments separated by silence gaps. Exists so the
/// whole pipeline runs with zero external data.
struct SpeechGenConfig {
  int sample_rate = 16000;
  double f0_lo_hz = 90.0;    // speaker pitch range
  double f0_hi_hz = 240.0;
  double voiced_lo_s = 0.25; // voiced segment duration range
  double voiced_hi_s = 0.90;
  double pause_lo_s = 0.08;  // inter-segment silence range
  double pause_hi_s = 0.35;
  double breath_level = 0.02; // aspiration noise relative to pulse amplitude
};

void validate_speechgen_config(const SpeechGenConfig& cfg);

/// One utterance of the requested duration. The speaker identity (pitch base,
/// formant ranges) is drawn from rng, so distinct seeds give distinct voices.
/// Output is peak-normalized to 0.9. Deterministic given (cfg, rng state).
AudioClip synth_speech(const SpeechGenConfig& cfg, double seconds, Rng& rng);

}  // namespace avsep
