// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

namespace avsep {

/// Monaural waveform with sample rate. The universal signal carrier.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  AudioClip() = default;
  AudioClip(std::vector<double> s, int sr) : samples(std::move(s)), sample_rate(sr) {}

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws ValidationError if samples contain NaN/Inf or sample_rate <= 0.
void validate_clip(const AudioClip& clip, const char* what = "clip");

/// Root mean square of the samples. Errors on an empty clip.
double rms(const AudioClip& clip);

/// Gain g such that 20*log10(rms(target_ref) / (g * rms(interferer))) == snr_db.
/// Errors if either clip is silent.
double gain_for_snr(const AudioClip& target_ref, const AudioClip& interferer,
                    double snr_db);

/// Measured energy-ratio SNR in dB between target and interference.
double measure_snr_db(const AudioClip& target, const AudioClip& interference);

/// Full linear convolution of clip with rir, truncated to clip.size() samples.
/// The rir is first shifted so its direct-path peak (largest |h|) sits at lag 0,
/// keeping the reverberant output time-aligned with the dry input.
AudioClip convolve_rir(const AudioClip& clip, const AudioClip& rir);

/// x + y elementwise (equal lengths and rates required).
AudioClip mix_add(const AudioClip& x, const AudioClip& y);

/// c * x.
AudioClip scale(const AudioClip& x, double c);

}  // namespace avsep
