// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "avsep/audio.h"
#include "avsep/fft.h"

namespace avsep {

enum class Window { kHann };

/// STFT analysis/synthesis parameters.
///
/// Defaults are the project-wide choice for 16 kHz speech: 512-point FFT,
/// 256-sample hop, periodic Hann. The hop must divide fft_size and be at most
/// fft_size/2 so the window satisfies constant overlap-add.
///
/// center=true (default) zero-pads fft_size/2 samples on both ends before
/// framing, so istft(stft(x)) reconstructs x exactly; the frame count is then
/// N = 1 + floor(len/hop). With center=false, N = 1 + floor((len-fft)/hop).
struct StftParams {
  int fft_size = 512;
  int hop = 256;
  Window window = Window::kHann;
  int sample_rate = 16000;
  bool center = true;

  int num_bins() const { return fft_size / 2 + 1; }
  int num_frames(std::size_t len) const;
  double frame_rate() const { return static_cast<double>(sample_rate) / hop; }

  bool operator==(const StftParams&) const = default;
};

/// Throws ValidationError unless fft_size is a power of two, hop divides
/// fft_size, hop <= fft_size/2, and sample_rate > 0.
void validate_stft_params(const StftParams& p);

/// Complex time-frequency representation, bins[f * num_frames + n], row-major
/// [F x N] with F = fft_size/2 + 1.
struct Spectrogram {
  std::vector<std::complex<double>> bins;
  int num_bins = 0;
  int num_frames = 0;
  StftParams params;
  // Original waveform length; istft crops to it. 0 = infer from framing.
  std::size_t original_len = 0;

  std::complex<double>& at(int f, int n) { return bins[static_cast<std::size_t>(f) * num_frames + n]; }
  const std::complex<double>& at(int f, int n) const {
    return bins[static_cast<std::size_t>(f) * num_frames + n];
  }
};

/// Periodic Hann window of the given length.
std::vector<double> hann_window(int length);

/// Forward STFT. Errors with "signal too short" if len < fft_size.
Spectrogram stft(const AudioClip& clip, const StftParams& params);

/// Inverse STFT with per-sample overlap-add normalization. Output length is
/// spec.original_len when set, otherwise the natural framing length.
AudioClip istft(const Spectrogram& spec);

}  // namespace avsep
