// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/stft.h"

#include <cmath>

#include "avsep/error.h"

namespace avsep {

void validate_stft_params(const StftParams& p) {
  AVSEP_CHECK(p.fft_size > 0 && is_power_of_two(static_cast<std::size_t>(p.fft_size)),
              "fft_size must be a positive power of two, got " << p.fft_size);
  AVSEP_CHECK(p.hop > 0 && p.hop <= p.fft_size / 2 && p.fft_size % p.hop == 0,
              "hop must divide fft_size and be at most fft_size/2 (COLA), got hop="
                  << p.hop << " fft_size=" << p.fft_size);
  AVSEP_CHECK(p.sample_rate > 0, "sample_rate must be positive");
}

int StftParams::num_frames(std::size_t len) const {
  const std::size_t padded = center ? len + static_cast<std::size_t>(fft_size) : len;
  if (padded < static_cast<std::size_t>(fft_size)) return 0;
  return 1 + static_cast<int>((padded - fft_size) / hop);
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / length));
  }
  return w;
}

Spectrogram stft(const AudioClip& clip, const StftParams& params) {
  validate_stft_params(params);
  const std::size_t len = clip.samples.size();
  AVSEP_CHECK(len >= static_cast<std::size_t>(params.fft_size),
              "signal too short: " << len << " samples < fft_size " << params.fft_size);

  const int fft_size = params.fft_size;
  const int pad = params.center ? fft_size / 2 : 0;
  const std::vector<double> window = hann_window(fft_size);

  std::vector<double> padded(len + 2 * pad, 0.0);
  for (std::size_t i = 0; i < len; ++i) padded[pad + i] = clip.samples[i];

  const int num_frames = params.num_frames(len);
  const int num_bins = params.num_bins();

  Spectrogram spec;
  spec.params = params;
  spec.num_bins = num_bins;
  spec.num_frames = num_frames;
  spec.original_len = len;
  spec.bins.assign(static_cast<std::size_t>(num_bins) * num_frames, cplx(0.0, 0.0));

  std::vector<double> frame(fft_size);
  for (int m = 0; m < num_frames; ++m) {
    const std::size_t start = static_cast<std::size_t>(m) * params.hop;
    for (int i = 0; i < fft_size; ++i) frame[i] = padded[start + i] * window[i];
    const std::vector<cplx> bins = rfft(frame);
    for (int f = 0; f < num_bins; ++f) spec.at(f, m) = bins[f];
  }
  return spec;
}

AudioClip istft(const Spectrogram& spec) {
  validate_stft_params(spec.params);
  const StftParams& p = spec.params;
  AVSEP_CHECK(spec.num_bins == p.num_bins(),
              "istft: malformed spectrogram, " << spec.num_bins << " bins for fft_size "
                                               << p.fft_size);
  AVSEP_CHECK(spec.num_frames >= 1, "istft: empty spectrogram");
  AVSEP_CHECK(spec.bins.size() ==
                  static_cast<std::size_t>(spec.num_bins) * spec.num_frames,
              "istft: bin buffer size mismatch");

  const int fft_size = p.fft_size;
  const int pad = p.center ? fft_size / 2 : 0;
  const std::vector<double> window = hann_window(fft_size);

  const std::size_t padded_len =
      static_cast<std::size_t>(spec.num_frames - 1) * p.hop + fft_size;
  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> norm(padded_len, 0.0);

  std::vector<cplx> frame_bins(spec.num_bins);
  for (int m = 0; m < spec.num_frames; ++m) {
    for (int f = 0; f < spec.num_bins; ++f) frame_bins[f] = spec.at(f, m);
    const std::vector<double> frame = irfft(frame_bins, fft_size);
    const std::size_t start = static_cast<std::size_t>(m) * p.hop;
    for (int i = 0; i < fft_size; ++i) {
      acc[start + i] += frame[i] * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }

  std::size_t out_len = spec.original_len
                            ? spec.original_len
                            : (padded_len >= 2 * static_cast<std::size_t>(pad)
                                   ? padded_len - 2 * pad
                                   : 0);
  AudioClip out;
  out.sample_rate = p.sample_rate;
  out.samples.assign(out_len, 0.0);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t j = i + pad;
    if (j < padded_len && norm[j] > 1e-12) out.samples[i] = acc[j] / norm[j];
  }
  return out;
}

}  // namespace avsep
