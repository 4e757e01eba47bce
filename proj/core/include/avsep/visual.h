// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "avsep/audio.h"
#include "avsep/rng.h"

namespace avsep {

/// Surrogate visual features aligned to an audio chunk: lip features carry
/// target-speech energy and spectral-envelope summaries (so audio-visual
/// fusion has real information to exploit), expression features are a slow
/// seeded random walk. Stand-in for pretrained video feature extractors.
struct VisualFeatureSequence {
  int num_frames = 0;  // N_v
  int d_lip = 0;
  int d_expr = 0;
  double fps = 25.0;
  std::vector<double> lip;   // row-major [num_frames x d_lip]
  std::vector<double> expr;  // row-major [num_frames x d_expr]
};

/// Throws ValidationError on shape mismatch or non-finite values.
void validate_visual(const VisualFeatureSequence& v, const char* what = "visual");

/// Lip feature layout: column 0 is the per-video-frame RMS of the target
/// (exactly, so it correlates perfectly with target energy), column 1 the
/// log energy, columns 2..d_lip-3 log band energies of the frame spectrum,
/// and the last two columns seeded noise. Requires that the video frame
/// hop (sample_rate / fps) is an integer and divides the clip length.
VisualFeatureSequence gen_visual_features(const AudioClip& target, double fps,
                                          int d_lip, int d_expr, Rng& rng);

/// Raw little-endian float32 file: 16-byte header (magic "AVF1", u32 frames,
/// u32 d_lip, u32 d_expr) then row-major [frames x (d_lip + d_expr)] values,
/// each row lip features followed by expression features.
void write_visual_features(const std::string& path, const VisualFeatureSequence& v);
VisualFeatureSequence read_visual_features(const std::string& path);

}  // namespace avsep
