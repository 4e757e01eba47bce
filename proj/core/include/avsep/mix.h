// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avsep/audio.h"
#include "avsep/rng.h"
#include "avsep/speechgen.h"
#include "avsep/visual.h"

namespace avsep {

/// Synthetic room impulse response settings: exponentially decaying noise
/// tail behind a unit direct-path impulse at lag 0.
struct RirConfig {
  int sample_rate = 16000;
  double t60_lo_s = 0.2;  // reverberation time range
  double t60_hi_s = 0.5;
  double rir_seconds = 0.5;  // must cover the longest T60
  double drr_lo_db = 2.0;  // direct-to-reverberant energy ratio range
  double drr_hi_db = 10.0;
};

void validate_rir_config(const RirConfig& cfg);

/// Harmonic music-like interferer settings.
struct MusicConfig {
  int sample_rate = 16000;
  int n_partials_lo = 3;
  int n_partials_hi = 8;
  double fundamental_lo_hz = 80.0;
  double fundamental_hi_hz = 400.0;
  double amplitude_decay = 0.7;  // partial p gets amplitude decay^(p-1)
};

void validate_music_config(const MusicConfig& cfg);

/// Source material for dynamic mixing. Utterances may come from the built-in
/// speech generator or be loaded from WAV directories.
struct SourceBank {
  std::vector<AudioClip> target_utterances;
  std::vector<AudioClip> interferer_utterances;
  MusicConfig music;
  RirConfig rir;
  std::uint64_t seed = 0;
};

void validate_bank(const SourceBank& bank);

/// Settings for synthesizing a SourceBank from scratch.
struct SyntheticBankConfig {
  int sample_rate = 16000;
  int num_target_utterances = 8;
  int num_interferer_utterances = 8;
  double utterance_seconds = 5.0;
  SpeechGenConfig speech;  // sample_rate overridden by the bank's rate
};

SourceBank make_synthetic_bank(const SyntheticBankConfig& cfg, std::uint64_t seed);

/// Progressive training targets: entries 1..K-1 remix the reverberant target
/// with interference scaled to SNR s0 + k*step (strictly easier per layer);
/// entry K is the reverberant target itself, stored without any mixing.
struct ProgressiveLadder {
  double initial_snr_db = 0.0;  // s0: the mixture's own SNR
  double step_db = 5.0;
  int num_layers = 0;  // K
  std::vector<AudioClip> targets;  // exactly K entries
  std::vector<double> gains;       // K-1 interference gains used per entry
};

/// Per-sample bookkeeping carried into manifests.
struct SampleMeta {
  std::string id;  // assigned by the dataset writer
  double snr_db = 0.0;           // requested mixing SNR
  double measured_snr_db = 0.0;  // energy-ratio SNR actually measured
  double t60_s = 0.0;
  int target_index = -1;
  std::vector<int> interferer_indices;
  bool has_music = false;
  std::int64_t chunk_offset = 0;  // samples into the source utterance
};

/// One training/evaluation example. Invariants (checked by validate_sample):
/// mixture == reverberant_target + interference_sum within 1e-9 per sample;
/// measured SNR equals meta within 1e-6 dB; ladder entries share length and
/// rate with the mixture and entry K equals the reverberant target.
struct MixtureSample {
  AudioClip mixture;
  AudioClip reverberant_target;
  AudioClip anechoic_target;
  AudioClip interference_sum;
  ProgressiveLadder ladder;
  VisualFeatureSequence visual;
  SampleMeta meta;
};

void validate_sample(const MixtureSample& s, const char* what = "sample");

/// Draws T60 and DRR from cfg. Direct path is a unit impulse at lag 0; the
/// tail is white noise decaying 60 dB in energy over T60 seconds, scaled so
/// the direct-to-reverberant energy ratio equals the drawn DRR.
AudioClip synth_rir(const RirConfig& cfg, Rng& rng);

/// Same with the room's T60 supplied, so several sources in one sample can
/// share the room draw while keeping independent tails and DRRs.
AudioClip synth_rir_t60(const RirConfig& cfg, double t60_s, Rng& rng);

/// Sum of n harmonic partials with geometrically decaying amplitudes and slow
/// independent amplitude modulation per partial; peak-normalized to 0.9.
/// Zero drawn partials yields silence.
AudioClip synth_music(const MusicConfig& cfg, double seconds, Rng& rng);

/// Entry k in 1..K-1 is reverberant_target + interference rescaled to SNR
/// s0 + k*step; entry K is reverberant_target exactly. K=1 yields just the
/// reverberant target. Errors on silent interference when K >= 2.
ProgressiveLadder build_ladder(const AudioClip& reverberant_target,
                               const AudioClip& interference_sum, double s0_db,
                               double step_db, int k_layers);

/// Assembles one sample: random target chunk convolved with a fresh RIR,
/// interfering speakers (plus optional music) convolved with their own RIRs
/// from the same room draw, interference globally rescaled for an exact SNR,
/// ladder and visual features attached. Deterministic given the rng state.
MixtureSample build_sample(const SourceBank& bank, double snr_db, double chunk_seconds,
                           int num_interfering_speakers, bool include_music,
                           int k_layers, Rng& rng, double ladder_step_db = 5.0);

/// Video feature dimensions used when build_sample generates surrogates.
inline constexpr double kVisualFps = 25.0;
inline constexpr int kLipDims = 12;
inline constexpr int kExpressionDims = 4;

}  // namespace avsep
