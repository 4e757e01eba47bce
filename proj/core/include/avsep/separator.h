// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "avsep/audio.h"
#include "avsep/autodiff.h"
#include "avsep/nn_ops.h"
#include "avsep/params.h"
#include "avsep/stft.h"
#include "avsep/visual.h"

namespace avsep {

/// Grid-style separation network with audio-visual fusion.
///
/// Pipeline: STFT -> real/imag stacked as 2 channels -> 3x3 conv encoder to
/// C channels -> visual features upsampled to the frame rate, projected to
/// C_v channels and broadcast over frequency -> channel concat -> 1x1 fusion
/// back to C -> K shape-preserving blocks (layer norm + bidirectional
/// recurrent sweeps along time and frequency, residual 1x1 projections) ->
/// after each block an independent transposed-conv head emits a complex
/// spectrogram whose inverse transform is that block's estimate E_k.
struct SeparatorConfig {
  int k_blocks = 6;          // K
  int channels = 24;         // C, latent channels
  int visual_channels = 8;   // C_v
  int block_hidden = 32;     // recurrent units per direction
  int d_lip = 12;            // expected visual feature dims
  int d_expr = 4;
  StftParams stft;
};

void validate_separator_config(const SeparatorConfig& cfg);

/// JSON round trip for configs, as embedded in checkpoints. Parsing rejects
/// unknown keys; absent keys keep their defaults.
std::string separator_config_json(const SeparatorConfig& cfg);
SeparatorConfig parse_separator_config(const std::string& json_text);

struct SeparationOutput {
  AudioClip final_estimate;
  std::vector<AudioClip> intermediates;  // E_1 .. E_K; back() == final
  std::vector<int> latent_shape;         // {C, F, N} for diagnostics
};

class Separator {
 public:
  /// Registers and initializes all parameters. Blocks start as exact
  /// identity maps (zero residual projections); encoder, fusion, and heads
  /// start orthogonal.
  Separator(const SeparatorConfig& cfg, std::uint64_t seed);

  const SeparatorConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Builds the differentiable graph on t and returns the K estimate
  /// waveform Vars (length = mixture length). Parameter leaves carry grad
  /// sinks into this model's ParamStore.
  std::vector<ad::Var> forward_graph(ad::Tape& t, const AudioClip& mixture,
                                     const VisualFeatureSequence& visual);

  /// Inference wrapper: runs the graph without gradients, converts to clips,
  /// and throws NumericalDivergence if any output is not finite.
  SeparationOutput forward(const AudioClip& mixture,
                           const VisualFeatureSequence& visual);

  /// Latent geometry for a given input length: {C, F, N}.
  std::vector<int> latent_shape(int num_samples) const;

 private:
  SeparatorConfig cfg_;
  ParamStore params_;
};

}  // namespace avsep
