// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "avsep/audio.h"
#include "avsep/autodiff.h"
#include "avsep/params.h"
#include "avsep/stft.h"

namespace avsep {

/// Spectrogram dereverberation network.
///
/// U-shaped encoder/decoder over the log-magnitude spectrogram with skip
/// connections between mirror levels. The final zero-initialized convolution
/// predicts a per-bin log-gain residual, so the net is an exact identity on
/// the spectrogram at init. Applying exp(residual) to both complex planes
/// enhances the magnitude while reusing the input phase.
struct DereverbConfig {
  int depth = 3;          // encoder levels; each halves both spatial axes
  int base_channels = 8;  // channels at the first level, doubling per level
  StftParams stft;
};

void validate_dereverb_config(const DereverbConfig& cfg);

/// JSON round trip for configs, as embedded in checkpoints. Parsing rejects
/// unknown keys; absent keys keep their defaults.
std::string dereverb_config_json(const DereverbConfig& cfg);
DereverbConfig parse_dereverb_config(const std::string& json_text);

class Dereverb {
 public:
  Dereverb(const DereverbConfig& cfg, std::uint64_t seed);

  const DereverbConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct GraphOutput {
    ad::Var wave;            // enhanced waveform, input length
    ad::Var enhanced_logmag; // {F, N}, input logmag + predicted residual
    ad::Var input_logmag;    // {F, N}, for loss bookkeeping
  };

  /// Builds the differentiable graph for one clip. The input enters as a
  /// constant; parameter leaves carry grad sinks into this model's store.
  GraphOutput forward_graph(ad::Tape& t, const AudioClip& reverberant);

  /// As forward_graph but continuing from an existing spectrogram-producing
  /// waveform Var already on the tape (joint training through the cascade).
  GraphOutput forward_graph_from(ad::Tape& t, ad::Var wave, int num_samples,
                                 int sample_rate);

  /// Inference wrapper; throws NumericalDivergence on non-finite output.
  AudioClip forward(const AudioClip& reverberant);

 private:
  DereverbConfig cfg_;
  ParamStore params_;
};

}  // namespace avsep
