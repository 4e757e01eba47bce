// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "avsep/audio.h"
#include "avsep/autodiff.h"
#include "avsep/stft.h"

namespace avsep {

/// One training step's loss breakdown. Two identities hold by construction
/// and are re-validated wherever a report crosses a module boundary:
///   total = mean(per_layer)            e.g. per_layer {3, 1} -> total 2
///   joint = total + dereverb           e.g. 2.0 + 0.5        -> joint 2.5
/// stft_extra is an additional spectral term that may join the optimized
/// objective late in training; it never enters the identities.
struct LossReport {
  std::vector<double> per_layer;  // negated scale-invariant SDR per block
  double total = 0.0;
  double dereverb = 0.0;  // log-magnitude MSE, 0 when no enhancement stage ran
  double joint = 0.0;
  double stft_extra = 0.0;  // multi-resolution spectral term, 0 when disabled
  double objective = 0.0;   // value the optimizer actually minimized
};

/// Checks both identities to 1e-9 (absolute) and finiteness of every field.
void validate_loss_report(const LossReport& r);

/// Single-line JSON serialization for run logs.
std::string loss_report_json(const LossReport& r);

/// Negated scale-invariant SDR in dB, built on the tape. Both signals are
/// mean-centered; the projection and both energies carry eps = 1e-8 so the
/// value stays finite and differentiable even for near-perfect estimates
/// (est == ref with unit energy gives about -80). Unlike the evaluation
/// metric this is intentionally uncapped.
ad::Var sisdr_loss(ad::Tape& t, ad::Var estimate, const std::vector<double>& reference);

struct ProgressiveLoss {
  ad::Var total;                   // mean over layers
  std::vector<ad::Var> per_layer;  // one sisdr_loss per block estimate
};

/// Deep supervision: layer k's estimate is scored against ladder target k,
/// so early blocks chase easier (higher-interference-ratio) targets and the
/// last block chases the clean reverberant source.
ProgressiveLoss progressive_loss(ad::Tape& t, const std::vector<ad::Var>& estimates,
                                 const std::vector<std::vector<double>>& targets);

/// The three analysis resolutions of the spectral loss, built for a rate.
std::vector<StftParams> stft_loss_resolutions(int sample_rate);

/// Mean over resolutions of (spectral convergence + L1 log-magnitude
/// distance) between the estimate variable and a fixed reference waveform.
ad::Var multires_stft_loss(ad::Tape& t, ad::Var estimate,
                           const std::vector<double>& reference,
                           const std::vector<StftParams>& resolutions);

/// Log-magnitude of a fixed clip, matching the tape logmag convention
/// (0.5 * log(re^2 + im^2 + 1e-16)); the reference side of dereverb losses.
ad::Tensor logmag_tensor(const AudioClip& clip, const StftParams& params);

/// Mean squared error between an enhanced log-magnitude variable and a fixed
/// target log-magnitude.
ad::Var logmag_mse_loss(ad::Tape& t, ad::Var enhanced_logmag,
                        const ad::Tensor& target_logmag);

}  // namespace avsep
