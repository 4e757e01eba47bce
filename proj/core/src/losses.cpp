// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/losses.h"

#include <cmath>
#include <cstddef>

#include "avsep/error.h"
#include "avsep/nn_ops.h"
#include "json.hpp"

namespace avsep {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

constexpr double kIdentityTol = 1e-9;
constexpr double kSisdrEps = 1e-8;
constexpr double kLogEps = 1e-8;  // matches the tape logmag/magnitude eps

}  // namespace

void validate_loss_report(const LossReport& r) {
  AVSEP_CHECK(!r.per_layer.empty(), "loss report: no per-layer entries");
  double mean = 0.0;
  for (double v : r.per_layer) {
    AVSEP_CHECK_FINITE(std::isfinite(v), "loss report: non-finite per-layer loss");
    mean += v;
  }
  mean /= static_cast<double>(r.per_layer.size());
  for (double v : {r.total, r.dereverb, r.joint, r.stft_extra, r.objective})
    AVSEP_CHECK_FINITE(std::isfinite(v), "loss report: non-finite field");
  AVSEP_CHECK(std::fabs(r.total - mean) <= kIdentityTol,
              "loss report: total " << r.total << " != mean(per_layer) " << mean);
  AVSEP_CHECK(std::fabs(r.joint - (r.total + r.dereverb)) <= kIdentityTol,
              "loss report: joint " << r.joint << " != total + dereverb "
                                    << r.total + r.dereverb);
}

std::string loss_report_json(const LossReport& r) {
  nlohmann::json j;
  j["per_layer"] = r.per_layer;
  j["total"] = r.total;
  j["dereverb"] = r.dereverb;
  j["joint"] = r.joint;
  j["stft_extra"] = r.stft_extra;
  j["objective"] = r.objective;
  return j.dump();
}

Var sisdr_loss(Tape& t, Var estimate, const std::vector<double>& reference) {
  const Tensor& te = t.value(estimate);
  AVSEP_CHECK(te.rank() == 1, "sisdr loss: estimate must be a waveform");
  AVSEP_CHECK(te.numel() == reference.size(),
              "sisdr loss: length mismatch, " << te.numel() << " vs "
                                              << reference.size());
  const std::size_t n = reference.size();
  AVSEP_CHECK(n > 0, "sisdr loss: empty signals");

  double ref_mean = 0.0;
  for (double v : reference) ref_mean += v;
  ref_mean /= static_cast<double>(n);
  Tensor ref_c({static_cast<int>(n)});
  double ref_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ref_c.data[i] = reference[i] - ref_mean;
    ref_energy += ref_c.data[i] * ref_c.data[i];
  }

  Var est_c = t.sub_bscalar(estimate, t.mean(estimate));
  Var ref_v = t.constant(std::move(ref_c));
  Var alpha = t.scale(t.dot(est_c, ref_v), 1.0 / (ref_energy + kSisdrEps));
  Var target = t.mul_bscalar(ref_v, alpha);
  Var residual = t.sub(est_c, target);
  Var num = t.add_const(t.dot(target, target), kSisdrEps);
  Var den = t.add_const(t.dot(residual, residual), kSisdrEps);
  const double db_per_nat = 10.0 / std::log(10.0);
  return t.scale(t.log_(t.div_ss(num, den)), -db_per_nat);
}

ProgressiveLoss progressive_loss(Tape& t, const std::vector<Var>& estimates,
                                 const std::vector<std::vector<double>>& targets) {
  AVSEP_CHECK(!estimates.empty(), "progressive loss: no estimates");
  AVSEP_CHECK(estimates.size() == targets.size(),
              "progressive loss: " << estimates.size() << " estimates vs "
                                   << targets.size() << " targets");
  ProgressiveLoss out;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    Var l = sisdr_loss(t, estimates[k], targets[k]);
    out.per_layer.push_back(l);
    out.total = k == 0 ? l : t.add(out.total, l);
  }
  out.total = t.scale(out.total, 1.0 / static_cast<double>(estimates.size()));
  return out;
}

std::vector<StftParams> stft_loss_resolutions(int sample_rate) {
  std::vector<StftParams> out;
  const std::vector<std::pair<int, int>> grids = {{512, 128}, {1024, 256}, {2048, 512}};
  for (const auto& [fft, hop] : grids) {
    StftParams p;
    p.fft_size = fft;
    p.hop = hop;
    p.sample_rate = sample_rate;
    out.push_back(p);
  }
  return out;
}

ad::Tensor logmag_tensor(const AudioClip& clip, const StftParams& params) {
  const Spectrogram spec = stft(clip, params);
  Tensor out({spec.num_bins, spec.num_frames});
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    const double re = spec.bins[i].real(), im = spec.bins[i].imag();
    out.data[i] = 0.5 * std::log(re * re + im * im + kLogEps * kLogEps);
  }
  return out;
}

Var multires_stft_loss(Tape& t, Var estimate, const std::vector<double>& reference,
                       const std::vector<StftParams>& resolutions) {
  AVSEP_CHECK(!resolutions.empty(), "spectral loss: no resolutions");
  const Tensor& te = t.value(estimate);
  AVSEP_CHECK(te.rank() == 1 && te.numel() == reference.size(),
              "spectral loss: estimate/reference length mismatch");

  Var acc;
  for (std::size_t r = 0; r < resolutions.size(); ++r) {
    const StftParams& p = resolutions[r];
    const AudioClip ref_clip(reference, p.sample_rate);
    const Spectrogram ref_spec = stft(ref_clip, p);
    Tensor ref_mag({ref_spec.num_bins, ref_spec.num_frames});
    Tensor ref_lm({ref_spec.num_bins, ref_spec.num_frames});
    double ref_fro = 0.0;
    for (std::size_t i = 0; i < ref_spec.bins.size(); ++i) {
      const double re = ref_spec.bins[i].real(), im = ref_spec.bins[i].imag();
      const double p2 = re * re + im * im + kLogEps * kLogEps;
      ref_mag.data[i] = std::sqrt(p2);
      ref_lm.data[i] = 0.5 * std::log(p2);
      ref_fro += p2;
    }
    ref_fro = std::sqrt(ref_fro);

    Var spec = ad::stft_var(t, estimate, p);
    Var mag = ad::magnitude(t, spec);
    Var diff = t.sub(mag, t.constant(std::move(ref_mag)));
    // 1e-24 under the root keeps the gradient finite when est == ref.
    Var convergence = t.scale(t.sqrt_(t.add_const(t.sum(t.square(diff)), 1e-24)),
                              1.0 / (ref_fro + kLogEps));
    Var l1 = t.mean(t.abs_(t.sub(ad::logmag(t, spec), t.constant(std::move(ref_lm)))));
    Var term = t.add(convergence, l1);
    acc = r == 0 ? term : t.add(acc, term);
  }
  return t.scale(acc, 1.0 / static_cast<double>(resolutions.size()));
}

Var logmag_mse_loss(Tape& t, Var enhanced_logmag, const Tensor& target_logmag) {
  const Tensor& te = t.value(enhanced_logmag);
  AVSEP_CHECK(te.shape == target_logmag.shape,
              "log-magnitude loss: shape mismatch between estimate and target");
  return t.mean(t.square(t.sub(enhanced_logmag, t.constant(target_logmag))));
}

}  // namespace avsep
