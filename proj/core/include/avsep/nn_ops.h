// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "avsep/autodiff.h"
#include "avsep/stft.h"

namespace avsep::ad {

/// Geometry of a 2-D convolution over {C, F, N} maps. stride and pad apply
/// to both spatial axes.
struct Conv2dSpec {
  int in_ch = 1;
  int out_ch = 1;
  int kh = 3;
  int kw = 3;
  int stride = 1;
  int pad = 1;

  int out_extent(int in_extent) const { return (in_extent + 2 * pad - kh) / stride + 1; }
  int tr_out_extent(int in_extent) const { return (in_extent - 1) * stride - 2 * pad + kh; }
};

/// x:{Cin,F,N}, w:{Cout, Cin*kh*kw}, b:{Cout} -> {Cout,F',N'}.
/// Patches that reach outside the input read zeros.
Var conv2d(Tape& t, Var x, Var w, Var b, const Conv2dSpec& spec);

/// Adjoint-shaped convolution: x:{Cin,F,N}, w:{Cin, Cout*kh*kw}, b:{Cout}
/// -> {Cout,F',N'} with F' = (F-1)*stride - 2*pad + kh.
Var conv_transpose2d(Tape& t, Var x, Var w, Var b, const Conv2dSpec& spec);

/// Normalizes over the channel axis independently at each (f, n):
/// y[c,f,n] = gamma[c] * (x[c,f,n] - mu_fn) / sqrt(var_fn + eps) + beta[c].
Var layer_norm_channels(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);

enum class GruAxis { kTime, kFreq };

/// Single-direction GRU swept along one spatial axis of a {C,F,N} map; the
/// other axis is the batch. Gate order in the stacked weights is [r|z|n]:
///   r = sig(Wi_r x + bi_r + Wh_r h + bh_r)
///   z = sig(Wi_z x + bi_z + Wh_z h + bh_z)
///   n = tanh(Wi_n x + bi_n + r * (Wh_n h + bh_n))
///   h' = (1 - z) * n + z * h
/// w_ih:{3H,C}, b_ih:{3H}, w_hh:{3H,H}, b_hh:{3H}; h starts at zero; output
/// {H,F,N} holds the hidden state at each position. reverse sweeps the axis
/// back to front.
Var gru_sweep(Tape& t, Var x, Var w_ih, Var b_ih, Var w_hh, Var b_hh, GruAxis axis,
              bool reverse);

/// Waveform {L} -> {2,F,N} real/imag planes of its short-time transform.
Var stft_var(Tape& t, Var wave, const StftParams& params);

/// {2,F,N} planes -> waveform {original_len} via overlap-add synthesis.
Var istft_var(Tape& t, Var spec, const StftParams& params, int original_len);

/// {2,F,N} -> {F,N}: sqrt(re^2 + im^2 + eps^2).
Var magnitude(Tape& t, Var spec, double eps = 1e-8);

/// {2,F,N} -> {F,N}: 0.5 * ln(re^2 + im^2 + eps^2).
Var logmag(Tape& t, Var spec, double eps = 1e-8);

/// {C,N} -> {C,F,N}: copies each per-frame vector across all frequency rows.
Var broadcast_freq(Tape& t, Var v, int num_bins);

/// Grows a {C,F,N} map to {C,f_out,n_out} by repeating the last row/column.
Var pad2d_replicate(Tape& t, Var x, int f_out, int n_out);

/// Keeps the top-left {C,f_out,n_out} corner of a {C,F,N} map.
Var crop2d(Tape& t, Var x, int f_out, int n_out);

}  // namespace avsep::ad
