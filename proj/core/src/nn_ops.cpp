// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/nn_ops.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>

#include "avsep/error.h"

namespace avsep::ad {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

// Gathers sliding patches of a {C,F,N} map into a [C*kh*kw x Fo*No] matrix;
// out-of-range taps read zero.
void im2col(const double* x, int C, int F, int N, const Conv2dSpec& s, int Fo, int No,
            double* cols) {
  const std::size_t ncols = static_cast<std::size_t>(Fo) * No;
  for (int ci = 0; ci < C; ++ci) {
    for (int di = 0; di < s.kh; ++di) {
      for (int dj = 0; dj < s.kw; ++dj) {
        double* row =
            cols + ((static_cast<std::size_t>(ci) * s.kh + di) * s.kw + dj) * ncols;
        for (int fo = 0; fo < Fo; ++fo) {
          const int fi = fo * s.stride - s.pad + di;
          double* seg = row + static_cast<std::size_t>(fo) * No;
          if (fi < 0 || fi >= F) {
            std::fill(seg, seg + No, 0.0);
            continue;
          }
          const double* xrow = x + (static_cast<std::size_t>(ci) * F + fi) * N;
          for (int no = 0; no < No; ++no) {
            const int ni = no * s.stride - s.pad + dj;
            seg[no] = (ni < 0 || ni >= N) ? 0.0 : xrow[ni];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch columns back onto the {C,F,N} map.
void col2im(const double* cols, int C, int F, int N, const Conv2dSpec& s, int Fo, int No,
            double* x) {
  const std::size_t ncols = static_cast<std::size_t>(Fo) * No;
  for (int ci = 0; ci < C; ++ci) {
    for (int di = 0; di < s.kh; ++di) {
      for (int dj = 0; dj < s.kw; ++dj) {
        const double* row =
            cols + ((static_cast<std::size_t>(ci) * s.kh + di) * s.kw + dj) * ncols;
        for (int fo = 0; fo < Fo; ++fo) {
          const int fi = fo * s.stride - s.pad + di;
          if (fi < 0 || fi >= F) continue;
          double* xrow = x + (static_cast<std::size_t>(ci) * F + fi) * N;
          const double* seg = row + static_cast<std::size_t>(fo) * No;
          for (int no = 0; no < No; ++no) {
            const int ni = no * s.stride - s.pad + dj;
            if (ni >= 0 && ni < N) xrow[ni] += seg[no];
          }
        }
      }
    }
  }
}

void check_map3(const Tensor& x, const char* op) {
  AVSEP_CHECK(x.rank() == 3, op << ": expected a {C,F,N} tensor, rank " << x.rank());
}

}  // namespace

Var conv2d(Tape& t, Var x, Var w, Var b, const Conv2dSpec& s) {
  const Tensor& tx = t.value(x);
  check_map3(tx, "conv2d");
  const int C = tx.dim(0), F = tx.dim(1), N = tx.dim(2);
  AVSEP_CHECK(C == s.in_ch, "conv2d: input has " << C << " channels, spec expects " << s.in_ch);
  const int K = s.in_ch * s.kh * s.kw;
  AVSEP_CHECK(t.value(w).shape == std::vector<int>({s.out_ch, K}), "conv2d: weight shape");
  AVSEP_CHECK(t.value(b).shape == std::vector<int>({s.out_ch}), "conv2d: bias shape");
  const int Fo = s.out_extent(F), No = s.out_extent(N);
  AVSEP_CHECK(Fo >= 1 && No >= 1, "conv2d: kernel larger than padded input");

  const std::size_t ncols = static_cast<std::size_t>(Fo) * No;
  std::vector<double> cols(static_cast<std::size_t>(K) * ncols);
  im2col(tx.data.data(), C, F, N, s, Fo, No, cols.data());

  Tensor out({s.out_ch, Fo, No});
  MatMap(out.data.data(), s.out_ch, static_cast<int>(ncols)).noalias() =
      ConstMatMap(t.value(w).data.data(), s.out_ch, K) *
      ConstMatMap(cols.data(), K, static_cast<int>(ncols));
  {
    const Tensor& tb = t.value(b);
    for (int co = 0; co < s.out_ch; ++co) {
      double* row = out.data.data() + static_cast<std::size_t>(co) * ncols;
      for (std::size_t i = 0; i < ncols; ++i) row[i] += tb.data[co];
    }
  }

  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    ConstMatMap gm(g.data.data(), s.out_ch, static_cast<int>(ncols));
    if (tp.needs_grad(w)) {
      // Patches are cheap to rebuild from the cached input, so the backward
      // pass recomputes them instead of keeping the column matrix alive.
      std::vector<double> cols2(static_cast<std::size_t>(K) * ncols);
      im2col(tp.value(x).data.data(), C, F, N, s, Fo, No, cols2.data());
      MatMap gw(tp.grad_mut(w).data.data(), s.out_ch, K);
      gw.noalias() += gm * ConstMatMap(cols2.data(), K, static_cast<int>(ncols)).transpose();
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_mut(b);
      for (int co = 0; co < s.out_ch; ++co) {
        const double* row = g.data.data() + static_cast<std::size_t>(co) * ncols;
        double acc = 0.0;
        for (std::size_t i = 0; i < ncols; ++i) acc += row[i];
        gb.data[co] += acc;
      }
    }
    if (tp.needs_grad(x)) {
      std::vector<double> dcols(static_cast<std::size_t>(K) * ncols);
      MatMap(dcols.data(), K, static_cast<int>(ncols)).noalias() =
          ConstMatMap(tp.value(w).data.data(), s.out_ch, K).transpose() * gm;
      col2im(dcols.data(), C, F, N, s, Fo, No, tp.grad_mut(x).data.data());
    }
  };
  return v;
}

Var conv_transpose2d(Tape& t, Var x, Var w, Var b, const Conv2dSpec& s) {
  const Tensor& tx = t.value(x);
  check_map3(tx, "conv_transpose2d");
  const int C = tx.dim(0), F = tx.dim(1), N = tx.dim(2);
  AVSEP_CHECK(C == s.in_ch,
              "conv_transpose2d: input has " << C << " channels, spec expects " << s.in_ch);
  const int K = s.out_ch * s.kh * s.kw;
  AVSEP_CHECK(t.value(w).shape == std::vector<int>({s.in_ch, K}),
              "conv_transpose2d: weight shape");
  AVSEP_CHECK(t.value(b).shape == std::vector<int>({s.out_ch}),
              "conv_transpose2d: bias shape");
  const int Fo = s.tr_out_extent(F), No = s.tr_out_extent(N);
  AVSEP_CHECK(Fo >= 1 && No >= 1, "conv_transpose2d: degenerate output extent");

  const std::size_t nin = static_cast<std::size_t>(F) * N;
  std::vector<double> cols(static_cast<std::size_t>(K) * nin);
  MatMap(cols.data(), K, static_cast<int>(nin)).noalias() =
      ConstMatMap(t.value(w).data.data(), s.in_ch, K).transpose() *
      ConstMatMap(tx.data.data(), s.in_ch, static_cast<int>(nin));

  Tensor out({s.out_ch, Fo, No});
  col2im(cols.data(), s.out_ch, Fo, No, s, F, N, out.data.data());
  {
    const Tensor& tb = t.value(b);
    const std::size_t nout = static_cast<std::size_t>(Fo) * No;
    for (int co = 0; co < s.out_ch; ++co) {
      double* row = out.data.data() + static_cast<std::size_t>(co) * nout;
      for (std::size_t i = 0; i < nout; ++i) row[i] += tb.data[co];
    }
  }

  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    std::vector<double> dcols(static_cast<std::size_t>(K) * nin);
    im2col(g.data.data(), s.out_ch, Fo, No, s, F, N, dcols.data());
    ConstMatMap dcm(dcols.data(), K, static_cast<int>(nin));
    if (tp.needs_grad(x)) {
      MatMap gx(tp.grad_mut(x).data.data(), s.in_ch, static_cast<int>(nin));
      gx.noalias() += ConstMatMap(tp.value(w).data.data(), s.in_ch, K) * dcm;
    }
    if (tp.needs_grad(w)) {
      MatMap gw(tp.grad_mut(w).data.data(), s.in_ch, K);
      gw.noalias() +=
          ConstMatMap(tp.value(x).data.data(), s.in_ch, static_cast<int>(nin)) *
          dcm.transpose();
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_mut(b);
      const std::size_t nout = static_cast<std::size_t>(Fo) * No;
      for (int co = 0; co < s.out_ch; ++co) {
        const double* row = g.data.data() + static_cast<std::size_t>(co) * nout;
        double acc = 0.0;
        for (std::size_t i = 0; i < nout; ++i) acc += row[i];
        gb.data[co] += acc;
      }
    }
  };
  return v;
}

Var layer_norm_channels(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const Tensor& tx = t.value(x);
  check_map3(tx, "layer_norm_channels");
  const int C = tx.dim(0), F = tx.dim(1), N = tx.dim(2);
  const std::size_t G = static_cast<std::size_t>(F) * N;  // independent groups
  AVSEP_CHECK(t.value(gamma).shape == std::vector<int>({C}), "layer_norm: gamma shape");
  AVSEP_CHECK(t.value(beta).shape == std::vector<int>({C}), "layer_norm: beta shape");

  auto mu = std::make_shared<std::vector<double>>(G);
  auto inv_std = std::make_shared<std::vector<double>>(G);

  Tensor out({C, F, N});
  const double* xd = tx.data.data();
  const Tensor& tg = t.value(gamma);
  const Tensor& tb = t.value(beta);
  for (std::size_t g = 0; g < G; ++g) {
    double m = 0.0;
    for (int c = 0; c < C; ++c) m += xd[static_cast<std::size_t>(c) * G + g];
    m /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) {
      const double d = xd[static_cast<std::size_t>(c) * G + g] - m;
      var += d * d;
    }
    var /= C;
    const double is = 1.0 / std::sqrt(var + eps);
    (*mu)[g] = m;
    (*inv_std)[g] = is;
    for (int c = 0; c < C; ++c) {
      const std::size_t i = static_cast<std::size_t>(c) * G + g;
      out.data[i] = tg.data[c] * (xd[i] - m) * is + tb.data[c];
    }
  }

  const bool ng = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& gout = tp.grad(v);
    const Tensor& xin = tp.value(x);
    const Tensor& gam = tp.value(gamma);
    const bool want_x = tp.needs_grad(x);
    const bool want_g = tp.needs_grad(gamma);
    const bool want_b = tp.needs_grad(beta);
    for (std::size_t g = 0; g < G; ++g) {
      const double m = (*mu)[g];
      const double is = (*inv_std)[g];
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int c = 0; c < C; ++c) {
        const std::size_t i = static_cast<std::size_t>(c) * G + g;
        const double xhat = (xin.data[i] - m) * is;
        const double dxhat = gout.data[i] * gam.data[c];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        if (want_g) tp.grad_mut(gamma).data[c] += gout.data[i] * xhat;
        if (want_b) tp.grad_mut(beta).data[c] += gout.data[i];
      }
      if (want_x) {
        Tensor& gx = tp.grad_mut(x);
        for (int c = 0; c < C; ++c) {
          const std::size_t i = static_cast<std::size_t>(c) * G + g;
          const double xhat = (xin.data[i] - m) * is;
          const double dxhat = gout.data[i] * gam.data[c];
          gx.data[i] += is * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / C);
        }
      }
    }
  };
  return v;
}

namespace {

// Per-step state the GRU backward pass needs. h_prev is re-read from the
// output node's cached value, so only the gate activations are kept.
struct GruSaved {
  std::vector<double> r, z, nh, ghn;  // each S*H*B
};

}  // namespace

Var gru_sweep(Tape& t, Var x, Var w_ih, Var b_ih, Var w_hh, Var b_hh, GruAxis axis,
              bool reverse) {
  const Tensor& tx = t.value(x);
  check_map3(tx, "gru_sweep");
  const int C = tx.dim(0), F = tx.dim(1), N = tx.dim(2);
  const Tensor& twh = t.value(w_hh);
  AVSEP_CHECK(twh.rank() == 2 && twh.dim(0) % 3 == 0, "gru_sweep: w_hh must be {3H,H}");
  const int H = twh.dim(1);
  AVSEP_CHECK(twh.dim(0) == 3 * H, "gru_sweep: w_hh must be {3H,H}");
  AVSEP_CHECK(t.value(w_ih).shape == std::vector<int>({3 * H, C}), "gru_sweep: w_ih shape");
  AVSEP_CHECK(t.value(b_ih).shape == std::vector<int>({3 * H}), "gru_sweep: b_ih shape");
  AVSEP_CHECK(t.value(b_hh).shape == std::vector<int>({3 * H}), "gru_sweep: b_hh shape");

  const int S = axis == GruAxis::kTime ? N : F;  // sequence length
  const int B = axis == GruAxis::kTime ? F : N;  // parallel sequences
  const std::size_t HB = static_cast<std::size_t>(H) * B;

  auto saved = std::make_shared<GruSaved>();
  saved->r.resize(static_cast<std::size_t>(S) * HB);
  saved->z.resize(static_cast<std::size_t>(S) * HB);
  saved->nh.resize(static_cast<std::size_t>(S) * HB);
  saved->ghn.resize(static_cast<std::size_t>(S) * HB);

  auto gather_step = [&](const double* src, int pos, int rows, double* dst) {
    // rows x B slice of a {rows,F,N} map at the given sequence position.
    if (axis == GruAxis::kTime) {
      for (int c = 0; c < rows; ++c)
        for (int f = 0; f < F; ++f)
          dst[static_cast<std::size_t>(c) * B + f] =
              src[(static_cast<std::size_t>(c) * F + f) * N + pos];
    } else {
      for (int c = 0; c < rows; ++c)
        std::copy_n(src + (static_cast<std::size_t>(c) * F + pos) * N, N,
                    dst + static_cast<std::size_t>(c) * B);
    }
  };

  Tensor out({H, F, N});
  std::vector<double> xp(static_cast<std::size_t>(C) * B);
  std::vector<double> h(HB, 0.0);
  std::vector<double> gi(3 * HB), gh(3 * HB);

  const double* wih = t.value(w_ih).data.data();
  const double* whh = twh.data.data();
  const double* bih = t.value(b_ih).data.data();
  const double* bhh = t.value(b_hh).data.data();

  for (int s = 0; s < S; ++s) {
    const int pos = reverse ? S - 1 - s : s;
    gather_step(tx.data.data(), pos, C, xp.data());
    MatMap(gi.data(), 3 * H, B).noalias() =
        ConstMatMap(wih, 3 * H, C) * ConstMatMap(xp.data(), C, B);
    MatMap(gh.data(), 3 * H, B).noalias() =
        ConstMatMap(whh, 3 * H, H) * ConstMatMap(h.data(), H, B);
    double* rs = saved->r.data() + static_cast<std::size_t>(s) * HB;
    double* zs = saved->z.data() + static_cast<std::size_t>(s) * HB;
    double* ns = saved->nh.data() + static_cast<std::size_t>(s) * HB;
    double* gs = saved->ghn.data() + static_cast<std::size_t>(s) * HB;
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < B; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * B + j;
        const double ar = gi[k] + bih[i] + gh[k] + bhh[i];
        const double az = gi[HB + k] + bih[H + i] + gh[HB + k] + bhh[H + i];
        const double gn = gh[2 * HB + k] + bhh[2 * H + i];
        const double r = 1.0 / (1.0 + std::exp(-ar));
        const double z = 1.0 / (1.0 + std::exp(-az));
        const double nh = std::tanh(gi[2 * HB + k] + bih[2 * H + i] + r * gn);
        rs[k] = r;
        zs[k] = z;
        ns[k] = nh;
        gs[k] = gn;
        h[k] = (1.0 - z) * nh + z * h[k];
      }
    }
    // scatter h into the output at this position
    if (axis == GruAxis::kTime) {
      for (int c = 0; c < H; ++c)
        for (int f = 0; f < F; ++f)
          out.data[(static_cast<std::size_t>(c) * F + f) * N + pos] =
              h[static_cast<std::size_t>(c) * B + f];
    } else {
      for (int c = 0; c < H; ++c)
        std::copy_n(h.data() + static_cast<std::size_t>(c) * B, N,
                    out.data.data() + (static_cast<std::size_t>(c) * F + pos) * N);
    }
  }

  const bool ng = t.needs_grad(x) || t.needs_grad(w_ih) || t.needs_grad(b_ih) ||
                  t.needs_grad(w_hh) || t.needs_grad(b_hh);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;

  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& gout = tp.grad(v);
    const Tensor& outv = tp.value(v);
    const Tensor& xin = tp.value(x);
    const double* wihd = tp.value(w_ih).data.data();
    const double* whhd = tp.value(w_hh).data.data();

    std::vector<double> dh(HB, 0.0);        // carried dL/dh_prev
    std::vector<double> dgi(3 * HB), dgh(3 * HB);
    std::vector<double> hprev(HB), xps(static_cast<std::size_t>(C) * B);
    std::vector<double> tmp(HB);

    const bool want_x = tp.needs_grad(x);
    const bool want_wih = tp.needs_grad(w_ih);
    const bool want_bih = tp.needs_grad(b_ih);
    const bool want_whh = tp.needs_grad(w_hh);
    const bool want_bhh = tp.needs_grad(b_hh);

    for (int s = S - 1; s >= 0; --s) {
      const int pos = reverse ? S - 1 - s : s;
      // dL/dh_t = upstream grad at this position plus the carry from step s+1
      if (axis == GruAxis::kTime) {
        for (int c = 0; c < H; ++c)
          for (int f = 0; f < F; ++f)
            dh[static_cast<std::size_t>(c) * B + f] +=
                gout.data[(static_cast<std::size_t>(c) * F + f) * N + pos];
      } else {
        for (int c = 0; c < H; ++c)
          for (int n = 0; n < N; ++n)
            dh[static_cast<std::size_t>(c) * B + n] +=
                gout.data[(static_cast<std::size_t>(c) * F + pos) * N + n];
      }
      if (s > 0) {
        const int prev_pos = reverse ? pos + 1 : pos - 1;
        if (axis == GruAxis::kTime) {
          for (int c = 0; c < H; ++c)
            for (int f = 0; f < F; ++f)
              hprev[static_cast<std::size_t>(c) * B + f] =
                  outv.data[(static_cast<std::size_t>(c) * F + f) * N + prev_pos];
        } else {
          for (int c = 0; c < H; ++c)
            std::copy_n(outv.data.data() + (static_cast<std::size_t>(c) * F + prev_pos) * N,
                        N, hprev.data() + static_cast<std::size_t>(c) * B);
        }
      } else {
        std::fill(hprev.begin(), hprev.end(), 0.0);
      }

      const double* rs = saved->r.data() + static_cast<std::size_t>(s) * HB;
      const double* zs = saved->z.data() + static_cast<std::size_t>(s) * HB;
      const double* ns = saved->nh.data() + static_cast<std::size_t>(s) * HB;
      const double* gs = saved->ghn.data() + static_cast<std::size_t>(s) * HB;

      for (std::size_t k = 0; k < HB; ++k) {
        const double r = rs[k], z = zs[k], nh = ns[k], gn = gs[k];
        const double dnh = dh[k] * (1.0 - z);
        const double dz = dh[k] * (hprev[k] - nh);
        const double da_n = dnh * (1.0 - nh * nh);
        const double dr = da_n * gn;
        const double da_r = dr * r * (1.0 - r);
        const double da_z = dz * z * (1.0 - z);
        dgi[k] = da_r;
        dgi[HB + k] = da_z;
        dgi[2 * HB + k] = da_n;
        dgh[k] = da_r;
        dgh[HB + k] = da_z;
        dgh[2 * HB + k] = da_n * r;
        tmp[k] = dh[k] * z;  // direct path into h_prev
      }

      if (want_bih) {
        Tensor& gb = tp.grad_mut(b_ih);
        for (int i = 0; i < 3 * H; ++i) {
          const double* row = dgi.data() + static_cast<std::size_t>(i) * B;
          double acc = 0.0;
          for (int j = 0; j < B; ++j) acc += row[j];
          gb.data[i] += acc;
        }
      }
      if (want_bhh) {
        Tensor& gb = tp.grad_mut(b_hh);
        for (int i = 0; i < 3 * H; ++i) {
          const double* row = dgh.data() + static_cast<std::size_t>(i) * B;
          double acc = 0.0;
          for (int j = 0; j < B; ++j) acc += row[j];
          gb.data[i] += acc;
        }
      }
      if (want_wih || want_x) {
        if (axis == GruAxis::kTime) {
          for (int c = 0; c < C; ++c)
            for (int f = 0; f < F; ++f)
              xps[static_cast<std::size_t>(c) * B + f] =
                  xin.data[(static_cast<std::size_t>(c) * F + f) * N + pos];
        } else {
          for (int c = 0; c < C; ++c)
            std::copy_n(xin.data.data() + (static_cast<std::size_t>(c) * F + pos) * N, N,
                        xps.data() + static_cast<std::size_t>(c) * B);
        }
      }
      if (want_wih) {
        MatMap gw(tp.grad_mut(w_ih).data.data(), 3 * H, C);
        gw.noalias() += ConstMatMap(dgi.data(), 3 * H, B) *
                        ConstMatMap(xps.data(), C, B).transpose();
      }
      if (want_whh) {
        MatMap gw(tp.grad_mut(w_hh).data.data(), 3 * H, H);
        gw.noalias() += ConstMatMap(dgh.data(), 3 * H, B) *
                        ConstMatMap(hprev.data(), H, B).transpose();
      }
      if (want_x) {
        std::vector<double> dxp(static_cast<std::size_t>(C) * B);
        MatMap(dxp.data(), C, B).noalias() =
            ConstMatMap(wihd, 3 * H, C).transpose() * ConstMatMap(dgi.data(), 3 * H, B);
        Tensor& gx = tp.grad_mut(x);
        if (axis == GruAxis::kTime) {
          for (int c = 0; c < C; ++c)
            for (int f = 0; f < F; ++f)
              gx.data[(static_cast<std::size_t>(c) * F + f) * N + pos] +=
                  dxp[static_cast<std::size_t>(c) * B + f];
        } else {
          for (int c = 0; c < C; ++c) {
            double* dst = gx.data.data() + (static_cast<std::size_t>(c) * F + pos) * N;
            const double* src = dxp.data() + static_cast<std::size_t>(c) * B;
            for (int n = 0; n < N; ++n) dst[n] += src[n];
          }
        }
      }
      // carry into h_{s-1}: z-gated direct path plus the recurrent matmul path
      MatMap(dh.data(), H, B).noalias() =
          ConstMatMap(whhd, 3 * H, H).transpose() * ConstMatMap(dgh.data(), 3 * H, B);
      for (std::size_t k = 0; k < HB; ++k) dh[k] += tmp[k];
    }
  };
  return v;
}

Var stft_var(Tape& t, Var wave, const StftParams& params) {
  validate_stft_params(params);
  const Tensor& tw = t.value(wave);
  AVSEP_CHECK(tw.rank() == 1, "stft_var: waveform must be rank 1");
  AudioClip clip;
  clip.sample_rate = params.sample_rate;
  clip.samples = tw.data;
  const Spectrogram spec = stft(clip, params);
  const int Fb = spec.num_bins, Nf = spec.num_frames;
  const std::size_t FN = static_cast<std::size_t>(Fb) * Nf;

  Tensor out({2, Fb, Nf});
  for (std::size_t i = 0; i < FN; ++i) {
    out.data[i] = spec.bins[i].real();
    out.data[FN + i] = spec.bins[i].imag();
  }

  // tw dangles once emplace grows the node vector; take what we need first.
  const int L = static_cast<int>(tw.numel());
  const bool ng = t.needs_grad(wave);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;

  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    const int fft_size = params.fft_size;
    const int pad = params.center ? fft_size / 2 : 0;
    const std::vector<double> window = hann_window(fft_size);
    std::vector<double> gpadded(static_cast<std::size_t>(L) + 2 * pad, 0.0);
    std::vector<cplx> gbins(Fb);
    for (int m = 0; m < Nf; ++m) {
      for (int f = 0; f < Fb; ++f)
        gbins[f] = cplx(g.data[static_cast<std::size_t>(f) * Nf + m],
                        g.data[FN + static_cast<std::size_t>(f) * Nf + m]);
      const std::vector<double> gframe = rfft_adjoint(gbins, fft_size);
      const std::size_t start = static_cast<std::size_t>(m) * params.hop;
      for (int i = 0; i < fft_size; ++i) gpadded[start + i] += gframe[i] * window[i];
    }
    Tensor& gw = tp.grad_mut(wave);
    for (int i = 0; i < L; ++i) gw.data[i] += gpadded[pad + i];
  };
  return v;
}

Var istft_var(Tape& t, Var spec, const StftParams& params, int original_len) {
  validate_stft_params(params);
  const Tensor& ts = t.value(spec);
  AVSEP_CHECK(ts.rank() == 3 && ts.dim(0) == 2, "istft_var: expected {2,F,N} planes");
  const int Fb = ts.dim(1), Nf = ts.dim(2);
  AVSEP_CHECK(Fb == params.num_bins(), "istft_var: bin count mismatch");
  AVSEP_CHECK(original_len > 0, "istft_var: original_len must be positive");
  const std::size_t FN = static_cast<std::size_t>(Fb) * Nf;

  Spectrogram sg;
  sg.params = params;
  sg.num_bins = Fb;
  sg.num_frames = Nf;
  sg.original_len = static_cast<std::size_t>(original_len);
  sg.bins.resize(FN);
  for (std::size_t i = 0; i < FN; ++i) sg.bins[i] = cplx(ts.data[i], ts.data[FN + i]);
  const AudioClip rec = istft(sg);
  AVSEP_CHECK(rec.samples.size() == static_cast<std::size_t>(original_len),
              "istft_var: reconstruction length mismatch");

  Tensor out({original_len}, rec.samples);
  const bool ng = t.needs_grad(spec);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;

  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    const int fft_size = params.fft_size;
    const int pad = params.center ? fft_size / 2 : 0;
    const std::vector<double> window = hann_window(fft_size);
    const std::size_t padded_len = static_cast<std::size_t>(Nf - 1) * params.hop + fft_size;

    std::vector<double> norm(padded_len, 0.0);
    for (int m = 0; m < Nf; ++m) {
      const std::size_t start = static_cast<std::size_t>(m) * params.hop;
      for (int i = 0; i < fft_size; ++i) norm[start + i] += window[i] * window[i];
    }
    std::vector<double> gacc(padded_len, 0.0);
    for (int i = 0; i < original_len; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) + pad;
      if (j < padded_len && norm[j] > 1e-12) gacc[j] = g.data[i] / norm[j];
    }
    Tensor& gs = tp.grad_mut(spec);
    std::vector<double> gframe(fft_size);
    for (int m = 0; m < Nf; ++m) {
      const std::size_t start = static_cast<std::size_t>(m) * params.hop;
      for (int i = 0; i < fft_size; ++i) gframe[i] = gacc[start + i] * window[i];
      const std::vector<cplx> gbins = irfft_adjoint(gframe);
      for (int f = 0; f < Fb; ++f) {
        gs.data[static_cast<std::size_t>(f) * Nf + m] += gbins[f].real();
        gs.data[FN + static_cast<std::size_t>(f) * Nf + m] += gbins[f].imag();
      }
    }
  };
  return v;
}

Var magnitude(Tape& t, Var spec, double eps) {
  const Tensor& ts = t.value(spec);
  AVSEP_CHECK(ts.rank() == 3 && ts.dim(0) == 2, "magnitude: expected {2,F,N} planes");
  const int Fb = ts.dim(1), Nf = ts.dim(2);
  const std::size_t FN = static_cast<std::size_t>(Fb) * Nf;
  Tensor out({Fb, Nf});
  for (std::size_t i = 0; i < FN; ++i) {
    const double re = ts.data[i], im = ts.data[FN + i];
    out.data[i] = std::sqrt(re * re + im * im + eps * eps);
  }
  const bool ng = t.needs_grad(spec);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    const Tensor& y = tp.value(v);
    const Tensor& sp = tp.value(spec);
    Tensor& gs = tp.grad_mut(spec);
    for (std::size_t i = 0; i < FN; ++i) {
      const double inv = g.data[i] / y.data[i];
      gs.data[i] += inv * sp.data[i];
      gs.data[FN + i] += inv * sp.data[FN + i];
    }
  };
  return v;
}

Var logmag(Tape& t, Var spec, double eps) {
  const Tensor& ts = t.value(spec);
  AVSEP_CHECK(ts.rank() == 3 && ts.dim(0) == 2, "logmag: expected {2,F,N} planes");
  const int Fb = ts.dim(1), Nf = ts.dim(2);
  const std::size_t FN = static_cast<std::size_t>(Fb) * Nf;
  Tensor out({Fb, Nf});
  for (std::size_t i = 0; i < FN; ++i) {
    const double re = ts.data[i], im = ts.data[FN + i];
    out.data[i] = 0.5 * std::log(re * re + im * im + eps * eps);
  }
  const bool ng = t.needs_grad(spec);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    const Tensor& sp = tp.value(spec);
    Tensor& gs = tp.grad_mut(spec);
    for (std::size_t i = 0; i < FN; ++i) {
      const double re = sp.data[i], im = sp.data[FN + i];
      const double inv = g.data[i] / (re * re + im * im + eps * eps);
      gs.data[i] += inv * re;
      gs.data[FN + i] += inv * im;
    }
  };
  return v;
}

Var broadcast_freq(Tape& t, Var v_in, int num_bins) {
  const Tensor& tv = t.value(v_in);
  AVSEP_CHECK(tv.rank() == 2, "broadcast_freq: expected {C,N}");
  const int C = tv.dim(0), N = tv.dim(1);
  Tensor out({C, num_bins, N});
  for (int c = 0; c < C; ++c)
    for (int f = 0; f < num_bins; ++f)
      std::copy_n(tv.data.data() + static_cast<std::size_t>(c) * N, N,
                  out.data.data() + (static_cast<std::size_t>(c) * num_bins + f) * N);
  const bool ng = t.needs_grad(v_in);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    Tensor& gv = tp.grad_mut(v_in);
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < num_bins; ++f) {
        const double* src = g.data.data() + (static_cast<std::size_t>(c) * num_bins + f) * N;
        double* dst = gv.data.data() + static_cast<std::size_t>(c) * N;
        for (int n = 0; n < N; ++n) dst[n] += src[n];
      }
  };
  return v;
}

Var pad2d_replicate(Tape& t, Var x, int f_out, int n_out) {
  const Tensor& tx = t.value(x);
  check_map3(tx, "pad2d_replicate");
  const int C = tx.dim(0), F = tx.dim(1), N = tx.dim(2);
  AVSEP_CHECK(f_out >= F && n_out >= N, "pad2d_replicate: target smaller than input");
  Tensor out({C, f_out, n_out});
  for (int c = 0; c < C; ++c)
    for (int f = 0; f < f_out; ++f) {
      const int fs = std::min(f, F - 1);
      const double* src = tx.data.data() + (static_cast<std::size_t>(c) * F + fs) * N;
      double* dst = out.data.data() + (static_cast<std::size_t>(c) * f_out + f) * n_out;
      for (int n = 0; n < n_out; ++n) dst[n] = src[std::min(n, N - 1)];
    }
  const bool ng = t.needs_grad(x);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    Tensor& gx = tp.grad_mut(x);
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < f_out; ++f) {
        const int fs = std::min(f, F - 1);
        const double* src = g.data.data() + (static_cast<std::size_t>(c) * f_out + f) * n_out;
        double* dst = gx.data.data() + (static_cast<std::size_t>(c) * F + fs) * N;
        for (int n = 0; n < n_out; ++n) dst[std::min(n, N - 1)] += src[n];
      }
  };
  return v;
}

Var crop2d(Tape& t, Var x, int f_out, int n_out) {
  const Tensor& tx = t.value(x);
  check_map3(tx, "crop2d");
  const int C = tx.dim(0), F = tx.dim(1), N = tx.dim(2);
  AVSEP_CHECK(f_out <= F && n_out <= N, "crop2d: target larger than input");
  Tensor out({C, f_out, n_out});
  for (int c = 0; c < C; ++c)
    for (int f = 0; f < f_out; ++f)
      std::copy_n(tx.data.data() + (static_cast<std::size_t>(c) * F + f) * N, n_out,
                  out.data.data() + (static_cast<std::size_t>(c) * f_out + f) * n_out);
  const bool ng = t.needs_grad(x);
  Var v = t.emplace(std::move(out), ng, nullptr);
  if (!ng) return v;
  t.nodes()[v.id].backward = [=](Tape& tp) {
    const Tensor& g = tp.grad(v);
    Tensor& gx = tp.grad_mut(x);
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < f_out; ++f) {
        const double* src = g.data.data() + (static_cast<std::size_t>(c) * f_out + f) * n_out;
        double* dst = gx.data.data() + (static_cast<std::size_t>(c) * F + f) * N;
        for (int n = 0; n < n_out; ++n) dst[n] += src[n];
      }
  };
  return v;
}

}  // namespace avsep::ad
