// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/separator.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "avsep/error.h"
#include "json_util.h"

namespace avsep {

using ad::Tape;
using ad::Tensor;
using ad::Var;

void validate_separator_config(const SeparatorConfig& cfg) {
  AVSEP_CHECK(cfg.k_blocks >= 1, "separator: K must be >= 1, got " << cfg.k_blocks);
  AVSEP_CHECK(cfg.channels >= 1 && cfg.visual_channels >= 1,
              "separator: channel counts must be >= 1");
  AVSEP_CHECK(cfg.block_hidden >= 1, "separator: block_hidden must be >= 1");
  AVSEP_CHECK(cfg.d_lip >= 1 && cfg.d_expr >= 1, "separator: visual dims must be >= 1");
  validate_stft_params(cfg.stft);
}

std::string separator_config_json(const SeparatorConfig& cfg) {
  nlohmann::json j{{"k_blocks", cfg.k_blocks},
                   {"channels", cfg.channels},
                   {"visual_channels", cfg.visual_channels},
                   {"block_hidden", cfg.block_hidden},
                   {"d_lip", cfg.d_lip},
                   {"d_expr", cfg.d_expr},
                   {"stft", detail::stft_to_json(cfg.stft)}};
  return j.dump();
}

SeparatorConfig parse_separator_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("separator config: not valid JSON: ") + e.what());
  }
  detail::expect_keys(j,
                      {"k_blocks", "channels", "visual_channels", "block_hidden",
                       "d_lip", "d_expr", "stft"},
                      "separator");
  SeparatorConfig cfg;
  cfg.k_blocks = j.value("k_blocks", cfg.k_blocks);
  cfg.channels = j.value("channels", cfg.channels);
  cfg.visual_channels = j.value("visual_channels", cfg.visual_channels);
  cfg.block_hidden = j.value("block_hidden", cfg.block_hidden);
  cfg.d_lip = j.value("d_lip", cfg.d_lip);
  cfg.d_expr = j.value("d_expr", cfg.d_expr);
  if (j.contains("stft")) cfg.stft = detail::stft_from_json(j.at("stft"), "separator.stft");
  return cfg;
}

namespace {

// Three per-gate orthogonal blocks stacked into the {3H, H} recurrent matrix.
Tensor stacked_orthogonal(Rng& rng, int hidden) {
  Tensor w({3 * hidden, hidden});
  for (int g = 0; g < 3; ++g) {
    const Tensor q = orthogonal(rng, hidden, hidden);
    std::copy(q.data.begin(), q.data.end(),
              w.data.begin() + static_cast<std::size_t>(g) * hidden * hidden);
  }
  return w;
}

void add_gru(ParamStore& p, Rng& rng, const std::string& prefix, int in_ch, int hidden) {
  p.add(prefix + ".w_ih", glorot_uniform(rng, {3 * hidden, in_ch}, in_ch, hidden));
  p.add(prefix + ".b_ih", zeros({3 * hidden}));
  p.add(prefix + ".w_hh", stacked_orthogonal(rng, hidden));
  p.add(prefix + ".b_hh", zeros({3 * hidden}));
}

}  // namespace

Separator::Separator(const SeparatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate_separator_config(cfg_);
  Rng rng = Rng::keyed(seed, {kStreamInit, 1});
  const int c = cfg_.channels, cv = cfg_.visual_channels, h = cfg_.block_hidden;
  const int d_vis = cfg_.d_lip + cfg_.d_expr;

  params_.add("enc.w", orthogonal(rng, c, 2 * 3 * 3));
  params_.add("enc.b", zeros({c}));
  params_.add("enc.ln.gamma", full({c}, 1.0));
  params_.add("enc.ln.beta", zeros({c}));
  params_.add("vis.w", glorot_uniform(rng, {cv, d_vis}, d_vis, cv));
  params_.add("vis.b", zeros({cv}));
  params_.add("fuse.w", orthogonal(rng, c, c + cv));
  params_.add("fuse.b", zeros({c}));

  for (int k = 0; k < cfg_.k_blocks; ++k) {
    const std::string b = "block" + std::to_string(k);
    params_.add(b + ".ln_t.gamma", full({c}, 1.0));
    params_.add(b + ".ln_t.beta", zeros({c}));
    add_gru(params_, rng, b + ".gru_t_f", c, h);
    add_gru(params_, rng, b + ".gru_t_b", c, h);
    // Zero residual projections make every block the identity at init.
    params_.add(b + ".proj_t.w", zeros({c, 2 * h}));
    params_.add(b + ".proj_t.b", zeros({c}));
    params_.add(b + ".ln_f.gamma", full({c}, 1.0));
    params_.add(b + ".ln_f.beta", zeros({c}));
    add_gru(params_, rng, b + ".gru_f_f", c, h);
    add_gru(params_, rng, b + ".gru_f_b", c, h);
    params_.add(b + ".proj_f.w", zeros({c, 2 * h}));
    params_.add(b + ".proj_f.b", zeros({c}));
    const std::string hd = "head" + std::to_string(k);
    params_.add(hd + ".w", orthogonal(rng, c, 2 * 3 * 3));
    params_.add(hd + ".b", zeros({2}));
  }
}

std::vector<int> Separator::latent_shape(int num_samples) const {
  return {cfg_.channels, cfg_.stft.num_bins(),
          cfg_.stft.num_frames(static_cast<std::size_t>(num_samples))};
}

std::vector<Var> Separator::forward_graph(Tape& t, const AudioClip& mixture,
                                          const VisualFeatureSequence& visual) {
  validate_clip(mixture, "separator input");
  validate_visual(visual, "separator visual input");
  AVSEP_CHECK(visual.d_lip == cfg_.d_lip && visual.d_expr == cfg_.d_expr,
              "separator: visual dims (" << visual.d_lip << ", " << visual.d_expr
                                         << ") do not match config (" << cfg_.d_lip
                                         << ", " << cfg_.d_expr << ")");
  AVSEP_CHECK(cfg_.stft.sample_rate == mixture.sample_rate,
              "separator: configured for " << cfg_.stft.sample_rate
                                           << " Hz, input is " << mixture.sample_rate);
  const double frame_span = mixture.sample_rate / visual.fps;
  AVSEP_CHECK(std::fabs(visual.num_frames * frame_span -
                        static_cast<double>(mixture.size())) < 1e-6,
              "separator: visual sequence covers " << visual.num_frames * frame_span
                                                   << " samples, mixture has "
                                                   << mixture.size());

  const int L = static_cast<int>(mixture.size());
  const int c = cfg_.channels, cv = cfg_.visual_channels;
  const std::vector<int> lat = latent_shape(L);
  const int f_bins = lat[1], n_frames_ = lat[2];

  auto P = [&](const std::string& name) {
    return t.leaf(params_.at(name), &params_.grad_at(name));
  };

  // Audio encoder: complex planes -> C channels, normalized per TF position.
  Var wave = t.constant(Tensor({L}, mixture.samples));
  Var spec = ad::stft_var(t, wave, cfg_.stft);
  ad::Conv2dSpec enc_spec;
  enc_spec.in_ch = 2;
  enc_spec.out_ch = c;
  Var x = ad::conv2d(t, spec, P("enc.w"), P("enc.b"), enc_spec);
  x = ad::layer_norm_channels(t, x, P("enc.ln.gamma"), P("enc.ln.beta"));

  // Visual pathway: nearest-frame upsample to the spectrogram frame rate,
  // linear projection, broadcast over frequency, channel concat, 1x1 fusion.
  const int d_vis = cfg_.d_lip + cfg_.d_expr;
  Tensor vis_up({d_vis, n_frames_});
  for (int n = 0; n < n_frames_; ++n) {
    const double t_sec = static_cast<double>(n) * cfg_.stft.hop / mixture.sample_rate;
    int vi = static_cast<int>(t_sec * visual.fps);
    vi = std::clamp(vi, 0, visual.num_frames - 1);
    for (int d = 0; d < cfg_.d_lip; ++d)
      vis_up.data[static_cast<std::size_t>(d) * n_frames_ + n] =
          visual.lip[static_cast<std::size_t>(vi) * cfg_.d_lip + d];
    for (int d = 0; d < cfg_.d_expr; ++d)
      vis_up.data[static_cast<std::size_t>(cfg_.d_lip + d) * n_frames_ + n] =
          visual.expr[static_cast<std::size_t>(vi) * cfg_.d_expr + d];
  }
  Var vproj = t.matmul(P("vis.w"), t.constant(std::move(vis_up)));
  vproj = t.add_bias_rows(vproj, P("vis.b"));
  Var vmap = ad::broadcast_freq(t, vproj, f_bins);
  Var cat = t.concat_rows({x, vmap});
  x = t.add_bias_rows(t.matmul(P("fuse.w"), cat), P("fuse.b"));

  // Blocks: two residual sub-layers, recurrent over time then frequency.
  std::vector<Var> estimates;
  ad::Conv2dSpec head_spec;
  head_spec.in_ch = c;
  head_spec.out_ch = 2;
  for (int k = 0; k < cfg_.k_blocks; ++k) {
    const std::string b = "block" + std::to_string(k);
    Var u = ad::layer_norm_channels(t, x, P(b + ".ln_t.gamma"), P(b + ".ln_t.beta"));
    Var tf = ad::gru_sweep(t, u, P(b + ".gru_t_f.w_ih"), P(b + ".gru_t_f.b_ih"),
                           P(b + ".gru_t_f.w_hh"), P(b + ".gru_t_f.b_hh"),
                           ad::GruAxis::kTime, false);
    Var tb = ad::gru_sweep(t, u, P(b + ".gru_t_b.w_ih"), P(b + ".gru_t_b.b_ih"),
                           P(b + ".gru_t_b.w_hh"), P(b + ".gru_t_b.b_hh"),
                           ad::GruAxis::kTime, true);
    Var pt = t.matmul(P(b + ".proj_t.w"), t.concat_rows({tf, tb}));
    x = t.add(x, t.add_bias_rows(pt, P(b + ".proj_t.b")));

    Var v = ad::layer_norm_channels(t, x, P(b + ".ln_f.gamma"), P(b + ".ln_f.beta"));
    Var ff = ad::gru_sweep(t, v, P(b + ".gru_f_f.w_ih"), P(b + ".gru_f_f.b_ih"),
                           P(b + ".gru_f_f.w_hh"), P(b + ".gru_f_f.b_hh"),
                           ad::GruAxis::kFreq, false);
    Var fb = ad::gru_sweep(t, v, P(b + ".gru_f_b.w_ih"), P(b + ".gru_f_b.b_ih"),
                           P(b + ".gru_f_b.w_hh"), P(b + ".gru_f_b.b_hh"),
                           ad::GruAxis::kFreq, true);
    Var pf = t.matmul(P(b + ".proj_f.w"), t.concat_rows({ff, fb}));
    x = t.add(x, t.add_bias_rows(pf, P(b + ".proj_f.b")));

    const std::string hd = "head" + std::to_string(k);
    Var spec_k = ad::conv_transpose2d(t, x, P(hd + ".w"), P(hd + ".b"), head_spec);
    estimates.push_back(ad::istft_var(t, spec_k, cfg_.stft, L));
  }
  return estimates;
}

SeparationOutput Separator::forward(const AudioClip& mixture,
                                    const VisualFeatureSequence& visual) {
  Tape t;
  const std::vector<Var> ests = forward_graph(t, mixture, visual);
  SeparationOutput out;
  out.latent_shape = latent_shape(static_cast<int>(mixture.size()));
  for (Var e : ests) {
    const Tensor& w = t.value(e);
    for (double v : w.data) {
      AVSEP_CHECK_FINITE(std::isfinite(v), "numerical divergence in separator output");
    }
    out.intermediates.emplace_back(w.data, mixture.sample_rate);
  }
  out.final_estimate = out.intermediates.back();
  return out;
}

}  // namespace avsep
