// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/dereverb.h"

#include <cmath>
#include <string>
#include <vector>

#include "avsep/error.h"
#include "avsep/nn_ops.h"
#include "json_util.h"

namespace avsep {

using ad::Tape;
using ad::Tensor;
using ad::Var;

void validate_dereverb_config(const DereverbConfig& cfg) {
  AVSEP_CHECK(cfg.depth >= 1, "dereverb: depth must be >= 1, got " << cfg.depth);
  AVSEP_CHECK(cfg.base_channels >= 1, "dereverb: base_channels must be >= 1");
  validate_stft_params(cfg.stft);
}

std::string dereverb_config_json(const DereverbConfig& cfg) {
  nlohmann::json j{{"depth", cfg.depth},
                   {"base_channels", cfg.base_channels},
                   {"stft", detail::stft_to_json(cfg.stft)}};
  return j.dump();
}

DereverbConfig parse_dereverb_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("dereverb config: not valid JSON: ") + e.what());
  }
  detail::expect_keys(j, {"depth", "base_channels", "stft"}, "dereverb");
  DereverbConfig cfg;
  cfg.depth = j.value("depth", cfg.depth);
  cfg.base_channels = j.value("base_channels", cfg.base_channels);
  if (j.contains("stft")) cfg.stft = detail::stft_from_json(j.at("stft"), "dereverb.stft");
  return cfg;
}

namespace {

int level_channels(int base, int level) { return base << level; }

int pad_to_multiple(int extent, int multiple) {
  return ((extent + multiple - 1) / multiple) * multiple;
}

}  // namespace

Dereverb::Dereverb(const DereverbConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate_dereverb_config(cfg_);
  Rng rng = Rng::keyed(seed, {kStreamInit, 2});
  const int base = cfg_.base_channels;
  for (int j = 0; j < cfg_.depth; ++j) {
    const int in_ch = j == 0 ? 1 : level_channels(base, j - 1);
    const int out_ch = level_channels(base, j);
    params_.add("enc" + std::to_string(j) + ".w",
                orthogonal(rng, out_ch, in_ch * 4 * 4));
    params_.add("enc" + std::to_string(j) + ".b", zeros({out_ch}));
  }
  for (int j = cfg_.depth - 1; j >= 0; --j) {
    const int in_ch =
        j == cfg_.depth - 1 ? level_channels(base, j) : 2 * level_channels(base, j);
    const int out_ch = j == 0 ? base : level_channels(base, j - 1);
    params_.add("dec" + std::to_string(j) + ".w",
                orthogonal(rng, in_ch, out_ch * 4 * 4));
    params_.add("dec" + std::to_string(j) + ".b", zeros({out_ch}));
  }
  // Zero head: the network starts as an exact identity on the spectrogram.
  params_.add("out.w", zeros({1, cfg_.base_channels * 3 * 3}));
  params_.add("out.b", zeros({1}));
}

Dereverb::GraphOutput Dereverb::forward_graph_from(Tape& t, Var wave, int num_samples,
                                                   int sample_rate) {
  AVSEP_CHECK(cfg_.stft.sample_rate == sample_rate,
              "dereverb: configured for " << cfg_.stft.sample_rate << " Hz, input is "
                                          << sample_rate);
  auto P = [&](const std::string& name) {
    return t.leaf(params_.at(name), &params_.grad_at(name));
  };
  const int base = cfg_.base_channels;
  const int f_bins = cfg_.stft.num_bins();
  const int n_frames = cfg_.stft.num_frames(static_cast<std::size_t>(num_samples));

  Var spec = ad::stft_var(t, wave, cfg_.stft);
  Var lm = ad::logmag(t, spec);
  Var x = t.reshape(lm, {1, f_bins, n_frames});
  // Fixed affine keeps typical log-magnitudes within the active tanh range.
  x = t.scale(t.add_const(x, 4.0), 0.2);

  const int mult = 1 << cfg_.depth;
  const int f_pad = pad_to_multiple(f_bins, mult);
  const int n_pad = pad_to_multiple(n_frames, mult);
  x = ad::pad2d_replicate(t, x, f_pad, n_pad);

  ad::Conv2dSpec down;
  down.kh = down.kw = 4;
  down.stride = 2;
  down.pad = 1;
  std::vector<Var> skips;
  for (int j = 0; j < cfg_.depth; ++j) {
    down.in_ch = j == 0 ? 1 : level_channels(base, j - 1);
    down.out_ch = level_channels(base, j);
    x = t.tanh_(ad::conv2d(t, x, P("enc" + std::to_string(j) + ".w"),
                           P("enc" + std::to_string(j) + ".b"), down));
    skips.push_back(x);
  }
  ad::Conv2dSpec up = down;
  for (int j = cfg_.depth - 1; j >= 0; --j) {
    Var in = j == cfg_.depth - 1 ? x : t.concat_rows({x, skips[j]});
    up.in_ch = j == cfg_.depth - 1 ? level_channels(base, j)
                                   : 2 * level_channels(base, j);
    up.out_ch = j == 0 ? base : level_channels(base, j - 1);
    x = t.tanh_(ad::conv_transpose2d(t, in, P("dec" + std::to_string(j) + ".w"),
                                     P("dec" + std::to_string(j) + ".b"), up));
  }
  ad::Conv2dSpec head;
  head.in_ch = base;
  head.out_ch = 1;
  Var res = ad::conv2d(t, x, P("out.w"), P("out.b"), head);
  res = ad::crop2d(t, res, f_bins, n_frames);
  res = t.reshape(res, {f_bins, n_frames});

  // exp(residual) scales both complex planes: enhanced magnitude, input phase.
  Var gain = t.exp_(res);
  Var gain1 = t.reshape(gain, {1, f_bins, n_frames});
  Var gain2 = t.concat_rows({gain1, gain1});
  Var out_spec = t.mul(spec, gain2);

  GraphOutput out;
  out.wave = ad::istft_var(t, out_spec, cfg_.stft, num_samples);
  out.enhanced_logmag = t.add(lm, res);
  out.input_logmag = lm;
  return out;
}

Dereverb::GraphOutput Dereverb::forward_graph(Tape& t, const AudioClip& reverberant) {
  validate_clip(reverberant, "dereverb input");
  Var wave =
      t.constant(Tensor({static_cast<int>(reverberant.size())}, reverberant.samples));
  return forward_graph_from(t, wave, static_cast<int>(reverberant.size()),
                            reverberant.sample_rate);
}

AudioClip Dereverb::forward(const AudioClip& reverberant) {
  Tape t;
  const GraphOutput g = forward_graph(t, reverberant);
  const Tensor& w = t.value(g.wave);
  for (double v : w.data) {
    AVSEP_CHECK_FINITE(std::isfinite(v), "numerical divergence in dereverb output");
  }
  return AudioClip(w.data, reverberant.sample_rate);
}

}  // namespace avsep
