// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/mix.h"

#include <algorithm>
#include <cmath>

#include "avsep/error.h"

namespace avsep {

namespace {

constexpr double kSilentChunkRms = 1e-6;
constexpr int kMaxChunkTries = 10;

// Degenerate ranges (lo == hi, including +inf for a pure-impulse RIR) must
// not go through lo + (hi-lo)*u, which is NaN for infinities.
double draw(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return rng.uniform(lo, hi);
}

AudioClip chunk_of(const AudioClip& utterance, std::int64_t offset, std::size_t len) {
  std::vector<double> s(utterance.samples.begin() + offset,
                        utterance.samples.begin() + offset + static_cast<std::int64_t>(len));
  return AudioClip(std::move(s), utterance.sample_rate);
}

}  // namespace

void validate_rir_config(const RirConfig& cfg) {
  AVSEP_CHECK(cfg.sample_rate > 0, "rir: sample_rate must be positive");
  AVSEP_CHECK(cfg.t60_lo_s > 0 && cfg.t60_lo_s <= cfg.t60_hi_s,
              "rir: bad t60 range [" << cfg.t60_lo_s << ", " << cfg.t60_hi_s << "]");
  AVSEP_CHECK(cfg.rir_seconds >= cfg.t60_hi_s,
              "rir: rir_seconds " << cfg.rir_seconds << " must cover t60 upper bound "
                                  << cfg.t60_hi_s);
  AVSEP_CHECK(cfg.drr_lo_db <= cfg.drr_hi_db, "rir: bad direct-to-reverberant range");
}

void validate_music_config(const MusicConfig& cfg) {
  AVSEP_CHECK(cfg.sample_rate > 0, "music: sample_rate must be positive");
  AVSEP_CHECK(cfg.n_partials_lo >= 0 && cfg.n_partials_lo <= cfg.n_partials_hi,
              "music: bad partial count range");
  AVSEP_CHECK(cfg.fundamental_lo_hz > 0 &&
                  cfg.fundamental_lo_hz <= cfg.fundamental_hi_hz,
              "music: bad fundamental range");
  AVSEP_CHECK(cfg.fundamental_hi_hz * std::max(cfg.n_partials_hi, 1) <
                  cfg.sample_rate / 2.0,
              "music: highest partial " << cfg.fundamental_hi_hz * cfg.n_partials_hi
                                        << " Hz reaches Nyquist");
  AVSEP_CHECK(cfg.amplitude_decay > 0 && cfg.amplitude_decay <= 1.0,
              "music: amplitude_decay must be in (0, 1]");
}

void validate_bank(const SourceBank& bank) {
  AVSEP_CHECK(!bank.target_utterances.empty(), "bank: no target utterances");
  AVSEP_CHECK(!bank.interferer_utterances.empty(), "bank: no interferer utterances");
  const int sr = bank.target_utterances.front().sample_rate;
  for (const AudioClip& c : bank.target_utterances)
    AVSEP_CHECK(c.sample_rate == sr, "bank: mixed sample rates among utterances");
  for (const AudioClip& c : bank.interferer_utterances)
    AVSEP_CHECK(c.sample_rate == sr, "bank: mixed sample rates among utterances");
  AVSEP_CHECK(bank.rir.sample_rate == sr, "bank: rir sample rate differs from clips");
  AVSEP_CHECK(bank.music.sample_rate == sr, "bank: music sample rate differs from clips");
  validate_rir_config(bank.rir);
  validate_music_config(bank.music);
}

SourceBank make_synthetic_bank(const SyntheticBankConfig& cfg, std::uint64_t seed) {
  AVSEP_CHECK(cfg.num_target_utterances > 0 && cfg.num_interferer_utterances > 0,
              "bank: utterance counts must be positive");
  AVSEP_CHECK(cfg.utterance_seconds > 0, "bank: utterance_seconds must be positive");
  SourceBank bank;
  bank.seed = seed;
  bank.rir.sample_rate = cfg.sample_rate;
  bank.music.sample_rate = cfg.sample_rate;
  SpeechGenConfig sp = cfg.speech;
  sp.sample_rate = cfg.sample_rate;
  for (int i = 0; i < cfg.num_target_utterances; ++i) {
    Rng r = Rng::keyed(seed, {kStreamSpeech, 0, static_cast<std::uint64_t>(i)});
    bank.target_utterances.push_back(synth_speech(sp, cfg.utterance_seconds, r));
  }
  for (int i = 0; i < cfg.num_interferer_utterances; ++i) {
    Rng r = Rng::keyed(seed, {kStreamSpeech, 1, static_cast<std::uint64_t>(i)});
    bank.interferer_utterances.push_back(synth_speech(sp, cfg.utterance_seconds, r));
  }
  validate_bank(bank);
  return bank;
}

AudioClip synth_rir_t60(const RirConfig& cfg, double t60_s, Rng& rng) {
  validate_rir_config(cfg);
  AVSEP_CHECK(t60_s > 0, "rir: t60 must be positive");
  const int sr = cfg.sample_rate;
  const std::size_t len = static_cast<std::size_t>(std::llround(cfg.rir_seconds * sr));
  AVSEP_CHECK(len >= 2, "rir: rir_seconds too short for sample rate");
  const double drr_db = draw(rng, cfg.drr_lo_db, cfg.drr_hi_db);

  std::vector<double> h(len, 0.0);
  h[0] = 1.0;  // direct path, unit amplitude at lag 0
  double tail_energy = 0.0;
  for (std::size_t i = 1; i < len; ++i) {
    const double t = static_cast<double>(i) / sr;
    h[i] = rng.normal() * std::pow(10.0, -3.0 * t / t60_s);
    tail_energy += h[i] * h[i];
  }
  // Scale the tail so direct/reverberant energy equals the drawn DRR.
  // An infinite DRR degenerates to a pure impulse.
  const double target_tail = std::pow(10.0, -drr_db / 10.0);
  const double g = tail_energy > 0.0 ? std::sqrt(target_tail / tail_energy) : 0.0;
  for (std::size_t i = 1; i < len; ++i) h[i] *= g;
  return AudioClip(std::move(h), sr);
}

AudioClip synth_rir(const RirConfig& cfg, Rng& rng) {
  validate_rir_config(cfg);
  const double t60 = draw(rng, cfg.t60_lo_s, cfg.t60_hi_s);
  return synth_rir_t60(cfg, t60, rng);
}

AudioClip synth_music(const MusicConfig& cfg, double seconds, Rng& rng) {
  validate_music_config(cfg);
  AVSEP_CHECK(seconds > 0, "music: duration must be positive");
  const int sr = cfg.sample_rate;
  const std::size_t n = static_cast<std::size_t>(std::llround(seconds * sr));
  AVSEP_CHECK(n > 0, "music: duration too short for sample rate");
  const int num_partials =
      static_cast<int>(rng.uniform_int(cfg.n_partials_lo, cfg.n_partials_hi));
  std::vector<double> out(n, 0.0);
  if (num_partials == 0) return AudioClip(std::move(out), sr);

  const double f0 = rng.uniform(cfg.fundamental_lo_hz, cfg.fundamental_hi_hz);
  struct Partial {
    double amp, phase, lfo_rate, lfo_phase;
  };
  std::vector<Partial> parts(num_partials);
  for (int p = 0; p < num_partials; ++p) {
    parts[p] = {std::pow(cfg.amplitude_decay, p), rng.uniform(0.0, 2.0 * M_PI),
                rng.uniform(0.15, 1.2), rng.uniform(0.0, 2.0 * M_PI)};
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double s = 0.0;
    for (int p = 0; p < num_partials; ++p) {
      const Partial& q = parts[p];
      const double am = 1.0 + 0.35 * std::sin(2.0 * M_PI * q.lfo_rate * t + q.lfo_phase);
      s += q.amp * am * std::sin(2.0 * M_PI * (p + 1) * f0 * t + q.phase);
    }
    out[i] = s;
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::fabs(v));
  if (peak > 0.0) {
    const double g = 0.9 / peak;
    for (double& v : out) v *= g;
  }
  return AudioClip(std::move(out), sr);
}

ProgressiveLadder build_ladder(const AudioClip& reverberant_target,
                               const AudioClip& interference_sum, double s0_db,
                               double step_db, int k_layers) {
  AVSEP_CHECK(k_layers >= 1, "ladder: K must be >= 1, got " << k_layers);
  AVSEP_CHECK(reverberant_target.size() == interference_sum.size() &&
                  reverberant_target.sample_rate == interference_sum.sample_rate,
              "ladder: target and interference must share length and rate");
  ProgressiveLadder ladder;
  ladder.initial_snr_db = s0_db;
  ladder.step_db = step_db;
  ladder.num_layers = k_layers;
  if (k_layers >= 2) {
    AVSEP_CHECK(rms(interference_sum) > 0.0, "ladder: silent interference");
    for (int k = 1; k < k_layers; ++k) {
      const double g =
          gain_for_snr(reverberant_target, interference_sum, s0_db + k * step_db);
      ladder.gains.push_back(g);
      ladder.targets.push_back(mix_add(reverberant_target, scale(interference_sum, g)));
    }
  }
  ladder.targets.push_back(reverberant_target);  // entry K: the target, unmixed
  return ladder;
}

namespace {

// Draws chunk offsets until the dry chunk is non-silent; the retry budget
// guards against utterances dominated by pauses.
AudioClip draw_chunk(const AudioClip& utterance, std::size_t chunk_len, Rng& rng,
                     std::int64_t* offset_out, const char* role) {
  AVSEP_CHECK(utterance.size() >= chunk_len,
              role << " utterance (" << utterance.size()
                   << " samples) shorter than chunk (" << chunk_len << ")");
  const std::int64_t max_off =
      static_cast<std::int64_t>(utterance.size() - chunk_len);
  for (int attempt = 0; attempt < kMaxChunkTries; ++attempt) {
    const std::int64_t off = rng.uniform_int(0, max_off);
    AudioClip c = chunk_of(utterance, off, chunk_len);
    if (rms(c) >= kSilentChunkRms) {
      *offset_out = off;
      return c;
    }
  }
  throw ValidationError(std::string("unusable source: ") + role +
                        " chunk silent after 10 tries");
}

}  // namespace

MixtureSample build_sample(const SourceBank& bank, double snr_db, double chunk_seconds,
                           int num_interfering_speakers, bool include_music,
                           int k_layers, Rng& rng, double ladder_step_db) {
  validate_bank(bank);
  AVSEP_CHECK(k_layers >= 1, "build_sample: K must be >= 1");
  AVSEP_CHECK(num_interfering_speakers >= 0,
              "build_sample: negative interferer count");
  AVSEP_CHECK(num_interfering_speakers > 0 || include_music,
              "no interference: need at least one interfering speaker or music");
  const int sr = bank.target_utterances.front().sample_rate;
  const std::size_t chunk_len =
      static_cast<std::size_t>(std::llround(chunk_seconds * sr));
  AVSEP_CHECK(chunk_len > 0, "build_sample: chunk too short");

  MixtureSample s;
  s.meta.snr_db = snr_db;
  s.meta.t60_s = draw(rng, bank.rir.t60_lo_s, bank.rir.t60_hi_s);  // one room draw

  // Target: dry chunk, then its own RIR from the room.
  s.meta.target_index = static_cast<int>(
      rng.uniform_int(0, static_cast<std::int64_t>(bank.target_utterances.size()) - 1));
  s.anechoic_target = draw_chunk(bank.target_utterances[s.meta.target_index], chunk_len,
                                 rng, &s.meta.chunk_offset, "target");
  const AudioClip rir_target = synth_rir_t60(bank.rir, s.meta.t60_s, rng);
  s.reverberant_target = convolve_rir(s.anechoic_target, rir_target);

  // Interference: each source reverberated through its own RIR, then summed.
  AudioClip interference(std::vector<double>(chunk_len, 0.0), sr);
  for (int i = 0; i < num_interfering_speakers; ++i) {
    const int idx = static_cast<int>(rng.uniform_int(
        0, static_cast<std::int64_t>(bank.interferer_utterances.size()) - 1));
    s.meta.interferer_indices.push_back(idx);
    std::int64_t off = 0;
    AudioClip dry =
        draw_chunk(bank.interferer_utterances[idx], chunk_len, rng, &off, "interferer");
    const AudioClip rir_i = synth_rir_t60(bank.rir, s.meta.t60_s, rng);
    interference = mix_add(interference, convolve_rir(dry, rir_i));
  }
  if (include_music) {
    s.meta.has_music = true;
    AudioClip music = synth_music(bank.music, chunk_seconds, rng);
    const AudioClip rir_m = synth_rir_t60(bank.rir, s.meta.t60_s, rng);
    interference = mix_add(interference, convolve_rir(music, rir_m));
  }

  // One global rescale makes the requested SNR exact.
  const double g = gain_for_snr(s.reverberant_target, interference, snr_db);
  s.interference_sum = scale(interference, g);
  s.mixture = mix_add(s.reverberant_target, s.interference_sum);
  s.meta.measured_snr_db = measure_snr_db(s.reverberant_target, s.interference_sum);

  s.ladder = build_ladder(s.reverberant_target, s.interference_sum, snr_db,
                          ladder_step_db, k_layers);
  s.visual =
      gen_visual_features(s.anechoic_target, kVisualFps, kLipDims, kExpressionDims, rng);
  validate_sample(s, "built sample");
  return s;
}

void validate_sample(const MixtureSample& s, const char* what) {
  const std::size_t n = s.mixture.size();
  const int sr = s.mixture.sample_rate;
  AVSEP_CHECK(n > 0, what << ": empty mixture");
  for (const AudioClip* c : {&s.reverberant_target, &s.anechoic_target,
                             &s.interference_sum}) {
    AVSEP_CHECK(c->size() == n && c->sample_rate == sr,
                what << ": component length/rate mismatch");
  }
  validate_clip(s.mixture, what);
  validate_clip(s.reverberant_target, what);
  validate_clip(s.anechoic_target, what);
  validate_clip(s.interference_sum, what);

  for (std::size_t i = 0; i < n; ++i) {
    const double gap = s.mixture.samples[i] -
                       (s.reverberant_target.samples[i] + s.interference_sum.samples[i]);
    AVSEP_CHECK(std::fabs(gap) <= 1e-9,
                what << ": mixture not additive at sample " << i << " (gap " << gap
                     << ")");
  }
  const double measured = measure_snr_db(s.reverberant_target, s.interference_sum);
  AVSEP_CHECK(std::fabs(measured - s.meta.measured_snr_db) <= 1e-9,
              what << ": stored measured SNR " << s.meta.measured_snr_db
                   << " disagrees with recomputed " << measured);
  AVSEP_CHECK(std::fabs(measured - s.meta.snr_db) <= 1e-6,
              what << ": measured SNR " << measured << " != requested "
                   << s.meta.snr_db);

  const int k = s.ladder.num_layers;
  AVSEP_CHECK(k >= 1 && static_cast<int>(s.ladder.targets.size()) == k,
              what << ": ladder must hold exactly K entries");
  AVSEP_CHECK(static_cast<int>(s.ladder.gains.size()) == k - 1,
              what << ": ladder must hold K-1 gains");
  for (const AudioClip& e : s.ladder.targets) {
    AVSEP_CHECK(e.size() == n && e.sample_rate == sr,
                what << ": ladder entry length/rate mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    AVSEP_CHECK(s.ladder.targets[k - 1].samples[i] ==
                    s.reverberant_target.samples[i],
                what << ": ladder entry K differs from reverberant target");
  }
  double prev_snr = s.meta.measured_snr_db;
  for (int j = 0; j < k - 1; ++j) {
    const AudioClip scaled = scale(s.interference_sum, s.ladder.gains[j]);
    const double snr_j = measure_snr_db(s.reverberant_target, scaled);
    const double expect = s.ladder.initial_snr_db + (j + 1) * s.ladder.step_db;
    AVSEP_CHECK(std::fabs(snr_j - expect) <= 1e-6,
                what << ": ladder entry " << (j + 1) << " SNR " << snr_j
                     << " != expected " << expect);
    AVSEP_CHECK(snr_j > prev_snr, what << ": ladder SNR not strictly increasing");
    prev_snr = snr_j;
    for (std::size_t i = 0; i < n; ++i) {
      const double gap = s.ladder.targets[j].samples[i] -
                         (s.reverberant_target.samples[i] + scaled.samples[i]);
      AVSEP_CHECK(std::fabs(gap) <= 1e-9,
                  what << ": ladder entry " << (j + 1) << " not target + scaled"
                       << " interference (gap " << gap << ")");
    }
  }

  validate_visual(s.visual, what);
  const double expect_frames = s.mixture.duration_seconds() * s.visual.fps;
  AVSEP_CHECK(std::fabs(expect_frames - s.visual.num_frames) < 1e-6,
              what << ": visual frame count " << s.visual.num_frames
                   << " != chunk duration x fps " << expect_frames);
}

}  // namespace avsep
