// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/speechgen.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "avsep/error.h"

namespace avsep {

namespace {

// Two-pole resonator (formant model): unity DC gain, resonant peak at f_hz
// with approximate bandwidth bw_hz.
struct Resonator {
  double b1 = 0.0, c = 0.0, a = 1.0;
  double y1 = 0.0, y2 = 0.0;

  void set(double f_hz, double bw_hz, int sr) {
    const double r = std::exp(-M_PI * bw_hz / sr);
    c = -r * r;
    b1 = 2.0 * r * std::cos(2.0 * M_PI * f_hz / sr);
    a = 1.0 - b1 - c;
    y1 = y2 = 0.0;
  }
  double step(double x) {
    const double y = a * x + b1 * y1 + c * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

// One-pole lowpass used twice to give the pulse train a glottal-like
// spectral rolloff.
struct OnePoleLp {
  double a = 0.0, y = 0.0;
  void set(double cutoff_hz, int sr) { a = std::exp(-2.0 * M_PI * cutoff_hz / sr); }
  double step(double x) {
    y = (1.0 - a) * x + a * y;
    return y;
  }
};

}  // namespace

void validate_speechgen_config(const SpeechGenConfig& cfg) {
  AVSEP_CHECK(cfg.sample_rate > 0, "speechgen: sample_rate must be positive");
  AVSEP_CHECK(cfg.f0_lo_hz > 0 && cfg.f0_lo_hz <= cfg.f0_hi_hz,
              "speechgen: bad f0 range [" << cfg.f0_lo_hz << ", " << cfg.f0_hi_hz << "]");
  AVSEP_CHECK(cfg.f0_hi_hz < cfg.sample_rate / 2.0, "speechgen: f0 above Nyquist");
  AVSEP_CHECK(cfg.voiced_lo_s > 0 && cfg.voiced_lo_s <= cfg.voiced_hi_s,
              "speechgen: bad voiced duration range");
  AVSEP_CHECK(cfg.pause_lo_s >= 0 && cfg.pause_lo_s <= cfg.pause_hi_s,
              "speechgen: bad pause duration range");
  AVSEP_CHECK(cfg.breath_level >= 0, "speechgen: breath_level must be >= 0");
}

AudioClip synth_speech(const SpeechGenConfig& cfg, double seconds, Rng& rng) {
  validate_speechgen_config(cfg);
  AVSEP_CHECK(seconds > 0, "speechgen: duration must be positive, got " << seconds);
  const int sr = cfg.sample_rate;
  const std::size_t n = static_cast<std::size_t>(std::llround(seconds * sr));
  AVSEP_CHECK(n > 0, "speechgen: duration too short for sample rate");

  // Speaker identity: pitch base and formant center ranges.
  const double f0_base = rng.uniform(cfg.f0_lo_hz, cfg.f0_hi_hz);
  const double f1_lo = rng.uniform(300.0, 450.0), f1_hi = f1_lo + 350.0;
  const double f2_lo = rng.uniform(900.0, 1200.0), f2_hi = f2_lo + 800.0;
  const double f3_lo = rng.uniform(2200.0, 2500.0), f3_hi = f3_lo + 600.0;
  const double vibrato_hz = rng.uniform(4.0, 6.5);
  const double vibrato_phase = rng.uniform(0.0, 2.0 * M_PI);

  // Voiced/pause timeline. Starts voiced so short clips contain speech.
  // mask holds the amplitude envelope (cosine ramps at segment edges).
  std::vector<double> mask(n, 0.0);
  // Per-voiced-segment formant targets, indexed by segment id per sample.
  std::vector<int> segment_of(n, -1);
  struct Segment {
    double f1, f2, f3, b1, b2, b3;
    double am_rate, am_phase;
  };
  std::vector<Segment> segments;
  const std::size_t ramp = static_cast<std::size_t>(0.02 * sr);
  std::size_t pos = 0;
  while (pos < n) {
    const std::size_t seg_len = static_cast<std::size_t>(
        std::llround(rng.uniform(cfg.voiced_lo_s, cfg.voiced_hi_s) * sr));
    Segment seg;
    seg.f1 = rng.uniform(f1_lo, f1_hi);
    seg.f2 = rng.uniform(f2_lo, f2_hi);
    seg.f3 = rng.uniform(f3_lo, f3_hi);
    seg.b1 = rng.uniform(60.0, 110.0);
    seg.b2 = rng.uniform(80.0, 150.0);
    seg.b3 = rng.uniform(120.0, 200.0);
    seg.am_rate = rng.uniform(2.5, 5.0);
    seg.am_phase = rng.uniform(0.0, 2.0 * M_PI);
    const int seg_id = static_cast<int>(segments.size());
    segments.push_back(seg);
    const std::size_t end = std::min(n, pos + seg_len);
    for (std::size_t i = pos; i < end; ++i) {
      double env = 1.0;
      const std::size_t into = i - pos, left = end - 1 - i;
      if (into < ramp) env = 0.5 * (1.0 - std::cos(M_PI * into / ramp));
      if (left < ramp) env = std::min(env, 0.5 * (1.0 - std::cos(M_PI * left / ramp)));
      mask[i] = env;
      segment_of[i] = seg_id;
    }
    pos = end;
    pos += static_cast<std::size_t>(
        std::llround(rng.uniform(cfg.pause_lo_s, cfg.pause_hi_s) * sr));
  }

  // Slow pitch drift: piecewise-linear random walk at 100 ms knots.
  const std::size_t knot_hop = static_cast<std::size_t>(0.1 * sr);
  const std::size_t n_knots = n / knot_hop + 2;
  std::vector<double> drift(n_knots, 0.0);
  for (std::size_t k = 1; k < n_knots; ++k) {
    drift[k] = 0.9 * drift[k - 1] + 0.02 * rng.normal();
  }

  // Glottal source: impulses on phase wrap, jittered amplitude, aspiration
  // noise during voicing, shaped by two lowpass stages.
  OnePoleLp lp1, lp2;
  lp1.set(150.0, sr);
  lp2.set(150.0, sr);
  Resonator r1, r2, r3;
  int active_segment = -2;
  double phase = 0.0;
  double prev_tract = 0.0;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const int seg_id = segment_of[i];
    if (seg_id >= 0 && seg_id != active_segment) {
      const Segment& s = segments[seg_id];
      r1.set(s.f1, s.b1, sr);
      r2.set(s.f2, s.b2, sr);
      r3.set(s.f3, s.b3, sr);
      active_segment = seg_id;
    }
    double src = 0.0;
    if (seg_id >= 0) {
      const std::size_t k = i / knot_hop;
      const double frac = static_cast<double>(i % knot_hop) / knot_hop;
      const double dk = drift[k] * (1.0 - frac) + drift[k + 1] * frac;
      const double f0 = f0_base *
                        (1.0 + 0.05 * std::sin(2.0 * M_PI * vibrato_hz * t + vibrato_phase)) *
                        (1.0 + dk);
      phase += f0 / sr;
      if (phase >= 1.0) {
        phase -= 1.0;
        src = 1.0 + 0.05 * rng.normal();
      }
      src += cfg.breath_level * rng.normal();
    } else {
      phase = 0.0;
    }
    const double shaped = lp2.step(lp1.step(src)) * 40.0;
    const double tract = r3.step(r2.step(r1.step(shaped)));
    // Radiation: first difference brightens the spectrum.
    double y = tract - prev_tract;
    prev_tract = tract;
    if (seg_id >= 0) {
      const Segment& s = segments[seg_id];
      y *= 0.65 + 0.35 * std::fabs(std::sin(2.0 * M_PI * s.am_rate * t + s.am_phase));
    }
    out[i] = y * mask[i];
  }

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::fabs(v));
  if (peak > 0.0) {
    const double g = 0.9 / peak;
    for (double& v : out) v *= g;
  }
  AudioClip clip(std::move(out), sr);
  validate_clip(clip, "synth_speech output");
  return clip;
}

}  // namespace avsep
