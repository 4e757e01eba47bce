// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/visual.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "avsep/error.h"
#include "avsep/fft.h"

namespace avsep {

namespace {

constexpr char kMagic[4] = {'A', 'V', 'F', '1'};
constexpr double kLogFloor = 1e-10;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

void validate_visual(const VisualFeatureSequence& v, const char* what) {
  AVSEP_CHECK(v.num_frames > 0, what << ": no frames");
  AVSEP_CHECK(v.d_lip > 0 && v.d_expr > 0, what << ": feature dims must be positive");
  AVSEP_CHECK(v.fps > 0, what << ": fps must be positive");
  const std::size_t nl = static_cast<std::size_t>(v.num_frames) * v.d_lip;
  const std::size_t ne = static_cast<std::size_t>(v.num_frames) * v.d_expr;
  AVSEP_CHECK(v.lip.size() == nl, what << ": lip matrix size " << v.lip.size()
                                       << " != " << nl);
  AVSEP_CHECK(v.expr.size() == ne, what << ": expression matrix size " << v.expr.size()
                                        << " != " << ne);
  for (double x : v.lip) AVSEP_CHECK(std::isfinite(x), what << ": non-finite lip value");
  for (double x : v.expr)
    AVSEP_CHECK(std::isfinite(x), what << ": non-finite expression value");
}

VisualFeatureSequence gen_visual_features(const AudioClip& target, double fps,
                                          int d_lip, int d_expr, Rng& rng) {
  validate_clip(target, "visual target");
  AVSEP_CHECK(fps > 0, "visual: fps must be positive");
  AVSEP_CHECK(d_lip >= 4, "visual: d_lip must be >= 4, got " << d_lip);
  AVSEP_CHECK(d_expr >= 1, "visual: d_expr must be >= 1, got " << d_expr);
  const double hop_f = target.sample_rate / fps;
  const std::size_t hop = static_cast<std::size_t>(std::llround(hop_f));
  AVSEP_CHECK(hop > 0 && std::fabs(hop_f - static_cast<double>(hop)) < 1e-9,
              "visual: sample_rate " << target.sample_rate
                                     << " not an integer multiple of fps " << fps);
  AVSEP_CHECK(target.size() % hop == 0,
              "visual: clip length " << target.size()
                                     << " not a whole number of video frames (hop "
                                     << hop << ")");
  const int n_frames = static_cast<int>(target.size() / hop);
  AVSEP_CHECK(n_frames > 0, "visual: clip shorter than one video frame");

  VisualFeatureSequence v;
  v.num_frames = n_frames;
  v.d_lip = d_lip;
  v.d_expr = d_expr;
  v.fps = fps;
  v.lip.assign(static_cast<std::size_t>(n_frames) * d_lip, 0.0);
  v.expr.assign(static_cast<std::size_t>(n_frames) * d_expr, 0.0);

  // Log-spaced band edges over the usable spectrum for the envelope summary.
  const int n_bands = d_lip - 4;
  const std::size_t nfft = next_pow2(hop);
  const double f_lo = 100.0, f_hi = 0.45 * target.sample_rate;
  std::vector<double> frame(nfft, 0.0);
  for (int f = 0; f < n_frames; ++f) {
    const double* s = target.samples.data() + static_cast<std::size_t>(f) * hop;
    double energy = 0.0;
    for (std::size_t i = 0; i < hop; ++i) energy += s[i] * s[i];
    const double frame_rms = std::sqrt(energy / static_cast<double>(hop));
    double* row = v.lip.data() + static_cast<std::size_t>(f) * d_lip;
    row[0] = frame_rms;
    row[1] = std::log10(frame_rms * frame_rms + kLogFloor);
    if (n_bands > 0) {
      std::fill(frame.begin(), frame.end(), 0.0);
      std::copy(s, s + hop, frame.begin());
      const std::vector<cplx> spec = rfft(frame);
      const double bin_hz = static_cast<double>(target.sample_rate) / nfft;
      for (int b = 0; b < n_bands; ++b) {
        const double lo = f_lo * std::pow(f_hi / f_lo, static_cast<double>(b) / n_bands);
        const double hi =
            f_lo * std::pow(f_hi / f_lo, static_cast<double>(b + 1) / n_bands);
        std::size_t k0 = static_cast<std::size_t>(std::ceil(lo / bin_hz));
        std::size_t k1 = static_cast<std::size_t>(std::floor(hi / bin_hz));
        k1 = std::min(k1, spec.size() - 1);
        double e = 0.0;
        for (std::size_t k = k0; k <= k1 && k < spec.size(); ++k) e += std::norm(spec[k]);
        row[2 + b] = std::log10(e + kLogFloor);
      }
    }
    row[d_lip - 2] = 0.1 * rng.normal();
    row[d_lip - 1] = 0.1 * rng.normal();
  }

  // Expression: slowly varying random walk, one independent track per dim.
  for (int d = 0; d < d_expr; ++d) v.expr[d] = 0.3 * rng.normal();
  for (int f = 1; f < n_frames; ++f) {
    for (int d = 0; d < d_expr; ++d) {
      const std::size_t i = static_cast<std::size_t>(f) * d_expr + d;
      v.expr[i] = v.expr[i - d_expr] + 0.08 * rng.normal();
    }
  }

  validate_visual(v, "generated visual features");
  return v;
}

void write_visual_features(const std::string& path, const VisualFeatureSequence& v) {
  validate_visual(v, "visual features to write");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  AVSEP_CHECK(f.good(), "cannot open for writing: " << path);
  f.write(kMagic, 4);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(v.num_frames),
                                 static_cast<std::uint32_t>(v.d_lip),
                                 static_cast<std::uint32_t>(v.d_expr)};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> row(static_cast<std::size_t>(v.d_lip) + v.d_expr);
  for (int fr = 0; fr < v.num_frames; ++fr) {
    for (int d = 0; d < v.d_lip; ++d)
      row[d] = static_cast<float>(v.lip[static_cast<std::size_t>(fr) * v.d_lip + d]);
    for (int d = 0; d < v.d_expr; ++d)
      row[v.d_lip + d] =
          static_cast<float>(v.expr[static_cast<std::size_t>(fr) * v.d_expr + d]);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f.good()) throw IoError("failed writing visual features: " + path);
}

VisualFeatureSequence read_visual_features(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) throw IoError("cannot open visual feature file: " + path);
  char magic[4];
  std::uint32_t dims[3];
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!f.good() || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("bad visual feature header: " + path);
  VisualFeatureSequence v;
  v.num_frames = static_cast<int>(dims[0]);
  v.d_lip = static_cast<int>(dims[1]);
  v.d_expr = static_cast<int>(dims[2]);
  AVSEP_CHECK(v.num_frames > 0 && v.d_lip > 0 && v.d_expr > 0,
              "bad visual feature dims in " << path);
  const std::size_t per_row = static_cast<std::size_t>(v.d_lip) + v.d_expr;
  std::vector<float> row(per_row);
  v.lip.resize(static_cast<std::size_t>(v.num_frames) * v.d_lip);
  v.expr.resize(static_cast<std::size_t>(v.num_frames) * v.d_expr);
  for (int fr = 0; fr < v.num_frames; ++fr) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(per_row * sizeof(float)));
    if (!f.good()) throw IoError("truncated visual feature file: " + path);
    for (int d = 0; d < v.d_lip; ++d)
      v.lip[static_cast<std::size_t>(fr) * v.d_lip + d] = row[d];
    for (int d = 0; d < v.d_expr; ++d)
      v.expr[static_cast<std::size_t>(fr) * v.d_expr + d] = row[v.d_lip + d];
  }
  validate_visual(v, path.c_str());
  return v;
}

}  // namespace avsep
