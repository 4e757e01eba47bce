// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/manifest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "avsep/error.h"
#include "avsep/visual.h"
#include "avsep/wav.h"

namespace avsep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Float32 quantization applied before measuring what the WAV will hold, so
// read-back recomputes the identical value.
AudioClip quantize_f32(const AudioClip& c) {
  std::vector<double> q(c.samples.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    q[i] = static_cast<double>(static_cast<float>(c.samples[i]));
  return AudioClip(std::move(q), c.sample_rate);
}

std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%06d", index);
  return buf;
}

json record_to_json(const ManifestRecord& r) {
  json j;
  j["id"] = r.id;
  j["sample_rate"] = r.sample_rate;
  j["num_samples"] = r.num_samples;
  j["k"] = r.k;
  j["snr_db"] = r.snr_db;
  j["measured_snr_db"] = r.measured_snr_db;
  j["t60_s"] = r.t60_s;
  j["ladder_step_db"] = r.ladder_step_db;
  j["ladder_gains"] = r.ladder_gains;
  j["target_index"] = r.target_index;
  j["interferer_indices"] = r.interferer_indices;
  j["has_music"] = r.has_music;
  j["chunk_offset"] = r.chunk_offset;
  j["fps"] = r.fps;
  j["d_lip"] = r.d_lip;
  j["d_expr"] = r.d_expr;
  j["wav"] = {{"mix", r.mix_path},
              {"revtgt", r.revtgt_path},
              {"anech", r.anech_path},
              {"ladder", r.ladder_paths}};
  j["feat"] = r.feat_path;
  return j;
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord r;
  r.id = j.at("id").get<std::string>();
  r.sample_rate = j.at("sample_rate").get<int>();
  r.num_samples = j.at("num_samples").get<std::int64_t>();
  r.k = j.at("k").get<int>();
  r.snr_db = j.at("snr_db").get<double>();
  r.measured_snr_db = j.at("measured_snr_db").get<double>();
  r.t60_s = j.at("t60_s").get<double>();
  r.ladder_step_db = j.at("ladder_step_db").get<double>();
  r.ladder_gains = j.at("ladder_gains").get<std::vector<double>>();
  r.target_index = j.at("target_index").get<int>();
  r.interferer_indices = j.at("interferer_indices").get<std::vector<int>>();
  r.has_music = j.at("has_music").get<bool>();
  r.chunk_offset = j.at("chunk_offset").get<std::int64_t>();
  r.fps = j.at("fps").get<double>();
  r.d_lip = j.at("d_lip").get<int>();
  r.d_expr = j.at("d_expr").get<int>();
  const json& w = j.at("wav");
  r.mix_path = w.at("mix").get<std::string>();
  r.revtgt_path = w.at("revtgt").get<std::string>();
  r.anech_path = w.at("anech").get<std::string>();
  r.ladder_paths = w.at("ladder").get<std::vector<std::string>>();
  r.feat_path = j.at("feat").get<std::string>();
  return r;
}

AudioClip read_component(const std::string& dir, const ManifestRecord& rec,
                         const std::string& rel) {
  AudioClip c;
  try {
    c = read_wav((fs::path(dir) / rel).string());
  } catch (const Error& e) {
    throw IoError("sample " + rec.id + ": " + e.what());
  }
  AVSEP_CHECK(c.sample_rate == rec.sample_rate,
              "sample " << rec.id << ": " << rel << " sample rate " << c.sample_rate
                        << " != manifest " << rec.sample_rate);
  AVSEP_CHECK(static_cast<std::int64_t>(c.size()) == rec.num_samples,
              "sample " << rec.id << ": " << rel << " length " << c.size()
                        << " != manifest " << rec.num_samples);
  return c;
}

}  // namespace

DatasetWriter::DatasetWriter(const std::string& dir) : dir_(dir) {
  fs::create_directories(fs::path(dir) / "wav");
  fs::create_directories(fs::path(dir) / "feat");
  const std::string mpath = (fs::path(dir) / "manifest.jsonl").string();
  manifest_.open(mpath, std::ios::trunc);
  if (!manifest_.good()) throw IoError("cannot open manifest for writing: " + mpath);
}

std::string DatasetWriter::add(const MixtureSample& sample) {
  validate_sample(sample, "sample to write");
  const std::string id = sample_id(count_);

  ManifestRecord r;
  r.id = id;
  r.sample_rate = sample.mixture.sample_rate;
  r.num_samples = static_cast<std::int64_t>(sample.mixture.size());
  r.k = sample.ladder.num_layers;
  r.snr_db = sample.meta.snr_db;
  r.t60_s = sample.meta.t60_s;
  r.ladder_step_db = sample.ladder.step_db;
  r.ladder_gains = sample.ladder.gains;
  r.target_index = sample.meta.target_index;
  r.interferer_indices = sample.meta.interferer_indices;
  r.has_music = sample.meta.has_music;
  r.chunk_offset = sample.meta.chunk_offset;
  r.fps = sample.visual.fps;
  r.d_lip = sample.visual.d_lip;
  r.d_expr = sample.visual.d_expr;
  r.mix_path = "wav/" + id + "_mix.wav";
  r.revtgt_path = "wav/" + id + "_revtgt.wav";
  r.anech_path = "wav/" + id + "_anech.wav";
  for (int k = 1; k <= r.k; ++k)
    r.ladder_paths.push_back("wav/" + id + "_ladder" + std::to_string(k) + ".wav");
  r.feat_path = "feat/" + id + ".f32";

  // The measured SNR is recorded on the quantized signals, with interference
  // as mixture - target, matching exactly what a reader reconstructs.
  const AudioClip mix_q = quantize_f32(sample.mixture);
  const AudioClip rev_q = quantize_f32(sample.reverberant_target);
  AudioClip interf_q(std::vector<double>(mix_q.size()), mix_q.sample_rate);
  for (std::size_t i = 0; i < mix_q.size(); ++i)
    interf_q.samples[i] = mix_q.samples[i] - rev_q.samples[i];
  r.measured_snr_db = measure_snr_db(rev_q, interf_q);

  const fs::path base(dir_);
  write_wav((base / r.mix_path).string(), sample.mixture);
  write_wav((base / r.revtgt_path).string(), sample.reverberant_target);
  write_wav((base / r.anech_path).string(), sample.anechoic_target);
  for (int k = 0; k < r.k; ++k)
    write_wav((base / r.ladder_paths[k]).string(), sample.ladder.targets[k]);
  write_visual_features((base / r.feat_path).string(), sample.visual);

  manifest_ << record_to_json(r).dump() << "\n";
  manifest_.flush();
  if (!manifest_.good()) throw IoError("failed appending to manifest in " + dir_);
  ++count_;
  return id;
}

std::vector<ManifestRecord> read_manifest(const std::string& dir) {
  const std::string mpath = (fs::path(dir) / "manifest.jsonl").string();
  std::ifstream f(mpath);
  if (!f.good()) throw IoError("cannot open manifest: " + mpath);
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) + " in " +
                            mpath + ": " + e.what());
    }
  }
  return records;
}

MixtureSample load_sample(const std::string& dir, const ManifestRecord& rec) {
  AVSEP_CHECK(rec.k >= 1 && static_cast<int>(rec.ladder_paths.size()) == rec.k,
              "sample " << rec.id << ": manifest lists " << rec.ladder_paths.size()
                        << " ladder paths for K=" << rec.k);
  AVSEP_CHECK(static_cast<int>(rec.ladder_gains.size()) == rec.k - 1,
              "sample " << rec.id << ": manifest lists " << rec.ladder_gains.size()
                        << " ladder gains for K=" << rec.k);

  MixtureSample s;
  s.mixture = read_component(dir, rec, rec.mix_path);
  s.reverberant_target = read_component(dir, rec, rec.revtgt_path);
  s.anechoic_target = read_component(dir, rec, rec.anech_path);

  // Interference and ladder entries are reconstructed so the additivity and
  // spacing invariants hold exactly despite float32 storage.
  s.interference_sum =
      AudioClip(std::vector<double>(s.mixture.size()), s.mixture.sample_rate);
  for (std::size_t i = 0; i < s.mixture.size(); ++i)
    s.interference_sum.samples[i] =
        s.mixture.samples[i] - s.reverberant_target.samples[i];

  s.ladder.initial_snr_db = rec.snr_db;
  s.ladder.step_db = rec.ladder_step_db;
  s.ladder.num_layers = rec.k;
  s.ladder.gains = rec.ladder_gains;
  for (int k = 0; k < rec.k - 1; ++k) {
    s.ladder.targets.push_back(
        mix_add(s.reverberant_target, scale(s.interference_sum, rec.ladder_gains[k])));
  }
  s.ladder.targets.push_back(s.reverberant_target);

  // The stored ladder WAVs must agree with the reconstruction up to float32
  // rounding of the written doubles.
  for (int k = 0; k < rec.k; ++k) {
    const AudioClip stored = read_component(dir, rec, rec.ladder_paths[k]);
    const AudioClip expect = quantize_f32(s.ladder.targets[k]);
    for (std::size_t i = 0; i < stored.size(); ++i) {
      AVSEP_CHECK(std::fabs(stored.samples[i] - expect.samples[i]) <= 1e-5,
                  "sample " << rec.id << ": ladder file " << rec.ladder_paths[k]
                            << " disagrees with reconstruction at sample " << i);
    }
  }

  try {
    s.visual = read_visual_features((fs::path(dir) / rec.feat_path).string());
  } catch (const Error& e) {
    throw IoError("sample " + rec.id + ": " + e.what());
  }
  AVSEP_CHECK(s.visual.d_lip == rec.d_lip && s.visual.d_expr == rec.d_expr,
              "sample " << rec.id << ": feature dims disagree with manifest");
  s.visual.fps = rec.fps;  // the feature file itself does not carry fps

  s.meta.id = rec.id;
  s.meta.snr_db = rec.snr_db;
  s.meta.t60_s = rec.t60_s;
  s.meta.target_index = rec.target_index;
  s.meta.interferer_indices = rec.interferer_indices;
  s.meta.has_music = rec.has_music;
  s.meta.chunk_offset = rec.chunk_offset;
  const double measured = measure_snr_db(s.reverberant_target, s.interference_sum);
  AVSEP_CHECK(std::fabs(measured - rec.measured_snr_db) <= 1e-6,
              "sample " << rec.id << ": measured SNR " << measured
                        << " != manifest " << rec.measured_snr_db);
  s.meta.measured_snr_db = measured;

  try {
    validate_sample(s, "loaded sample");
  } catch (const Error& e) {
    throw ValidationError("sample " + rec.id + ": " + e.what());
  }
  return s;
}

int validate_dataset(const std::string& dir) {
  const std::vector<ManifestRecord> records = read_manifest(dir);
  for (const ManifestRecord& rec : records) (void)load_sample(dir, rec);
  return static_cast<int>(records.size());
}

}  // namespace avsep
