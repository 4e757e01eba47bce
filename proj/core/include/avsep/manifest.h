// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "avsep/mix.h"

namespace avsep {

/// One line of manifest.jsonl: everything needed to reload and re-validate a
/// sample. WAV files are float32, so the manifest stores the SNR measured on
/// the quantized signals; interference and ladder entries are reconstructed
/// exactly on load from mixture - reverberant target and the stored gains.
struct ManifestRecord {
  std::string id;
  int sample_rate = 0;
  std::int64_t num_samples = 0;
  int k = 0;
  double snr_db = 0.0;           // requested at build time
  double measured_snr_db = 0.0;  // measured on the float32-quantized signals
  double t60_s = 0.0;
  double ladder_step_db = 5.0;
  std::vector<double> ladder_gains;  // k-1 entries
  int target_index = -1;
  std::vector<int> interferer_indices;
  bool has_music = false;
  std::int64_t chunk_offset = 0;
  double fps = 25.0;
  int d_lip = 0;
  int d_expr = 0;
  std::string mix_path, revtgt_path, anech_path, feat_path;  // dir-relative
  std::vector<std::string> ladder_paths;                     // k entries
};

/// Writes wav/<id>_{mix,revtgt,anech,ladder{k}}.wav and feat/<id>.f32 under
/// dir and appends one JSONL record per added sample. Single-writer.
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::string& dir);

  /// Stores the sample and returns the assigned id ("s000000", ...).
  std::string add(const MixtureSample& sample);

  int count() const { return count_; }

 private:
  std::string dir_;
  std::ofstream manifest_;
  int count_ = 0;
};

/// Parses manifest.jsonl. Errors name the offending line.
std::vector<ManifestRecord> read_manifest(const std::string& dir);

/// Loads WAVs and features for one record, reconstructs interference and
/// ladder, and checks every MixtureSample invariant. Errors name the sample
/// id and the failing file or check.
MixtureSample load_sample(const std::string& dir, const ManifestRecord& rec);

/// Reads the manifest and validates every sample. Returns the sample count.
int validate_dataset(const std::string& dir);

}  // namespace avsep
