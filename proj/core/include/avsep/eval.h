// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avsep/dereverb.h"
#include "avsep/mix.h"
#include "avsep/separator.h"

namespace avsep {

/// Maps one dataset sample to a system's output waveform. Must be safe to
/// call concurrently from several threads (inference on a frozen model is).
using EstimateFn = std::function<AudioClip(const MixtureSample&)>;

/// Metrics for one sample against both references. A sample whose metrics
/// cannot be computed (length mismatch, clip too short for the
/// intelligibility window, silent reference) is recorded as skipped with the
/// error message and excluded from the aggregates.
struct EvalRow {
  std::string id;
  double snr_db = 0.0;                // requested mixing SNR from the metadata
  double sisdr_reverberant_db = 0.0;  // estimate vs reverberant target
  double sisdr_anechoic_db = 0.0;     // estimate vs anechoic target
  double stoi_reverberant = 0.0;
  double stoi_anechoic = 0.0;
  bool skipped = false;
  std::string error;  // set when skipped
};

/// One row per dataset sample in dataset order; aggregates cover the
/// non-skipped rows only.
struct EvalSummary {
  std::vector<EvalRow> rows;
  int n_evaluated = 0;
  int n_skipped = 0;
  double mean_sisdr_reverberant_db = 0.0;
  double mean_sisdr_anechoic_db = 0.0;
  double mean_stoi_reverberant = 0.0;
  double mean_stoi_anechoic = 0.0;
};

void validate_eval_summary(const EvalSummary& s);

/// Runs the system over every sample, distributing samples across threads
/// (num_threads <= 0 picks the hardware count) and aggregating in dataset
/// order so the result is independent of scheduling. Numerical divergence in
/// the system under test is not skippable and propagates. When outputs is
/// given it receives one clip per sample (empty for skipped rows).
EvalSummary evaluate_dataset(const std::vector<MixtureSample>& samples,
                             const EstimateFn& estimate, int num_threads = 0,
                             std::vector<AudioClip>* outputs = nullptr);

/// Reconstructs a model from the config embedded in its checkpoint and loads
/// the weights.
std::unique_ptr<Separator> load_separator_checkpoint(const std::string& path);
std::unique_ptr<Dereverb> load_dereverb_checkpoint(const std::string& path);

/// Header plus exactly one row per sample; skipped rows keep their id and
/// carry the error in the last column.
void write_eval_csv(const std::string& path, const EvalSummary& s);
std::string eval_summary_json(const EvalSummary& s);

/// External perceptual-quality scorer hook. Runs
///   <binary> <reference.wav> <degraded.wav>
/// and parses the last numeric token on stdout. Any failure (missing binary,
/// nonzero exit, no numeric output) throws IoError: the scorer is an
/// explicitly requested dependency, never a silent fallback.
double external_quality_score(const std::string& binary, const AudioClip& reference,
                              const AudioClip& degraded, const std::string& work_dir);

/// Checkpoint paths feeding the five comparison systems. An empty path
/// leaves every arm that needs it marked absent; trend checks then stay
/// unevaluated rather than failing.
struct AblationInputs {
  std::string separation_ckpt;        // separately trained separation stage
  std::string enhancement_ckpt;       // separately pretrained enhancement stage
  std::string joint_separation_ckpt;  // separation stage after joint training
  std::string joint_enhancement_ckpt; // enhancement stage after joint training
  std::string quality_scorer_binary;  // optional external tool; "" omits the column
  std::string work_dir;               // scratch space for the external scorer
  int num_threads = 0;
};

struct AblationRow {
  std::string name;
  bool present = false;
  int n_samples = 0;
  double mean_sisdr_db = 0.0;             // vs anechoic reference
  double mean_sisdr_reverberant_db = 0.0; // vs reverberant reference
  double mean_stoi = 0.0;                 // vs anechoic reference
  std::optional<double> mean_quality;     // external scorer, when supplied
  std::uint64_t sample_ids_hash = 0;      // equal across rows: identical inputs
};

/// Margin below which a violated joint-vs-frozen ordering is reported as a
/// soft failure (run archived) instead of a hard one.
inline constexpr double kJointTrendSoftMarginDb = 0.3;

struct AblationReport {
  std::vector<AblationRow> rows;  // noisy baseline + five systems
  std::string dataset_id;
  std::string config_echo;
  std::vector<std::string> sample_ids;
  bool trends_evaluated = false;        // true only when all five arms ran
  bool derev_first_worst = false;       // enhancement-first strictly worst SISDR
  bool joint_at_least_frozen = false;   // joint cascade >= frozen cascade
  double joint_minus_frozen_db = 0.0;
  bool soft_failure = false;            // ordering missed by < the soft margin
};

void validate_ablation_report(const AblationReport& r);

/// Evaluates every available arm on the identical sample set and fills the
/// trend verdicts. Rows always appear in a fixed order; absent arms keep
/// present = false and zeroed metrics.
AblationReport run_ablation(const std::vector<MixtureSample>& samples,
                            const AblationInputs& inputs,
                            const std::string& dataset_id,
                            const std::string& config_echo);

std::string ablation_report_json(const AblationReport& r);
void write_ablation_csv(const std::string& path, const AblationReport& r);

}  // namespace avsep
