// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avsep/dereverb.h"
#include "avsep/losses.h"
#include "avsep/mix.h"
#include "avsep/schedule.h"
#include "avsep/separator.h"

namespace avsep {

/// Live dynamic-mixing data source for training: a synthetic utterance bank
/// remixed with fresh randomness every epoch, plus a fixed held-out set.
struct TrainDataConfig {
  SyntheticBankConfig bank;
  RirConfig rir;      // room draw ranges (sample rate follows the bank)
  MusicConfig music;  // harmonic interferer (sample rate follows the bank)
  double chunk_seconds = 3.0;
  double snr_lo_db = -18.0;
  double snr_hi_db = 6.0;
  int num_interfering_speakers = 1;
  double music_probability = 0.3;
  int train_samples_per_epoch = 32;
  int val_samples = 8;
};

struct TrainConfig {
  TrainDataConfig data;
  SeparatorConfig separator;
  DereverbConfig dereverb;
  int k_layers = 6;  // ladder depth, must equal separator.k_blocks
  double ladder_step_db = 5.0;

  double lr_init = 1e-3;
  int lr_halve_patience = 3;
  int stop_patience = 10;
  int batch_size = 2;  // realized as gradient accumulation
  int max_epochs = 50;
  double grad_clip_norm = 5.0;
  // The spectral term joins the objective once the rate decays to the
  // threshold; 0 lambda disables it entirely.
  double stft_loss_lambda = 1.0;
  double stft_loss_enable_lr_threshold = 2.5e-4;
  // Optional early finish for efficacy runs: stop once the validation
  // SISDR gain reaches this many dB. 0 disables.
  double success_sisdr_gain_db = 0.0;

  std::uint64_t seed = 1;
  std::string out_dir;  // checkpoints + epochs.jsonl; empty = keep in memory
};

void validate_train_config(const TrainConfig& cfg);

/// JSON round trip for config files; unknown keys are rejected.
TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_json(const TrainConfig& cfg);

/// One epoch's ledger line. The loss identities hold for train_mean because
/// they are linear in the per-step reports.
struct EpochRecord {
  int epoch = 0;  // 1-based
  LossReport train_mean;
  double val_loss = 0.0;
  // Regime-specific quality gain in dB against the unprocessed input
  // (estimate-vs-target minus input-vs-target SISDR, averaged).
  double val_sisdr_gain_db = 0.0;
  double lr = 0.0;
  bool improved = false;
  bool halved = false;
  bool stopped = false;
  bool stft_term_active = false;
  int steps = 0;
};

std::string epoch_record_json(const EpochRecord& rec);

struct TrainResult {
  std::vector<EpochRecord> epochs;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  bool stopped_early = false;   // plateau stop fired
  bool target_reached = false;  // success_sisdr_gain_db satisfied
  // Written only when out_dir is set; empty otherwise.
  std::string best_separator_path;
  std::string best_dereverb_path;
  std::string last_separator_path;
  std::string last_dereverb_path;
};

/// Trains the enhancement net on (reverberant, anechoic) target pairs with
/// the log-magnitude MSE. resume picks up from out_dir's last checkpoint.
TrainResult pretrain_dereverb(const TrainConfig& cfg, bool resume = false);

/// Trains the separation net with the progressive objective on dynamically
/// mixed samples; the spectral term joins once the rate threshold is hit.
TrainResult train_separator(const TrainConfig& cfg, bool resume = false);

/// Joint fine-tuning of both nets: progressive objective on the block
/// estimates plus log-magnitude MSE of enhance(E_K) against the anechoic
/// target, one optimizer over both parameter sets. derev_init is mandatory
/// (pretrained enhancement weights); sep_init is optional (fresh when empty).
TrainResult train_joint(const TrainConfig& cfg, const std::string& sep_init,
                        const std::string& derev_init, bool resume = false);

/// Frozen two-stage inference: enhance(separate(mixture)). Verifies via
/// content hashes that neither model's parameters changed.
AudioClip run_cascade(Separator& sep, Dereverb& derev, const AudioClip& mixture,
                      const VisualFeatureSequence& visual);

/// The reversed-order ablation arm: separate(enhance(mixture)).
AudioClip run_derev_first(Dereverb& derev, Separator& sep, const AudioClip& mixture,
                          const VisualFeatureSequence& visual);

/// The fixed held-out set a config implies (index-keyed, independent of
/// epoch randomness); exposed so evaluation can reuse the exact samples.
std::vector<MixtureSample> build_validation_set(const TrainConfig& cfg,
                                                const SourceBank& bank);

}  // namespace avsep
