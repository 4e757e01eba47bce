// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/train.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "avsep/checkpoint.h"
#include "avsep/error.h"
#include "avsep/metrics.h"
#include "json.hpp"
#include "json_util.h"

namespace avsep {

namespace fs = std::filesystem;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using nlohmann::json;

namespace {

constexpr double kSilentChunkRms = 1e-6;
constexpr int kMaxChunkTries = 10;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

using detail::expect_keys;
using detail::stft_from_json;
using detail::stft_to_json;

// Fingerprint over everything that must match for a resumed run to be the
// same experiment; run-length and output knobs may legitimately differ.
std::uint64_t config_fingerprint(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.max_epochs = 0;
  c.success_sisdr_gain_db = 0.0;
  c.out_dir.clear();
  return fnv1a(train_config_json(c));
}

std::int64_t chunk_samples_of(const TrainConfig& cfg) {
  return std::llround(cfg.data.chunk_seconds * cfg.data.bank.sample_rate);
}

SourceBank make_bank(const TrainConfig& cfg) {
  SourceBank bank = make_synthetic_bank(cfg.data.bank, cfg.seed);
  bank.rir = cfg.data.rir;
  bank.rir.sample_rate = cfg.data.bank.sample_rate;
  bank.music = cfg.data.music;
  bank.music.sample_rate = cfg.data.bank.sample_rate;
  validate_bank(bank);
  return bank;
}

struct PretrainPair {
  AudioClip reverberant;
  AudioClip anechoic;
};

AudioClip chunk_from(const AudioClip& utterance, std::int64_t off, std::size_t len) {
  std::vector<double> s(utterance.samples.begin() + off,
                        utterance.samples.begin() + off + static_cast<std::int64_t>(len));
  return AudioClip(std::move(s), utterance.sample_rate);
}

// Mirrors the mixer's chunking contract: uniform offset, silent-chunk retry.
PretrainPair draw_pretrain_pair(const SourceBank& bank, double chunk_seconds, Rng& rng) {
  const std::size_t len =
      static_cast<std::size_t>(std::llround(chunk_seconds * bank.rir.sample_rate));
  const std::size_t n = bank.target_utterances.size();
  const int idx = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  const AudioClip& utt = bank.target_utterances[idx];
  AVSEP_CHECK(utt.size() >= len, "enhancement pair: utterance (" << utt.size()
                                                                 << " samples) shorter "
                                                                    "than chunk ("
                                                                 << len << ")");
  const std::int64_t max_off = static_cast<std::int64_t>(utt.size() - len);
  for (int attempt = 0; attempt < kMaxChunkTries; ++attempt) {
    const std::int64_t off = rng.uniform_int(0, max_off);
    AudioClip anech = chunk_from(utt, off, len);
    if (rms(anech) < kSilentChunkRms) continue;
    const AudioClip rir = synth_rir(bank.rir, rng);
    PretrainPair p;
    p.reverberant = convolve_rir(anech, rir);
    p.anechoic = std::move(anech);
    return p;
  }
  throw ValidationError("unusable source: enhancement chunk silent after 10 tries");
}

MixtureSample draw_train_sample(const SourceBank& bank, const TrainConfig& cfg,
                                Rng& rng) {
  const double snr = rng.uniform(cfg.data.snr_lo_db, cfg.data.snr_hi_db);
  const bool music = cfg.data.num_interfering_speakers >= 1
                         ? rng.bernoulli(cfg.data.music_probability)
                         : true;
  return build_sample(bank, snr, cfg.data.chunk_seconds,
                      cfg.data.num_interfering_speakers, music, cfg.k_layers, rng,
                      cfg.ladder_step_db);
}

void reset_optimizer(ParamStore& params) {
  for (const std::string& name : params.names()) {
    for (double& v : params.adam_m(name).data) v = 0.0;
    for (double& v : params.adam_v(name).data) v = 0.0;
  }
  params.set_adam_steps(0);
  params.zero_grad();
}

// Joint updates clip the concatenated gradient of both stores as one vector.
void clip_joint_grad(ParamStore& a, ParamStore& b, double max_norm) {
  const double na = a.grad_norm(), nb = b.grad_norm();
  const double n = std::hypot(na, nb);
  AVSEP_CHECK_FINITE(std::isfinite(n), "numerical divergence in joint gradients");
  if (n <= max_norm) return;
  const double f = max_norm / n;
  for (ParamStore* s : {&a, &b})
    for (const std::string& name : s->names())
      for (double& g : s->grad_at(name).data) g *= f;
}

json schedule_state_json(const PlateauScheduler::State& s) {
  return json{{"best", s.best},          {"halve_streak", s.halve_streak},
              {"stop_streak", s.stop_streak}, {"halvings", s.halvings},
              {"stopped", s.stopped},    {"has_best", s.has_best}};
}

PlateauScheduler::State schedule_state_from_json(const json& j) {
  PlateauScheduler::State s;
  s.best = j.at("best").get<double>();
  s.halve_streak = j.at("halve_streak").get<int>();
  s.stop_streak = j.at("stop_streak").get<int>();
  s.halvings = j.at("halvings").get<int>();
  s.stopped = j.at("stopped").get<bool>();
  s.has_best = j.at("has_best").get<bool>();
  return s;
}

// Everything a resumed run needs beyond the parameter/optimizer blobs.
struct TrainerState {
  int epoch = 0;  // last completed epoch
  double best_val = 0.0;
  int best_epoch = 0;
  PlateauScheduler::State sched;
  std::string regime;
  std::uint64_t config_fp = 0;
};

std::string trainer_state_json(const TrainerState& s) {
  json j{{"epoch", s.epoch},
         {"best_val", s.best_val},
         {"best_epoch", s.best_epoch},
         {"sched", schedule_state_json(s.sched)},
         {"regime", s.regime},
         {"config_fp", s.config_fp}};
  return j.dump();
}

TrainerState trainer_state_from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainerState s;
  s.epoch = j.at("epoch").get<int>();
  s.best_val = j.at("best_val").get<double>();
  s.best_epoch = j.at("best_epoch").get<int>();
  s.sched = schedule_state_from_json(j.at("sched"));
  s.regime = j.at("regime").get<std::string>();
  s.config_fp = j.at("config_fp").get<std::uint64_t>();
  return s;
}

// Regime-specific pieces plugged into the shared epoch loop.
struct RegimeOps {
  std::string regime;  // "P", "A", or "C"
  // Draws sample idx of the epoch, builds the graph, backpropagates the
  // objective scaled by loss_scale, and returns the unscaled report.
  std::function<LossReport(int epoch, int idx, double loss_scale, bool stft_active)>
      train_step;
  // Scheduler metric and auxiliary SISDR gain on the fixed held-out set.
  std::function<std::pair<double, double>()> validate;
  std::function<void()> zero_grads;
  std::function<void(double lr)> apply_update;
  // Writes checkpoints tagged "last"/"best" carrying the state blob; fills
  // the matching TrainResult path fields.
  std::function<void(const std::string& tag, const std::string& state,
                     TrainResult& result)>
      save_checkpoints;
  // Restores model+optimizer from the "last" checkpoints, returns the state.
  std::function<TrainerState()> load_last;
};

void accumulate_report(LossReport& acc, const LossReport& step) {
  if (acc.per_layer.empty()) acc.per_layer.assign(step.per_layer.size(), 0.0);
  AVSEP_CHECK(acc.per_layer.size() == step.per_layer.size(),
              "trainer: per-layer count changed between steps");
  for (std::size_t i = 0; i < step.per_layer.size(); ++i)
    acc.per_layer[i] += step.per_layer[i];
  acc.total += step.total;
  acc.dereverb += step.dereverb;
  acc.joint += step.joint;
  acc.stft_extra += step.stft_extra;
  acc.objective += step.objective;
}

void divide_report(LossReport& acc, int n) {
  for (double& v : acc.per_layer) v /= n;
  acc.total /= n;
  acc.dereverb /= n;
  acc.joint /= n;
  acc.stft_extra /= n;
  acc.objective /= n;
}

TrainResult run_training(const TrainConfig& cfg, const RegimeOps& ops, bool resume) {
  validate_train_config(cfg);
  ScheduleConfig sched_cfg;
  sched_cfg.lr_init = cfg.lr_init;
  sched_cfg.lr_halve_patience = cfg.lr_halve_patience;
  sched_cfg.stop_patience = cfg.stop_patience;
  PlateauScheduler scheduler(sched_cfg);

  TrainResult result;
  int start_epoch = 0;
  double best_val = 0.0;
  int best_epoch = 0;
  bool have_best = false;

  if (resume) {
    AVSEP_CHECK(!cfg.out_dir.empty(), "resume requires out_dir");
    const TrainerState st = ops.load_last();
    AVSEP_CHECK(st.regime == ops.regime, "resume: checkpoint belongs to regime "
                                             << st.regime << ", not " << ops.regime);
    AVSEP_CHECK(st.config_fp == config_fingerprint(cfg),
                "resume: config does not match the checkpointed run");
    AVSEP_CHECK(!st.sched.stopped,
                "resume: the checkpointed run already stopped on its plateau");
    scheduler.restore(st.sched);
    start_epoch = st.epoch;
    best_val = st.best_val;
    best_epoch = st.best_epoch;
    have_best = st.best_epoch > 0;
  }

  std::ofstream log;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    if (!resume) {
      std::ofstream cfg_echo(fs::path(cfg.out_dir) / "config.json",
                             std::ios::trunc);
      cfg_echo << train_config_json(cfg) << "\n";
    }
    log.open(fs::path(cfg.out_dir) / "epochs.jsonl",
             resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("trainer: cannot open epoch log in " + cfg.out_dir);
  }

  const int n_train = cfg.data.train_samples_per_epoch;
  bool ckpt_on_disk = resume;
  for (int epoch = start_epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr_epoch = scheduler.lr();
    const bool stft_active =
        cfg.stft_loss_lambda > 0.0 && lr_epoch <= cfg.stft_loss_enable_lr_threshold;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_epoch;
    rec.stft_term_active = stft_active;
    try {
      LossReport acc;
      for (int start = 0; start < n_train; start += cfg.batch_size) {
        const int batch_n = std::min(cfg.batch_size, n_train - start);
        ops.zero_grads();
        for (int i = start; i < start + batch_n; ++i) {
          const LossReport step =
              ops.train_step(epoch, i, 1.0 / batch_n, stft_active);
          validate_loss_report(step);
          accumulate_report(acc, step);
          ++rec.steps;
        }
        ops.apply_update(lr_epoch);
      }
      divide_report(acc, rec.steps);
      validate_loss_report(acc);
      rec.train_mean = acc;

      const auto [val_loss, gain] = ops.validate();
      rec.val_loss = val_loss;
      rec.val_sisdr_gain_db = gain;

      const ScheduleDecision d = scheduler.observe(val_loss);
      rec.improved = d.improved;
      rec.halved = d.halved;
      rec.stopped = d.stop;
    } catch (const NumericalDivergence& e) {
      throw NumericalDivergence(
          "training diverged at epoch " + std::to_string(epoch) + ": " + e.what() +
          (ckpt_on_disk ? "; checkpoint of the last good epoch retained" : ""));
    }

    if (rec.improved || !have_best) {
      best_val = rec.val_loss;
      best_epoch = epoch;
      have_best = true;
    }

    TrainerState st;
    st.epoch = epoch;
    st.best_val = best_val;
    st.best_epoch = best_epoch;
    st.sched = scheduler.state();
    st.regime = ops.regime;
    st.config_fp = config_fingerprint(cfg);
    if (!cfg.out_dir.empty()) {
      const std::string state = trainer_state_json(st);
      if (rec.improved) ops.save_checkpoints("best", state, result);
      ops.save_checkpoints("last", state, result);
      ckpt_on_disk = true;
    }
    if (log) log << epoch_record_json(rec) << "\n" << std::flush;
    result.epochs.push_back(rec);

    if (rec.stopped) {
      result.stopped_early = true;
      break;
    }
    if (cfg.success_sisdr_gain_db > 0.0 &&
        rec.val_sisdr_gain_db >= cfg.success_sisdr_gain_db) {
      result.target_reached = true;
      break;
    }
  }

  result.best_val_loss = best_val;
  result.best_epoch = best_epoch;
  return result;
}

double mean_sisdr_gain(const std::vector<double>& estimate_db,
                       const std::vector<double>& input_db) {
  double g = 0.0;
  for (std::size_t i = 0; i < estimate_db.size(); ++i)
    g += estimate_db[i] - input_db[i];
  return g / static_cast<double>(estimate_db.size());
}

// A resume that starts at or past max_epochs writes nothing new; the files
// from the previous run still stand.
void fill_path_if_present(std::string& field, const fs::path& p) {
  if (field.empty() && fs::exists(p)) field = p.string();
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  const int sr = cfg.data.bank.sample_rate;
  AVSEP_CHECK(cfg.separator.stft.sample_rate == sr,
              "train config: separation stage expects " << cfg.separator.stft.sample_rate
                                                        << " Hz, bank provides " << sr);
  AVSEP_CHECK(cfg.dereverb.stft.sample_rate == sr,
              "train config: enhancement stage expects " << cfg.dereverb.stft.sample_rate
                                                         << " Hz, bank provides " << sr);
  validate_separator_config(cfg.separator);
  validate_dereverb_config(cfg.dereverb);
  AVSEP_CHECK(cfg.k_layers == cfg.separator.k_blocks,
              "train config: ladder depth " << cfg.k_layers << " != separator blocks "
                                            << cfg.separator.k_blocks);
  AVSEP_CHECK(cfg.ladder_step_db > 0, "train config: ladder_step_db must be positive");
  AVSEP_CHECK(cfg.separator.d_lip == kLipDims && cfg.separator.d_expr == kExpressionDims,
              "train config: separator visual dims ("
                  << cfg.separator.d_lip << ", " << cfg.separator.d_expr
                  << ") must match the simulated features (" << kLipDims << ", "
                  << kExpressionDims << ")");

  const std::int64_t chunk = chunk_samples_of(cfg);
  AVSEP_CHECK(chunk > 0, "train config: chunk_seconds must be positive");
  const double frame_span = sr / kVisualFps;
  AVSEP_CHECK(frame_span == std::floor(frame_span) &&
                  chunk % static_cast<std::int64_t>(frame_span) == 0,
              "train config: chunk must cover a whole number of video frames");
  AVSEP_CHECK(chunk >= cfg.separator.stft.fft_size &&
                  chunk >= cfg.dereverb.stft.fft_size,
              "train config: chunk shorter than an analysis window");
  AVSEP_CHECK(cfg.data.snr_lo_db <= cfg.data.snr_hi_db,
              "train config: snr range is inverted");
  AVSEP_CHECK(cfg.data.num_interfering_speakers >= 0,
              "train config: negative interferer count");
  AVSEP_CHECK(cfg.data.num_interfering_speakers >= 1 ||
                  cfg.data.music_probability >= 1.0,
              "train config: every sample needs at least one interfering source");
  AVSEP_CHECK(cfg.data.music_probability >= 0.0 && cfg.data.music_probability <= 1.0,
              "train config: music_probability outside [0,1]");
  AVSEP_CHECK(cfg.data.train_samples_per_epoch >= 1 && cfg.data.val_samples >= 1,
              "train config: need at least one training and one validation sample");
  AVSEP_CHECK(cfg.batch_size >= 1, "train config: batch_size must be >= 1");
  AVSEP_CHECK(cfg.max_epochs >= 1, "train config: max_epochs must be >= 1");
  AVSEP_CHECK(cfg.grad_clip_norm > 0, "train config: grad_clip_norm must be positive");
  ScheduleConfig sc;
  sc.lr_init = cfg.lr_init;
  sc.lr_halve_patience = cfg.lr_halve_patience;
  sc.stop_patience = cfg.stop_patience;
  validate_schedule_config(sc);
  AVSEP_CHECK(cfg.stft_loss_lambda >= 0, "train config: stft_loss_lambda must be >= 0");
  if (cfg.stft_loss_lambda > 0) {
    AVSEP_CHECK(cfg.stft_loss_enable_lr_threshold > 0,
                "train config: spectral-term threshold must be positive");
    int max_fft = 0;
    for (const StftParams& p : stft_loss_resolutions(sr))
      max_fft = std::max(max_fft, p.fft_size);
    AVSEP_CHECK(chunk >= max_fft,
                "train config: chunk ("
                    << chunk << " samples) shorter than the largest spectral-loss "
                                "window ("
                    << max_fft << "); lengthen chunks or disable the term");
  }
  AVSEP_CHECK(cfg.success_sisdr_gain_db >= 0,
              "train config: success_sisdr_gain_db must be >= 0");
}

std::string train_config_json(const TrainConfig& cfg) {
  json bank{{"sample_rate", cfg.data.bank.sample_rate},
            {"num_target_utterances", cfg.data.bank.num_target_utterances},
            {"num_interferer_utterances", cfg.data.bank.num_interferer_utterances},
            {"utterance_seconds", cfg.data.bank.utterance_seconds}};
  json rir{{"t60_lo_s", cfg.data.rir.t60_lo_s},
           {"t60_hi_s", cfg.data.rir.t60_hi_s},
           {"rir_seconds", cfg.data.rir.rir_seconds},
           {"drr_lo_db", cfg.data.rir.drr_lo_db},
           {"drr_hi_db", cfg.data.rir.drr_hi_db}};
  json music{{"n_partials_lo", cfg.data.music.n_partials_lo},
             {"n_partials_hi", cfg.data.music.n_partials_hi},
             {"fundamental_lo_hz", cfg.data.music.fundamental_lo_hz},
             {"fundamental_hi_hz", cfg.data.music.fundamental_hi_hz},
             {"amplitude_decay", cfg.data.music.amplitude_decay}};
  json data{{"bank", bank},
            {"rir", rir},
            {"music", music},
            {"chunk_seconds", cfg.data.chunk_seconds},
            {"snr_lo_db", cfg.data.snr_lo_db},
            {"snr_hi_db", cfg.data.snr_hi_db},
            {"num_interfering_speakers", cfg.data.num_interfering_speakers},
            {"music_probability", cfg.data.music_probability},
            {"train_samples_per_epoch", cfg.data.train_samples_per_epoch},
            {"val_samples", cfg.data.val_samples}};
  json sep = json::parse(separator_config_json(cfg.separator));
  json der = json::parse(dereverb_config_json(cfg.dereverb));
  json j{{"data", data},
         {"separator", sep},
         {"dereverb", der},
         {"k_layers", cfg.k_layers},
         {"ladder_step_db", cfg.ladder_step_db},
         {"lr_init", cfg.lr_init},
         {"lr_halve_patience", cfg.lr_halve_patience},
         {"stop_patience", cfg.stop_patience},
         {"batch_size", cfg.batch_size},
         {"max_epochs", cfg.max_epochs},
         {"grad_clip_norm", cfg.grad_clip_norm},
         {"stft_loss_lambda", cfg.stft_loss_lambda},
         {"stft_loss_enable_lr_threshold", cfg.stft_loss_enable_lr_threshold},
         {"success_sisdr_gain_db", cfg.success_sisdr_gain_db},
         {"seed", cfg.seed},
         {"out_dir", cfg.out_dir}};
  return j.dump();
}

TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: not valid JSON: ") + e.what());
  }
  expect_keys(j,
              {"data", "separator", "dereverb", "k_layers", "ladder_step_db", "lr_init",
               "lr_halve_patience", "stop_patience", "batch_size", "max_epochs",
               "grad_clip_norm", "stft_loss_lambda", "stft_loss_enable_lr_threshold",
               "success_sisdr_gain_db", "seed", "out_dir"},
              "top level");
  TrainConfig cfg;
  if (j.contains("data")) {
    const json& d = j.at("data");
    expect_keys(d,
                {"bank", "rir", "music", "chunk_seconds", "snr_lo_db", "snr_hi_db",
                 "num_interfering_speakers", "music_probability",
                 "train_samples_per_epoch", "val_samples"},
                "data");
    if (d.contains("bank")) {
      const json& b = d.at("bank");
      expect_keys(b,
                  {"sample_rate", "num_target_utterances", "num_interferer_utterances",
                   "utterance_seconds"},
                  "data.bank");
      cfg.data.bank.sample_rate = b.value("sample_rate", cfg.data.bank.sample_rate);
      cfg.data.bank.num_target_utterances =
          b.value("num_target_utterances", cfg.data.bank.num_target_utterances);
      cfg.data.bank.num_interferer_utterances =
          b.value("num_interferer_utterances", cfg.data.bank.num_interferer_utterances);
      cfg.data.bank.utterance_seconds =
          b.value("utterance_seconds", cfg.data.bank.utterance_seconds);
    }
    if (d.contains("rir")) {
      const json& r = d.at("rir");
      expect_keys(r, {"t60_lo_s", "t60_hi_s", "rir_seconds", "drr_lo_db", "drr_hi_db"},
                  "data.rir");
      cfg.data.rir.t60_lo_s = r.value("t60_lo_s", cfg.data.rir.t60_lo_s);
      cfg.data.rir.t60_hi_s = r.value("t60_hi_s", cfg.data.rir.t60_hi_s);
      cfg.data.rir.rir_seconds = r.value("rir_seconds", cfg.data.rir.rir_seconds);
      cfg.data.rir.drr_lo_db = r.value("drr_lo_db", cfg.data.rir.drr_lo_db);
      cfg.data.rir.drr_hi_db = r.value("drr_hi_db", cfg.data.rir.drr_hi_db);
    }
    if (d.contains("music")) {
      const json& m = d.at("music");
      expect_keys(m,
                  {"n_partials_lo", "n_partials_hi", "fundamental_lo_hz",
                   "fundamental_hi_hz", "amplitude_decay"},
                  "data.music");
      cfg.data.music.n_partials_lo = m.value("n_partials_lo", cfg.data.music.n_partials_lo);
      cfg.data.music.n_partials_hi = m.value("n_partials_hi", cfg.data.music.n_partials_hi);
      cfg.data.music.fundamental_lo_hz =
          m.value("fundamental_lo_hz", cfg.data.music.fundamental_lo_hz);
      cfg.data.music.fundamental_hi_hz =
          m.value("fundamental_hi_hz", cfg.data.music.fundamental_hi_hz);
      cfg.data.music.amplitude_decay =
          m.value("amplitude_decay", cfg.data.music.amplitude_decay);
    }
    cfg.data.chunk_seconds = d.value("chunk_seconds", cfg.data.chunk_seconds);
    cfg.data.snr_lo_db = d.value("snr_lo_db", cfg.data.snr_lo_db);
    cfg.data.snr_hi_db = d.value("snr_hi_db", cfg.data.snr_hi_db);
    cfg.data.num_interfering_speakers =
        d.value("num_interfering_speakers", cfg.data.num_interfering_speakers);
    cfg.data.music_probability = d.value("music_probability", cfg.data.music_probability);
    cfg.data.train_samples_per_epoch =
        d.value("train_samples_per_epoch", cfg.data.train_samples_per_epoch);
    cfg.data.val_samples = d.value("val_samples", cfg.data.val_samples);
  }
  if (j.contains("separator")) {
    const json& s = j.at("separator");
    expect_keys(s,
                {"k_blocks", "channels", "visual_channels", "block_hidden", "d_lip",
                 "d_expr", "stft"},
                "separator");
    cfg.separator.k_blocks = s.value("k_blocks", cfg.separator.k_blocks);
    cfg.separator.channels = s.value("channels", cfg.separator.channels);
    cfg.separator.visual_channels =
        s.value("visual_channels", cfg.separator.visual_channels);
    cfg.separator.block_hidden = s.value("block_hidden", cfg.separator.block_hidden);
    cfg.separator.d_lip = s.value("d_lip", cfg.separator.d_lip);
    cfg.separator.d_expr = s.value("d_expr", cfg.separator.d_expr);
    if (s.contains("stft")) cfg.separator.stft = stft_from_json(s.at("stft"), "separator.stft");
  }
  if (j.contains("dereverb")) {
    const json& d = j.at("dereverb");
    expect_keys(d, {"depth", "base_channels", "stft"}, "dereverb");
    cfg.dereverb.depth = d.value("depth", cfg.dereverb.depth);
    cfg.dereverb.base_channels = d.value("base_channels", cfg.dereverb.base_channels);
    if (d.contains("stft")) cfg.dereverb.stft = stft_from_json(d.at("stft"), "dereverb.stft");
  }
  cfg.k_layers = j.value("k_layers", cfg.k_layers);
  cfg.ladder_step_db = j.value("ladder_step_db", cfg.ladder_step_db);
  cfg.lr_init = j.value("lr_init", cfg.lr_init);
  cfg.lr_halve_patience = j.value("lr_halve_patience", cfg.lr_halve_patience);
  cfg.stop_patience = j.value("stop_patience", cfg.stop_patience);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.grad_clip_norm = j.value("grad_clip_norm", cfg.grad_clip_norm);
  cfg.stft_loss_lambda = j.value("stft_loss_lambda", cfg.stft_loss_lambda);
  cfg.stft_loss_enable_lr_threshold =
      j.value("stft_loss_enable_lr_threshold", cfg.stft_loss_enable_lr_threshold);
  cfg.success_sisdr_gain_db = j.value("success_sisdr_gain_db", cfg.success_sisdr_gain_db);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

std::string epoch_record_json(const EpochRecord& rec) {
  json j{{"epoch", rec.epoch},
         {"train", json::parse(loss_report_json(rec.train_mean))},
         {"val_loss", rec.val_loss},
         {"val_sisdr_gain_db", rec.val_sisdr_gain_db},
         {"lr", rec.lr},
         {"improved", rec.improved},
         {"halved", rec.halved},
         {"stopped", rec.stopped},
         {"stft_term_active", rec.stft_term_active},
         {"steps", rec.steps}};
  return j.dump();
}

std::vector<MixtureSample> build_validation_set(const TrainConfig& cfg,
                                                const SourceBank& bank) {
  std::vector<MixtureSample> out;
  for (int i = 0; i < cfg.data.val_samples; ++i) {
    Rng rng = Rng::keyed(cfg.seed, {kStreamValidation, static_cast<std::uint64_t>(i)});
    out.push_back(draw_train_sample(bank, cfg, rng));
  }
  return out;
}

TrainResult pretrain_dereverb(const TrainConfig& cfg, bool resume) {
  validate_train_config(cfg);
  const SourceBank bank = make_bank(cfg);
  Dereverb model(cfg.dereverb, cfg.seed);

  std::vector<PretrainPair> val_pairs;
  std::vector<Tensor> val_targets;
  for (int i = 0; i < cfg.data.val_samples; ++i) {
    Rng rng = Rng::keyed(cfg.seed, {kStreamValidation, static_cast<std::uint64_t>(i)});
    val_pairs.push_back(draw_pretrain_pair(bank, cfg.data.chunk_seconds, rng));
    val_targets.push_back(logmag_tensor(val_pairs.back().anechoic, cfg.dereverb.stft));
  }

  RegimeOps ops;
  ops.regime = "P";
  ops.train_step = [&](int epoch, int idx, double loss_scale, bool) {
    Rng rng = Rng::keyed(cfg.seed, {kStreamEpoch, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(idx)});
    const PretrainPair pair = draw_pretrain_pair(bank, cfg.data.chunk_seconds, rng);
    Tape t;
    Dereverb::GraphOutput g = model.forward_graph(t, pair.reverberant);
    const Tensor target = logmag_tensor(pair.anechoic, cfg.dereverb.stft);
    Var loss = logmag_mse_loss(t, g.enhanced_logmag, target);
    const double v = t.scalar_value(loss);
    t.backward(t.scale(loss, loss_scale));
    // Single-stage regime: the spectrogram MSE is the one and only layer.
    LossReport rep;
    rep.per_layer = {v};
    rep.total = v;
    rep.dereverb = 0.0;
    rep.joint = v;
    rep.objective = v;
    return rep;
  };
  ops.validate = [&]() {
    double loss = 0.0;
    std::vector<double> out_db, in_db;
    for (std::size_t i = 0; i < val_pairs.size(); ++i) {
      Tape t;
      Dereverb::GraphOutput g = model.forward_graph(t, val_pairs[i].reverberant);
      loss += t.scalar_value(logmag_mse_loss(t, g.enhanced_logmag, val_targets[i]));
      const AudioClip out(t.value(g.wave).data, cfg.data.bank.sample_rate);
      out_db.push_back(sisdr(out, val_pairs[i].anechoic));
      in_db.push_back(sisdr(val_pairs[i].reverberant, val_pairs[i].anechoic));
    }
    return std::pair{loss / static_cast<double>(val_pairs.size()),
                     mean_sisdr_gain(out_db, in_db)};
  };
  ops.zero_grads = [&]() { model.params().zero_grad(); };
  ops.apply_update = [&](double lr) {
    model.params().clip_grad_norm(cfg.grad_clip_norm);
    model.params().adam_step(lr);
  };
  ops.save_checkpoints = [&](const std::string& tag, const std::string& state,
                             TrainResult& result) {
    const std::string path = (fs::path(cfg.out_dir) / ("derev_" + tag + ".ckpt")).string();
    save_checkpoint(path, "dereverb", dereverb_config_json(cfg.dereverb), model.params(),
                    state);
    (tag == "best" ? result.best_dereverb_path : result.last_dereverb_path) = path;
  };
  ops.load_last = [&]() {
    const std::string path = (fs::path(cfg.out_dir) / "derev_last.ckpt").string();
    const CheckpointInfo info = load_checkpoint(path, "dereverb", model.params());
    return trainer_state_from_json(info.extra_json);
  };
  TrainResult result = run_training(cfg, ops, resume);
  if (!cfg.out_dir.empty()) {
    fill_path_if_present(result.last_dereverb_path,
                         fs::path(cfg.out_dir) / "derev_last.ckpt");
    fill_path_if_present(result.best_dereverb_path,
                         fs::path(cfg.out_dir) / "derev_best.ckpt");
  }
  return result;
}

TrainResult train_separator(const TrainConfig& cfg, bool resume) {
  validate_train_config(cfg);
  const SourceBank bank = make_bank(cfg);
  Separator model(cfg.separator, cfg.seed);
  const std::vector<MixtureSample> val_set = build_validation_set(cfg, bank);
  const std::vector<StftParams> spectral_res =
      stft_loss_resolutions(cfg.data.bank.sample_rate);

  auto step_on = [&](const MixtureSample& sample, double loss_scale, bool stft_active,
                     bool backprop) {
    Tape t;
    std::vector<Var> est = model.forward_graph(t, sample.mixture, sample.visual);
    std::vector<std::vector<double>> targets;
    for (const AudioClip& c : sample.ladder.targets) targets.push_back(c.samples);
    const ProgressiveLoss prog = progressive_loss(t, est, targets);
    LossReport rep;
    for (Var v : prog.per_layer) rep.per_layer.push_back(t.scalar_value(v));
    rep.total = t.scalar_value(prog.total);
    rep.joint = rep.total;
    Var objective = prog.total;
    if (stft_active) {
      Var spec = multires_stft_loss(t, est.back(), sample.reverberant_target.samples,
                                    spectral_res);
      rep.stft_extra = t.scalar_value(spec);
      objective = t.add(objective, t.scale(spec, cfg.stft_loss_lambda));
    }
    rep.objective = t.scalar_value(objective);
    if (backprop) t.backward(t.scale(objective, loss_scale));
    return std::pair{rep, AudioClip(t.value(est.back()).data, sample.mixture.sample_rate)};
  };

  RegimeOps ops;
  ops.regime = "A";
  ops.train_step = [&](int epoch, int idx, double loss_scale, bool stft_active) {
    Rng rng = Rng::keyed(cfg.seed, {kStreamEpoch, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(idx)});
    const MixtureSample sample = draw_train_sample(bank, cfg, rng);
    return step_on(sample, loss_scale, stft_active, true).first;
  };
  ops.validate = [&]() {
    // The scheduler metric stays the progressive loss throughout so the
    // plateau comparison is not disturbed when the spectral term joins the
    // training objective.
    double loss = 0.0;
    std::vector<double> est_db, mix_db;
    for (const MixtureSample& s : val_set) {
      auto [rep, wave] = step_on(s, 1.0, false, false);
      loss += rep.total;
      est_db.push_back(sisdr(wave, s.reverberant_target));
      mix_db.push_back(sisdr(s.mixture, s.reverberant_target));
    }
    return std::pair{loss / static_cast<double>(val_set.size()),
                     mean_sisdr_gain(est_db, mix_db)};
  };
  ops.zero_grads = [&]() { model.params().zero_grad(); };
  ops.apply_update = [&](double lr) {
    model.params().clip_grad_norm(cfg.grad_clip_norm);
    model.params().adam_step(lr);
  };
  ops.save_checkpoints = [&](const std::string& tag, const std::string& state,
                             TrainResult& result) {
    const std::string path = (fs::path(cfg.out_dir) / ("sep_" + tag + ".ckpt")).string();
    save_checkpoint(path, "separator", separator_config_json(cfg.separator),
                    model.params(), state);
    (tag == "best" ? result.best_separator_path : result.last_separator_path) = path;
  };
  ops.load_last = [&]() {
    const std::string path = (fs::path(cfg.out_dir) / "sep_last.ckpt").string();
    const CheckpointInfo info = load_checkpoint(path, "separator", model.params());
    return trainer_state_from_json(info.extra_json);
  };
  TrainResult result = run_training(cfg, ops, resume);
  if (!cfg.out_dir.empty()) {
    fill_path_if_present(result.last_separator_path,
                         fs::path(cfg.out_dir) / "sep_last.ckpt");
    fill_path_if_present(result.best_separator_path,
                         fs::path(cfg.out_dir) / "sep_best.ckpt");
  }
  return result;
}

TrainResult train_joint(const TrainConfig& cfg, const std::string& sep_init,
                        const std::string& derev_init, bool resume) {
  validate_train_config(cfg);
  AVSEP_CHECK(resume || !derev_init.empty(),
              "joint training requires a pretrained enhancement checkpoint");
  const SourceBank bank = make_bank(cfg);
  Separator sep(cfg.separator, cfg.seed);
  Dereverb derev(cfg.dereverb, cfg.seed);
  if (!resume) {
    load_checkpoint(derev_init, "dereverb", derev.params());
    if (!sep_init.empty()) load_checkpoint(sep_init, "separator", sep.params());
    // The joint phase is a fresh optimization problem; pretraining moments
    // would bias its first steps.
    reset_optimizer(sep.params());
    reset_optimizer(derev.params());
  }

  const std::vector<MixtureSample> val_set = build_validation_set(cfg, bank);
  std::vector<Tensor> val_targets;
  for (const MixtureSample& s : val_set)
    val_targets.push_back(logmag_tensor(s.anechoic_target, cfg.dereverb.stft));
  const std::vector<StftParams> spectral_res =
      stft_loss_resolutions(cfg.data.bank.sample_rate);

  auto step_on = [&](const MixtureSample& sample, const Tensor& derev_target,
                     double loss_scale, bool stft_active, bool backprop) {
    const int len = static_cast<int>(sample.mixture.size());
    Tape t;
    std::vector<Var> est = sep.forward_graph(t, sample.mixture, sample.visual);
    std::vector<std::vector<double>> targets;
    for (const AudioClip& c : sample.ladder.targets) targets.push_back(c.samples);
    const ProgressiveLoss prog = progressive_loss(t, est, targets);
    Dereverb::GraphOutput g =
        derev.forward_graph_from(t, est.back(), len, sample.mixture.sample_rate);
    Var dloss = logmag_mse_loss(t, g.enhanced_logmag, derev_target);
    Var joint = t.add(prog.total, dloss);
    LossReport rep;
    for (Var v : prog.per_layer) rep.per_layer.push_back(t.scalar_value(v));
    rep.total = t.scalar_value(prog.total);
    rep.dereverb = t.scalar_value(dloss);
    rep.joint = t.scalar_value(joint);
    Var objective = joint;
    if (stft_active) {
      Var spec = multires_stft_loss(t, est.back(), sample.reverberant_target.samples,
                                    spectral_res);
      rep.stft_extra = t.scalar_value(spec);
      objective = t.add(objective, t.scale(spec, cfg.stft_loss_lambda));
    }
    rep.objective = t.scalar_value(objective);
    if (backprop) t.backward(t.scale(objective, loss_scale));
    return std::pair{rep, AudioClip(t.value(g.wave).data, sample.mixture.sample_rate)};
  };

  RegimeOps ops;
  ops.regime = "C";
  ops.train_step = [&](int epoch, int idx, double loss_scale, bool stft_active) {
    Rng rng = Rng::keyed(cfg.seed, {kStreamEpoch, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(idx)});
    const MixtureSample sample = draw_train_sample(bank, cfg, rng);
    const Tensor target = logmag_tensor(sample.anechoic_target, cfg.dereverb.stft);
    return step_on(sample, target, loss_scale, stft_active, true).first;
  };
  ops.validate = [&]() {
    double loss = 0.0;
    std::vector<double> est_db, mix_db;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
      auto [rep, wave] = step_on(val_set[i], val_targets[i], 1.0, false, false);
      loss += rep.joint;
      est_db.push_back(sisdr(wave, val_set[i].anechoic_target));
      mix_db.push_back(sisdr(val_set[i].mixture, val_set[i].anechoic_target));
    }
    return std::pair{loss / static_cast<double>(val_set.size()),
                     mean_sisdr_gain(est_db, mix_db)};
  };
  ops.zero_grads = [&]() {
    sep.params().zero_grad();
    derev.params().zero_grad();
  };
  ops.apply_update = [&](double lr) {
    clip_joint_grad(sep.params(), derev.params(), cfg.grad_clip_norm);
    sep.params().adam_step(lr);
    derev.params().adam_step(lr);
  };
  ops.save_checkpoints = [&](const std::string& tag, const std::string& state,
                             TrainResult& result) {
    const std::string sp = (fs::path(cfg.out_dir) / ("sep_" + tag + ".ckpt")).string();
    const std::string dp = (fs::path(cfg.out_dir) / ("derev_" + tag + ".ckpt")).string();
    save_checkpoint(sp, "separator", separator_config_json(cfg.separator), sep.params(),
                    state);
    save_checkpoint(dp, "dereverb", dereverb_config_json(cfg.dereverb), derev.params(),
                    state);
    if (tag == "best") {
      result.best_separator_path = sp;
      result.best_dereverb_path = dp;
    } else {
      result.last_separator_path = sp;
      result.last_dereverb_path = dp;
    }
  };
  ops.load_last = [&]() {
    const std::string sp = (fs::path(cfg.out_dir) / "sep_last.ckpt").string();
    const std::string dp = (fs::path(cfg.out_dir) / "derev_last.ckpt").string();
    const CheckpointInfo si = load_checkpoint(sp, "separator", sep.params());
    load_checkpoint(dp, "dereverb", derev.params());
    return trainer_state_from_json(si.extra_json);
  };
  TrainResult result = run_training(cfg, ops, resume);
  if (!cfg.out_dir.empty()) {
    fill_path_if_present(result.last_separator_path,
                         fs::path(cfg.out_dir) / "sep_last.ckpt");
    fill_path_if_present(result.best_separator_path,
                         fs::path(cfg.out_dir) / "sep_best.ckpt");
    fill_path_if_present(result.last_dereverb_path,
                         fs::path(cfg.out_dir) / "derev_last.ckpt");
    fill_path_if_present(result.best_dereverb_path,
                         fs::path(cfg.out_dir) / "derev_best.ckpt");
  }
  return result;
}

AudioClip run_cascade(Separator& sep, Dereverb& derev, const AudioClip& mixture,
                      const VisualFeatureSequence& visual) {
  AVSEP_CHECK(sep.config().stft.sample_rate == derev.config().stft.sample_rate,
              "cascade: stage sample rates differ ("
                  << sep.config().stft.sample_rate << " vs "
                  << derev.config().stft.sample_rate << ")");
  const std::uint64_t hs = sep.params().content_hash();
  const std::uint64_t hd = derev.params().content_hash();
  const SeparationOutput so = sep.forward(mixture, visual);
  AudioClip out = derev.forward(so.final_estimate);
  AVSEP_CHECK(sep.params().content_hash() == hs && derev.params().content_hash() == hd,
              "cascade: frozen parameters changed during evaluation");
  return out;
}

AudioClip run_derev_first(Dereverb& derev, Separator& sep, const AudioClip& mixture,
                          const VisualFeatureSequence& visual) {
  AVSEP_CHECK(sep.config().stft.sample_rate == derev.config().stft.sample_rate,
              "cascade: stage sample rates differ ("
                  << sep.config().stft.sample_rate << " vs "
                  << derev.config().stft.sample_rate << ")");
  const std::uint64_t hs = sep.params().content_hash();
  const std::uint64_t hd = derev.params().content_hash();
  const AudioClip enhanced = derev.forward(mixture);
  AudioClip out = sep.forward(enhanced, visual).final_estimate;
  AVSEP_CHECK(sep.params().content_hash() == hs && derev.params().content_hash() == hd,
              "cascade: frozen parameters changed during evaluation");
  return out;
}

}  // namespace avsep
