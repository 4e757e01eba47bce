// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avsep/checkpoint.h"
#include "avsep/error.h"
#include "avsep/eval.h"
#include "avsep/manifest.h"
#include "avsep/metrics.h"
#include "avsep/mix.h"
#include "avsep/train.h"
#include "avsep/wav.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace avsep;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<MixtureSample> load_dataset(const std::string& dir, int limit) {
  const std::vector<ManifestRecord> records = read_manifest(dir);
  AVSEP_CHECK(!records.empty(), "dataset " << dir << " is empty");
  const int n = limit > 0 ? std::min<int>(limit, static_cast<int>(records.size()))
                          : static_cast<int>(records.size());
  std::vector<MixtureSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(load_sample(dir, records[i]));
  return out;
}

void parse_snr_range(const std::string& text, double* lo, double* hi) {
  double a = 0.0, b = 0.0;
  char tail = 0;
  const int got = std::sscanf(text.c_str(), "%lf:%lf%c", &a, &b, &tail);
  AVSEP_CHECK(got == 2, "--snr expects lo:hi in dB, got '" << text << "'");
  *lo = a;
  *hi = b;
}

struct SimulateArgs {
  int n = 0;
  std::string out;
  std::uint64_t seed = 1;
  std::string snr;
  int k = 0;
  double chunk_seconds = 0.0;
  int interferers = -1;
  double music_prob = -1.0;
  std::string config;
};

int cmd_simulate(const SimulateArgs& args) {
  AVSEP_CHECK(args.n > 0, "nothing to generate: --n must be positive");
  TrainConfig cfg;
  if (!args.config.empty()) cfg = parse_train_config(slurp(args.config));
  if (!args.snr.empty())
    parse_snr_range(args.snr, &cfg.data.snr_lo_db, &cfg.data.snr_hi_db);
  if (args.k > 0) cfg.k_layers = args.k;
  if (args.chunk_seconds > 0) cfg.data.chunk_seconds = args.chunk_seconds;
  if (args.interferers >= 0) cfg.data.num_interfering_speakers = args.interferers;
  if (args.music_prob >= 0) cfg.data.music_probability = args.music_prob;
  AVSEP_CHECK(cfg.data.snr_lo_db <= cfg.data.snr_hi_db, "snr range is inverted");
  AVSEP_CHECK(cfg.data.num_interfering_speakers >= 1 || cfg.data.music_probability >= 1.0,
              "every sample needs at least one interfering source");

  SourceBank bank = make_synthetic_bank(cfg.data.bank, args.seed);
  bank.rir = cfg.data.rir;
  bank.rir.sample_rate = cfg.data.bank.sample_rate;
  bank.music = cfg.data.music;
  bank.music.sample_rate = cfg.data.bank.sample_rate;

  DatasetWriter writer(args.out);
  std::vector<double> snrs;
  for (int i = 0; i < args.n; ++i) {
    Rng rng = Rng::keyed(args.seed, {kStreamDataset, static_cast<std::uint64_t>(i)});
    const double snr = rng.uniform(cfg.data.snr_lo_db, cfg.data.snr_hi_db);
    const bool music = cfg.data.num_interfering_speakers >= 1
                           ? rng.bernoulli(cfg.data.music_probability)
                           : true;
    const MixtureSample sample =
        build_sample(bank, snr, cfg.data.chunk_seconds,
                     cfg.data.num_interfering_speakers, music, cfg.k_layers, rng,
                     cfg.ladder_step_db);
    writer.add(sample);
    snrs.push_back(snr);
  }

  const int validated = validate_dataset(args.out);
  AVSEP_CHECK(validated == args.n,
              "read-back found " << validated << " samples, expected " << args.n);

  std::cout << "wrote " << args.n << " samples to " << args.out << "\n";
  std::cout << "clip length " << cfg.data.chunk_seconds << " s, total "
            << cfg.data.chunk_seconds * args.n << " s of audio\n";
  const int bins = 6;
  const double lo = cfg.data.snr_lo_db, hi = cfg.data.snr_hi_db;
  const double width = (hi - lo) / bins;
  std::cout << "snr histogram (requested, dB):\n";
  for (int b = 0; b < bins; ++b) {
    const double blo = lo + b * width, bhi = blo + width;
    int count = 0;
    for (double s : snrs)
      if (s >= blo && (b == bins - 1 ? s <= bhi : s < bhi)) ++count;
    std::printf("  [%7.2f, %7.2f%c %4d %s\n", blo, bhi, b == bins - 1 ? ']' : ')',
                count, std::string(count, '#').c_str());
  }
  std::cout << "read back and validated " << validated << " samples\n";
  return 0;
}

struct TrainArgs {
  std::string regime;
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  bool resume = false;
  std::string derev_init;
  std::string sep_init;
};

void print_train_result(const TrainResult& r) {
  std::cout << "epochs run: " << r.epochs.size() << "\n";
  if (!r.epochs.empty()) {
    std::cout << "best validation loss " << r.best_val_loss << " at epoch "
              << r.best_epoch << "\n";
    const EpochRecord& last = r.epochs.back();
    std::cout << "final: " << epoch_record_json(last) << "\n";
  }
  if (r.stopped_early) std::cout << "stopped on validation plateau\n";
  if (r.target_reached) std::cout << "validation gain target reached\n";
  for (const auto& [label, path] :
       {std::pair{"separator (best)", r.best_separator_path},
        {"separator (last)", r.last_separator_path},
        {"dereverb (best)", r.best_dereverb_path},
        {"dereverb (last)", r.last_dereverb_path}}) {
    if (!path.empty()) std::cout << label << ": " << path << "\n";
  }
}

int cmd_train(const TrainArgs& args) {
  TrainConfig cfg = parse_train_config(slurp(args.config));
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);

  if (args.regime == "P") {
    print_train_result(pretrain_dereverb(cfg, args.resume));
  } else if (args.regime == "A") {
    print_train_result(train_separator(cfg, args.resume));
  } else if (args.regime == "C") {
    AVSEP_CHECK(args.resume || !args.derev_init.empty(),
                "regime C requires --derev-init (a pretrained enhancement "
                "checkpoint)");
    print_train_result(train_joint(cfg, args.sep_init, args.derev_init, args.resume));
  } else {  // regime B: frozen cascade evaluation, no updates
    AVSEP_CHECK(!args.sep_init.empty() && !args.derev_init.empty(),
                "regime B requires --sep-init and --derev-init");
    validate_train_config(cfg);
    auto sep = load_separator_checkpoint(args.sep_init);
    auto derev = load_dereverb_checkpoint(args.derev_init);
    SourceBank bank = make_synthetic_bank(cfg.data.bank, cfg.seed);
    bank.rir = cfg.data.rir;
    bank.rir.sample_rate = cfg.data.bank.sample_rate;
    bank.music = cfg.data.music;
    bank.music.sample_rate = cfg.data.bank.sample_rate;
    const std::vector<MixtureSample> val = build_validation_set(cfg, bank);
    double cascade_db = 0.0, mix_db = 0.0, rev_db = 0.0;
    for (const MixtureSample& s : val) {
      const AudioClip out = run_cascade(*sep, *derev, s.mixture, s.visual);
      cascade_db += sisdr(out, s.anechoic_target);
      rev_db += sisdr(out, s.reverberant_target);
      mix_db += sisdr(s.mixture, s.anechoic_target);
    }
    const double n = static_cast<double>(val.size());
    json j{{"regime", "B"},
           {"n_samples", val.size()},
           {"mean_sisdr_anechoic_db", cascade_db / n},
           {"mean_sisdr_reverberant_db", rev_db / n},
           {"mean_gain_anechoic_db", (cascade_db - mix_db) / n}};
    std::cout << j.dump() << "\n";
    if (!cfg.out_dir.empty()) {
      fs::create_directories(cfg.out_dir);
      std::ofstream out(fs::path(cfg.out_dir) / "cascade_eval.json", std::ios::trunc);
      out << j.dump() << "\n";
    }
  }
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string out;
  std::string sep;
  std::string derev;
  bool derev_first = false;
  bool write_wavs = false;
  std::string scorer;
  int threads = 0;
  int limit = 0;
};

int cmd_eval(const EvalArgs& args) {
  AVSEP_CHECK(!args.derev_first || (!args.sep.empty() && !args.derev.empty()),
              "--derev-first needs both --sep and --derev");
  const std::vector<MixtureSample> samples = load_dataset(args.data, args.limit);

  std::unique_ptr<Separator> sep;
  std::unique_ptr<Dereverb> derev;
  if (!args.sep.empty()) sep = load_separator_checkpoint(args.sep);
  if (!args.derev.empty()) derev = load_dereverb_checkpoint(args.derev);

  EstimateFn fn;
  std::string system;
  if (!sep && !derev) {
    system = "noisy passthrough";
    fn = [](const MixtureSample& s) { return s.mixture; };
  } else if (sep && !derev) {
    system = "separation only";
    fn = [&](const MixtureSample& s) {
      return sep->forward(s.mixture, s.visual).final_estimate;
    };
  } else if (!sep && derev) {
    system = "enhancement only";
    fn = [&](const MixtureSample& s) { return derev->forward(s.mixture); };
  } else if (args.derev_first) {
    system = "enhancement then separation";
    fn = [&](const MixtureSample& s) {
      return run_derev_first(*derev, *sep, s.mixture, s.visual);
    };
  } else {
    system = "separation then enhancement";
    fn = [&](const MixtureSample& s) {
      return run_cascade(*sep, *derev, s.mixture, s.visual);
    };
  }

  std::vector<AudioClip> outputs;
  const EvalSummary summary = evaluate_dataset(samples, fn, args.threads, &outputs);

  fs::create_directories(args.out);
  write_eval_csv((fs::path(args.out) / "eval.csv").string(), summary);
  json j = json::parse(eval_summary_json(summary));
  j["system"] = system;
  j["dataset"] = args.data;
  if (!args.scorer.empty()) {
    double total = 0.0;
    int scored = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (summary.rows[i].skipped) continue;
      total += external_quality_score(args.scorer, samples[i].anechoic_target,
                                      outputs[i], args.out);
      ++scored;
    }
    AVSEP_CHECK(scored > 0, "external scorer: no samples to score");
    j["mean_quality"] = total / scored;
  }
  if (args.write_wavs) {
    const fs::path wav_dir = fs::path(args.out) / "wav";
    fs::create_directories(wav_dir);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (summary.rows[i].skipped) continue;
      write_wav((wav_dir / (summary.rows[i].id + "_est.wav")).string(), outputs[i]);
    }
  }
  {
    std::ofstream out(fs::path(args.out) / "eval.json", std::ios::trunc);
    if (!out) throw IoError("cannot write eval.json in " + args.out);
    out << j.dump() << "\n";
  }

  std::cout << "system: " << system << "\n";
  std::cout << "evaluated " << summary.n_evaluated << " of " << summary.rows.size()
            << " samples (" << summary.n_skipped << " skipped)\n";
  std::printf("mean SISDR  vs reverberant %8.3f dB   vs anechoic %8.3f dB\n",
              summary.mean_sisdr_reverberant_db, summary.mean_sisdr_anechoic_db);
  std::printf("mean STOI   vs reverberant %8.4f      vs anechoic %8.4f\n",
              summary.mean_stoi_reverberant, summary.mean_stoi_anechoic);
  if (j.contains("mean_quality"))
    std::printf("mean external quality score %.4f\n", j["mean_quality"].get<double>());

  const double skip_rate =
      static_cast<double>(summary.n_skipped) / static_cast<double>(summary.rows.size());
  if (skip_rate > 0.01) {
    std::cerr << "error: " << summary.n_skipped << " of " << summary.rows.size()
              << " samples skipped (> 1%)\n";
    return 2;
  }
  return 0;
}

struct AblateArgs {
  std::string data;
  std::string out;
  AblationInputs inputs;
  int limit = 0;
};

int cmd_ablate(const AblateArgs& args) {
  const std::vector<MixtureSample> samples = load_dataset(args.data, args.limit);
  AblationInputs inputs = args.inputs;
  if (inputs.work_dir.empty()) inputs.work_dir = (fs::path(args.out) / "tmp").string();

  json echo{{"data", args.data},
            {"separation_ckpt", inputs.separation_ckpt},
            {"enhancement_ckpt", inputs.enhancement_ckpt},
            {"joint_separation_ckpt", inputs.joint_separation_ckpt},
            {"joint_enhancement_ckpt", inputs.joint_enhancement_ckpt},
            {"n_samples", samples.size()}};
  const std::string dataset_id =
      args.data + " (" + std::to_string(samples.size()) + " samples)";
  const AblationReport report = run_ablation(samples, inputs, dataset_id, echo.dump());

  fs::create_directories(args.out);
  write_ablation_csv((fs::path(args.out) / "ablation.csv").string(), report);
  {
    std::ofstream out(fs::path(args.out) / "ablation.json", std::ios::trunc);
    if (!out) throw IoError("cannot write ablation.json in " + args.out);
    out << ablation_report_json(report) << "\n";
  }

  std::cout << "dataset: " << report.dataset_id << "\n";
  std::printf("%-28s %10s %10s %8s %10s\n", "system", "SISDR(an)", "SISDR(rev)",
              "STOI", "quality");
  for (const AblationRow& row : report.rows) {
    if (!row.present) {
      std::printf("%-28s %10s %10s %8s %10s\n", row.name.c_str(), "absent", "-", "-",
                  "-");
      continue;
    }
    std::printf("%-28s %10.3f %10.3f %8.4f %10s\n", row.name.c_str(),
                row.mean_sisdr_db, row.mean_sisdr_reverberant_db, row.mean_stoi,
                row.mean_quality ? std::to_string(*row.mean_quality).c_str() : "-");
  }

  if (!report.trends_evaluated) {
    std::cout << "trend checks skipped: not all five systems were supplied\n";
    return 0;
  }
  std::cout << "trend: enhancement-first strictly worst SISDR: "
            << (report.derev_first_worst ? "pass" : "FAIL") << "\n";
  std::printf("trend: joint cascade vs frozen cascade: %+.3f dB (%s)\n",
              report.joint_minus_frozen_db,
              report.joint_at_least_frozen ? "pass"
              : report.soft_failure        ? "soft failure"
                                           : "FAIL");
  if (report.soft_failure) {
    // Archive the full report next to the primary outputs for later review.
    const fs::path archive = fs::path(args.out) / "soft_failure_archive";
    fs::create_directories(archive);
    fs::copy_file(fs::path(args.out) / "ablation.json", archive / "ablation.json",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(fs::path(args.out) / "ablation.csv", archive / "ablation.csv",
                  fs::copy_options::overwrite_existing);
    std::cout << "soft failure archived under " << archive.string() << "\n";
  }
  if (!report.derev_first_worst || (!report.joint_at_least_frozen && !report.soft_failure))
    return 2;
  return 0;
}

// "--snr -18:6" style values start with a dash; fuse them into --snr=... so
// the parser does not mistake them for option names.
std::vector<std::string> fuse_snr_values(int argc, char** argv) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--snr" && i + 1 < argc) {
      out.push_back("--snr=" + std::string(argv[i + 1]));
      ++i;
      continue;
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audio-visual target speaker extraction: simulate, train, "
               "evaluate, ablate"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate a synthetic evaluation dataset with manifests");
  simulate->add_option("--n", sim.n, "number of samples")->required();
  simulate->add_option("--out", sim.out, "dataset directory")->required();
  simulate->add_option("--seed", sim.seed, "generation seed");
  simulate->add_option("--snr", sim.snr, "mixing SNR range lo:hi in dB");
  simulate->add_option("--k", sim.k, "ladder depth");
  simulate->add_option("--chunk", sim.chunk_seconds, "clip length in seconds");
  simulate->add_option("--interferers", sim.interferers, "interfering speakers");
  simulate->add_option("--music-prob", sim.music_prob, "music probability [0,1]");
  simulate->add_option("--config", sim.config, "training config supplying defaults");

  TrainArgs tr;
  CLI::App* train = app.add_subcommand("train", "train or evaluate one regime");
  train->add_option("--regime", tr.regime, "P, A, B, or C")
      ->required()
      ->check(CLI::IsMember({"P", "A", "B", "C"}));
  train->add_option("--config", tr.config, "training config JSON")->required();
  train->add_option("--out", tr.out, "output directory (overrides config)");
  train->add_option("--seed", tr.seed, "seed (overrides config)");
  train->add_flag("--resume", tr.resume, "continue from the last checkpoint");
  train->add_option("--derev-init", tr.derev_init, "enhancement checkpoint");
  train->add_option("--sep-init", tr.sep_init, "separation checkpoint");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "score a system on a dataset");
  eval->add_option("--data", ev.data, "dataset directory from simulate")->required();
  eval->add_option("--out", ev.out, "report directory")->required();
  eval->add_option("--sep", ev.sep, "separation checkpoint");
  eval->add_option("--derev", ev.derev, "enhancement checkpoint");
  eval->add_flag("--derev-first", ev.derev_first, "run enhancement before separation");
  eval->add_flag("--write-wavs", ev.write_wavs, "save enhanced waveforms");
  eval->add_option("--pesq-bin", ev.scorer, "external quality scorer binary");
  eval->add_option("--threads", ev.threads, "worker threads (0 = auto)");
  eval->add_option("--limit", ev.limit, "evaluate only the first N samples");

  AblateArgs ab;
  CLI::App* ablate =
      app.add_subcommand("ablate", "compare the five system arrangements");
  ablate->add_option("--data", ab.data, "dataset directory from simulate")->required();
  ablate->add_option("--out", ab.out, "report directory")->required();
  ablate->add_option("--sep-a", ab.inputs.separation_ckpt,
                     "separately trained separation checkpoint");
  ablate->add_option("--derev-p", ab.inputs.enhancement_ckpt,
                     "pretrained enhancement checkpoint");
  ablate->add_option("--sep-c", ab.inputs.joint_separation_ckpt,
                     "jointly trained separation checkpoint");
  ablate->add_option("--derev-c", ab.inputs.joint_enhancement_ckpt,
                     "jointly trained enhancement checkpoint");
  ablate->add_option("--pesq-bin", ab.inputs.quality_scorer_binary,
                     "external quality scorer binary");
  ablate->add_option("--threads", ab.inputs.num_threads, "worker threads (0 = auto)");
  ablate->add_option("--limit", ab.limit, "use only the first N samples");

  try {
    const std::vector<std::string> fused = fuse_snr_values(argc, argv);
    std::vector<std::string> reversed(fused.rbegin(), fused.rend());
    app.parse(reversed);
    if (simulate->parsed()) return cmd_simulate(sim);
    if (train->parsed()) return cmd_train(tr);
    if (eval->parsed()) return cmd_eval(ev);
    return cmd_ablate(ab);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalDivergence& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
