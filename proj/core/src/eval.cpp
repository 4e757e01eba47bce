// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/eval.h"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>
#include <vector>

#include "avsep/checkpoint.h"
#include "avsep/error.h"
#include "avsep/metrics.h"
#include "avsep/train.h"
#include "avsep/wav.h"
#include "json.hpp"

namespace avsep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string row_id(const MixtureSample& s, std::size_t index) {
  if (!s.meta.id.empty()) return s.meta.id;
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%06zu", index);
  return buf;
}

// Runs fn(0..n-1) across worker threads pulling indices from a shared
// counter. Each index owns its output slot, so results never depend on the
// schedule; the first captured exception is rethrown after the join.
void parallel_for(int n, int num_threads, const std::function<void(int)>& fn) {
  int workers = num_threads > 0
                    ? num_threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i; (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

EvalSummary evaluate_impl(const std::vector<MixtureSample>& samples,
                          const EstimateFn& estimate, int num_threads,
                          std::vector<AudioClip>* outputs) {
  AVSEP_CHECK(!samples.empty(), "eval: empty dataset");
  const int n = static_cast<int>(samples.size());
  EvalSummary s;
  s.rows.resize(n);
  if (outputs) outputs->resize(n);
  parallel_for(n, num_threads, [&](int i) {
    const MixtureSample& sample = samples[i];
    EvalRow& row = s.rows[i];
    row.id = row_id(sample, static_cast<std::size_t>(i));
    row.snr_db = sample.meta.snr_db;
    try {
      AudioClip est = estimate(sample);
      AVSEP_CHECK(est.size() == sample.reverberant_target.size(),
                  "estimate length " << est.size() << " != reference length "
                                     << sample.reverberant_target.size());
      row.sisdr_reverberant_db = sisdr(est, sample.reverberant_target);
      row.sisdr_anechoic_db = sisdr(est, sample.anechoic_target);
      row.stoi_reverberant = stoi(est, sample.reverberant_target);
      row.stoi_anechoic = stoi(est, sample.anechoic_target);
      if (outputs) (*outputs)[i] = std::move(est);
    } catch (const ValidationError& e) {
      row.skipped = true;
      row.error = e.what();
    }
  });
  for (const EvalRow& row : s.rows) {
    if (row.skipped) {
      ++s.n_skipped;
      continue;
    }
    ++s.n_evaluated;
    s.mean_sisdr_reverberant_db += row.sisdr_reverberant_db;
    s.mean_sisdr_anechoic_db += row.sisdr_anechoic_db;
    s.mean_stoi_reverberant += row.stoi_reverberant;
    s.mean_stoi_anechoic += row.stoi_anechoic;
  }
  if (s.n_evaluated > 0) {
    s.mean_sisdr_reverberant_db /= s.n_evaluated;
    s.mean_sisdr_anechoic_db /= s.n_evaluated;
    s.mean_stoi_reverberant /= s.n_evaluated;
    s.mean_stoi_anechoic /= s.n_evaluated;
  }
  validate_eval_summary(s);
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

constexpr const char* kArmNames[6] = {
    "Noisy",
    "Derev before Sep",
    "Separation only",
    "Sep before Derev (frozen)",
    "Sep before Derev (joint)",
    "Separation only (joint)",
};

}  // namespace

void validate_eval_summary(const EvalSummary& s) {
  AVSEP_CHECK(!s.rows.empty(), "eval summary: no rows");
  AVSEP_CHECK(s.n_evaluated + s.n_skipped == static_cast<int>(s.rows.size()),
              "eval summary: evaluated " << s.n_evaluated << " + skipped "
                                         << s.n_skipped << " != rows "
                                         << s.rows.size());
  for (const EvalRow& row : s.rows) {
    AVSEP_CHECK(!row.id.empty(), "eval summary: row without id");
    if (row.skipped) {
      AVSEP_CHECK(!row.error.empty(), "eval summary: skipped row " << row.id
                                                                   << " without error");
      continue;
    }
    AVSEP_CHECK_FINITE(std::isfinite(row.sisdr_reverberant_db) &&
                           std::isfinite(row.sisdr_anechoic_db),
                       "eval summary: non-finite SISDR for " << row.id);
    AVSEP_CHECK(row.stoi_reverberant >= 0.0 && row.stoi_reverberant <= 1.0 &&
                    row.stoi_anechoic >= 0.0 && row.stoi_anechoic <= 1.0,
                "eval summary: intelligibility outside [0,1] for " << row.id);
  }
}

EvalSummary evaluate_dataset(const std::vector<MixtureSample>& samples,
                             const EstimateFn& estimate, int num_threads,
                             std::vector<AudioClip>* outputs) {
  return evaluate_impl(samples, estimate, num_threads, outputs);
}

std::unique_ptr<Separator> load_separator_checkpoint(const std::string& path) {
  const CheckpointInfo info = peek_checkpoint(path);
  auto model =
      std::make_unique<Separator>(parse_separator_config(info.config_json), 0);
  load_checkpoint(path, "separator", model->params());
  return model;
}

std::unique_ptr<Dereverb> load_dereverb_checkpoint(const std::string& path) {
  const CheckpointInfo info = peek_checkpoint(path);
  auto model = std::make_unique<Dereverb>(parse_dereverb_config(info.config_json), 0);
  load_checkpoint(path, "dereverb", model->params());
  return model;
}

void write_eval_csv(const std::string& path, const EvalSummary& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("eval: cannot write " + path);
  out << "id,snr_db,sisdr_reverberant_db,sisdr_anechoic_db,"
         "stoi_reverberant,stoi_anechoic,skipped,error\n";
  for (const EvalRow& r : s.rows) {
    if (r.skipped) {
      out << csv_escape(r.id) << "," << fmt(r.snr_db) << ",,,,,1,"
          << csv_escape(r.error) << "\n";
    } else {
      out << csv_escape(r.id) << "," << fmt(r.snr_db) << ","
          << fmt(r.sisdr_reverberant_db) << "," << fmt(r.sisdr_anechoic_db) << ","
          << fmt(r.stoi_reverberant) << "," << fmt(r.stoi_anechoic) << ",0,\n";
    }
  }
  if (!out.flush()) throw IoError("eval: failed writing " + path);
}

std::string eval_summary_json(const EvalSummary& s) {
  json rows = json::array();
  for (const EvalRow& r : s.rows) {
    json row{{"id", r.id}, {"snr_db", r.snr_db}, {"skipped", r.skipped}};
    if (r.skipped) {
      row["error"] = r.error;
    } else {
      row["sisdr_reverberant_db"] = r.sisdr_reverberant_db;
      row["sisdr_anechoic_db"] = r.sisdr_anechoic_db;
      row["stoi_reverberant"] = r.stoi_reverberant;
      row["stoi_anechoic"] = r.stoi_anechoic;
    }
    rows.push_back(row);
  }
  json j{{"n_samples", s.rows.size()},
         {"n_evaluated", s.n_evaluated},
         {"n_skipped", s.n_skipped},
         {"mean_sisdr_reverberant_db", s.mean_sisdr_reverberant_db},
         {"mean_sisdr_anechoic_db", s.mean_sisdr_anechoic_db},
         {"mean_stoi_reverberant", s.mean_stoi_reverberant},
         {"mean_stoi_anechoic", s.mean_stoi_anechoic},
         {"rows", rows}};
  return j.dump();
}

double external_quality_score(const std::string& binary, const AudioClip& reference,
                              const AudioClip& degraded, const std::string& work_dir) {
  AVSEP_CHECK(!binary.empty(), "external scorer: empty binary path");
  fs::create_directories(work_dir);
  const std::string ref_path = (fs::path(work_dir) / "scorer_ref.wav").string();
  const std::string deg_path = (fs::path(work_dir) / "scorer_deg.wav").string();
  write_wav(ref_path, reference);
  write_wav(deg_path, degraded);
  const std::string cmd =
      "'" + binary + "' '" + ref_path + "' '" + deg_path + "' 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw IoError("external scorer: cannot launch " + binary);
  std::string output;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe)) output += buf;
  const int status = ::pclose(pipe);
  if (status != 0)
    throw IoError("external scorer " + binary + " exited with status " +
                  std::to_string(status));
  // The score is the last numeric token printed.
  std::istringstream in(output);
  std::string token;
  bool found = false;
  double score = 0.0;
  while (in >> token) {
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used == token.size()) {
        score = v;
        found = true;
      }
    } catch (const std::exception&) {
    }
  }
  if (!found)
    throw IoError("external scorer " + binary + " printed no numeric score");
  return score;
}

void validate_ablation_report(const AblationReport& r) {
  AVSEP_CHECK(r.rows.size() == 6, "ablation report: expected 6 rows, got "
                                      << r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    AVSEP_CHECK(r.rows[i].name == kArmNames[i],
                "ablation report: row " << i << " is '" << r.rows[i].name
                                        << "', expected '" << kArmNames[i] << "'");
  }
  int n = -1;
  std::uint64_t ids_hash = 0;
  for (const AblationRow& row : r.rows) {
    if (!row.present) continue;
    AVSEP_CHECK_FINITE(
        std::isfinite(row.mean_sisdr_db) && std::isfinite(row.mean_stoi),
        "ablation report: non-finite metric in row " << row.name);
    if (n < 0) {
      n = row.n_samples;
      ids_hash = row.sample_ids_hash;
    }
    AVSEP_CHECK(row.n_samples == n, "ablation report: row "
                                        << row.name << " covers " << row.n_samples
                                        << " samples, others cover " << n);
    AVSEP_CHECK(row.sample_ids_hash == ids_hash,
                "ablation report: row " << row.name
                                        << " was computed on different samples");
  }
  AVSEP_CHECK(r.rows[0].present, "ablation report: noisy baseline missing");
}

AblationReport run_ablation(const std::vector<MixtureSample>& samples,
                            const AblationInputs& inputs,
                            const std::string& dataset_id,
                            const std::string& config_echo) {
  AVSEP_CHECK(!samples.empty(), "ablation: empty dataset");
  std::unique_ptr<Separator> sep, joint_sep;
  std::unique_ptr<Dereverb> derev, joint_derev;
  if (!inputs.separation_ckpt.empty())
    sep = load_separator_checkpoint(inputs.separation_ckpt);
  if (!inputs.enhancement_ckpt.empty())
    derev = load_dereverb_checkpoint(inputs.enhancement_ckpt);
  if (!inputs.joint_separation_ckpt.empty())
    joint_sep = load_separator_checkpoint(inputs.joint_separation_ckpt);
  if (!inputs.joint_enhancement_ckpt.empty())
    joint_derev = load_dereverb_checkpoint(inputs.joint_enhancement_ckpt);

  AblationReport report;
  report.dataset_id = dataset_id;
  report.config_echo = config_echo;
  report.rows.resize(6);
  for (int i = 0; i < 6; ++i) report.rows[i].name = kArmNames[i];

  // Arm order matches the report rows; a null EstimateFn marks an arm whose
  // checkpoints were not supplied.
  std::vector<EstimateFn> arms(6);
  arms[0] = [](const MixtureSample& s) { return s.mixture; };
  if (derev && sep)
    arms[1] = [&](const MixtureSample& s) {
      return run_derev_first(*derev, *sep, s.mixture, s.visual);
    };
  if (sep)
    arms[2] = [&](const MixtureSample& s) {
      return sep->forward(s.mixture, s.visual).final_estimate;
    };
  if (sep && derev)
    arms[3] = [&](const MixtureSample& s) {
      return run_cascade(*sep, *derev, s.mixture, s.visual);
    };
  if (joint_sep && joint_derev)
    arms[4] = [&](const MixtureSample& s) {
      return run_cascade(*joint_sep, *joint_derev, s.mixture, s.visual);
    };
  if (joint_sep)
    arms[5] = [&](const MixtureSample& s) {
      return joint_sep->forward(s.mixture, s.visual).final_estimate;
    };

  for (int i = 0; i < 6; ++i) {
    if (!arms[i]) continue;
    std::vector<AudioClip> outputs;
    const bool want_outputs = !inputs.quality_scorer_binary.empty();
    const EvalSummary es = evaluate_impl(samples, arms[i], inputs.num_threads,
                                         want_outputs ? &outputs : nullptr);
    for (const EvalRow& row : es.rows) {
      AVSEP_CHECK(!row.skipped, "ablation: arm '" << kArmNames[i] << "' sample "
                                                  << row.id << ": " << row.error);
    }
    AblationRow& row = report.rows[i];
    row.present = true;
    row.n_samples = es.n_evaluated;
    row.mean_sisdr_db = es.mean_sisdr_anechoic_db;
    row.mean_sisdr_reverberant_db = es.mean_sisdr_reverberant_db;
    row.mean_stoi = es.mean_stoi_anechoic;
    std::string joined;
    for (const EvalRow& r : es.rows) joined += r.id + "\n";
    row.sample_ids_hash = fnv1a(joined);
    if (report.sample_ids.empty())
      for (const EvalRow& r : es.rows) report.sample_ids.push_back(r.id);
    if (want_outputs) {
      double total = 0.0;
      for (std::size_t k = 0; k < samples.size(); ++k) {
        total += external_quality_score(inputs.quality_scorer_binary,
                                        samples[k].anechoic_target, outputs[k],
                                        inputs.work_dir);
      }
      row.mean_quality = total / static_cast<double>(samples.size());
    }
  }

  report.trends_evaluated = true;
  for (int i = 1; i < 6; ++i) report.trends_evaluated &= report.rows[i].present;
  if (report.trends_evaluated) {
    report.derev_first_worst = true;
    for (int i = 2; i < 6; ++i) {
      report.derev_first_worst &=
          report.rows[1].mean_sisdr_db < report.rows[i].mean_sisdr_db;
    }
    report.joint_minus_frozen_db =
        report.rows[4].mean_sisdr_db - report.rows[3].mean_sisdr_db;
    report.joint_at_least_frozen = report.joint_minus_frozen_db >= 0.0;
    report.soft_failure = !report.joint_at_least_frozen &&
                          report.joint_minus_frozen_db > -kJointTrendSoftMarginDb;
  }
  validate_ablation_report(report);
  return report;
}

std::string ablation_report_json(const AblationReport& r) {
  json rows = json::array();
  for (const AblationRow& row : r.rows) {
    json jr{{"name", row.name}, {"present", row.present}};
    if (row.present) {
      jr["n_samples"] = row.n_samples;
      jr["mean_sisdr_db"] = row.mean_sisdr_db;
      jr["mean_sisdr_reverberant_db"] = row.mean_sisdr_reverberant_db;
      jr["mean_stoi"] = row.mean_stoi;
      jr["sample_ids_hash"] = row.sample_ids_hash;
      if (row.mean_quality) jr["mean_quality"] = *row.mean_quality;
    }
    rows.push_back(jr);
  }
  json j{{"rows", rows},
         {"dataset_id", r.dataset_id},
         {"config_echo", r.config_echo},
         {"sample_ids", r.sample_ids},
         {"trends_evaluated", r.trends_evaluated}};
  if (r.trends_evaluated) {
    j["derev_first_worst"] = r.derev_first_worst;
    j["joint_at_least_frozen"] = r.joint_at_least_frozen;
    j["joint_minus_frozen_db"] = r.joint_minus_frozen_db;
    j["soft_failure"] = r.soft_failure;
  }
  return j.dump();
}

void write_ablation_csv(const std::string& path, const AblationReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("ablation: cannot write " + path);
  out << "name,present,n_samples,mean_sisdr_db,mean_sisdr_reverberant_db,"
         "mean_stoi,mean_quality\n";
  for (const AblationRow& row : r.rows) {
    out << csv_escape(row.name) << "," << (row.present ? 1 : 0) << ",";
    if (row.present) {
      out << row.n_samples << "," << fmt(row.mean_sisdr_db) << ","
          << fmt(row.mean_sisdr_reverberant_db) << "," << fmt(row.mean_stoi) << ",";
      if (row.mean_quality) out << fmt(*row.mean_quality);
    } else {
      out << ",,,,";
    }
    out << "\n";
  }
  if (!out.flush()) throw IoError("ablation: failed writing " + path);
}

}  // namespace avsep
