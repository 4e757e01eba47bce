// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

namespace avsep {

/// Validation-plateau learning-rate policy.
///
/// An observation improves iff val < best - min_improvement (strict). An
/// improvement updates best and resets both streak counters. Otherwise both
/// streaks grow; when the halve streak reaches lr_halve_patience the rate is
/// halved and only the halve streak resets, and when the stop streak reaches
/// stop_patience training stops. With constant validation loss and patiences
/// 3/10 this halves after observations 4, 7, and 10 and stops at 11.
struct ScheduleConfig {
  double lr_init = 1e-3;
  int lr_halve_patience = 3;
  int stop_patience = 10;
  double min_improvement = 1e-6;
};

/// Requires lr_init > 0, both patiences >= 1, min_improvement >= 0, and
/// stop_patience > lr_halve_patience (otherwise the rate could never halve
/// before the run ends).
void validate_schedule_config(const ScheduleConfig& cfg);

struct ScheduleDecision {
  bool improved = false;
  bool halved = false;
  bool stop = false;
  double lr = 0.0;  // rate in effect after this observation
};

class PlateauScheduler {
 public:
  explicit PlateauScheduler(const ScheduleConfig& cfg);

  /// Feeds one validation loss; throws NumericalDivergence on non-finite
  /// values and ValidationError if called after a stop decision.
  ScheduleDecision observe(double val_loss);

  /// Exactly lr_init / 2^halvings (ldexp, no accumulated rounding).
  double lr() const;
  double best() const { return best_; }
  int halvings() const { return halvings_; }
  bool stopped() const { return stopped_; }
  const ScheduleConfig& config() const { return cfg_; }

  /// Resume plumbing: the complete mutable state.
  struct State {
    double best = 0.0;
    int halve_streak = 0;
    int stop_streak = 0;
    int halvings = 0;
    bool stopped = false;
    bool has_best = false;
  };
  State state() const;
  void restore(const State& s);

 private:
  ScheduleConfig cfg_;
  double best_ = 0.0;
  int halve_streak_ = 0;
  int stop_streak_ = 0;
  int halvings_ = 0;
  bool stopped_ = false;
  bool has_best_ = false;
};

}  // namespace avsep
