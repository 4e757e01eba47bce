// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/schedule.h"

#include <cmath>

#include "avsep/error.h"

namespace avsep {

void validate_schedule_config(const ScheduleConfig& cfg) {
  AVSEP_CHECK(cfg.lr_init > 0.0, "schedule: lr_init must be positive");
  AVSEP_CHECK(cfg.lr_halve_patience >= 1, "schedule: lr_halve_patience must be >= 1");
  AVSEP_CHECK(cfg.stop_patience >= 1, "schedule: stop_patience must be >= 1");
  AVSEP_CHECK(cfg.min_improvement >= 0.0, "schedule: min_improvement must be >= 0");
  AVSEP_CHECK(cfg.stop_patience > cfg.lr_halve_patience,
              "schedule: stop_patience (" << cfg.stop_patience
                                          << ") must exceed lr_halve_patience ("
                                          << cfg.lr_halve_patience << ")");
}

PlateauScheduler::PlateauScheduler(const ScheduleConfig& cfg) : cfg_(cfg) {
  validate_schedule_config(cfg_);
}

double PlateauScheduler::lr() const { return std::ldexp(cfg_.lr_init, -halvings_); }

ScheduleDecision PlateauScheduler::observe(double val_loss) {
  AVSEP_CHECK_FINITE(std::isfinite(val_loss),
                     "schedule: non-finite validation loss " << val_loss);
  AVSEP_CHECK(!stopped_, "schedule: observe called after stop");
  ScheduleDecision d;
  const bool improved = !has_best_ || val_loss < best_ - cfg_.min_improvement;
  if (improved) {
    best_ = val_loss;
    has_best_ = true;
    halve_streak_ = 0;
    stop_streak_ = 0;
    d.improved = true;
  } else {
    ++halve_streak_;
    ++stop_streak_;
    if (halve_streak_ >= cfg_.lr_halve_patience) {
      ++halvings_;
      halve_streak_ = 0;
      d.halved = true;
    }
    if (stop_streak_ >= cfg_.stop_patience) {
      stopped_ = true;
      d.stop = true;
    }
  }
  d.lr = lr();
  return d;
}

PlateauScheduler::State PlateauScheduler::state() const {
  return {best_, halve_streak_, stop_streak_, halvings_, stopped_, has_best_};
}

void PlateauScheduler::restore(const State& s) {
  AVSEP_CHECK(s.halve_streak >= 0 && s.stop_streak >= 0 && s.halvings >= 0,
              "schedule: negative counters in restored state");
  best_ = s.best;
  halve_streak_ = s.halve_streak;
  stop_streak_ = s.stop_streak;
  halvings_ = s.halvings;
  stopped_ = s.stopped;
  has_best_ = s.has_best;
}

}  // namespace avsep
