#include "cmls/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "cmls/errors.hpp"

namespace cmls {

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::plateau_decay: return "plateau_decay";
    case ScheduleKind::one_cycle: return "one_cycle";
  }
  return "constant";
}

ScheduleKind parse_schedule(const std::string& name) {
  for (ScheduleKind k : {ScheduleKind::constant, ScheduleKind::plateau_decay, ScheduleKind::one_cycle})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown schedule '" + name + "' (expected constant, plateau_decay or one_cycle)");
}

void ScheduleConfig::validate() const {
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw ValidationError("schedule: plateau_factor must be in (0, 1]");
  if (plateau_patience < 1) throw ValidationError("schedule: plateau_patience must be >= 1");
  if (!(max_lr > 0.0)) throw ValidationError("schedule: max_lr must be positive");
  if (!(div_factor >= 1.0) || !(final_div_factor >= 1.0)) throw ValidationError("schedule: div factors must be >= 1");
}

double one_cycle_multiplier(const ScheduleConfig& cfg, long step, long total_steps) {
  if (total_steps <= 1) return 1.0;
  const double start = 1.0 / cfg.div_factor;
  const double end = start / cfg.final_div_factor;
  const double peak = static_cast<double>(total_steps) / 2.0;
  const double s = std::clamp(static_cast<double>(step), 0.0, static_cast<double>(total_steps));
  if (s <= peak) return start + (1.0 - start) * (s / peak);
  return end + (1.0 - end) * ((static_cast<double>(total_steps) - s) / (static_cast<double>(total_steps) - peak));
}

double plateau_multiplier(const ScheduleConfig& cfg, std::span<const double> history) {
  double mult = 1.0;
  double best = std::numeric_limits<double>::infinity();
  int bad = 0;
  for (double loss : history) {
    if (loss < best - cfg.plateau_min_delta) {
      best = loss;
      bad = 0;
    } else if (++bad >= cfg.plateau_patience) {
      mult *= cfg.plateau_factor;
      bad = 0;
    }
  }
  return mult;
}

double schedule_lr(const ScheduleConfig& cfg, long step, long total_steps, std::span<const double> history) {
  switch (cfg.kind) {
    case ScheduleKind::plateau_decay: return plateau_multiplier(cfg, history);
    case ScheduleKind::one_cycle: return one_cycle_multiplier(cfg, step, total_steps);
    case ScheduleKind::constant: break;
  }
  return 1.0;
}

StopDecision early_stop_check(TrainState& state, double current, int patience, double min_delta) {
  if (patience < 1) throw ValidationError("early_stop_check: patience must be >= 1");
  ++state.epoch;
  if (current < state.best_valid_loss - min_delta) {
    state.best_valid_loss = current;
    state.patience_counter = 0;
    state.last_improved = true;
    return StopDecision::continue_training;
  }
  state.last_improved = false;
  return ++state.patience_counter >= patience ? StopDecision::stop : StopDecision::continue_training;
}

}  // namespace cmls
