#pragma once

#include <limits>
#include <span>
#include <string>

namespace cmls {

enum class ScheduleKind { constant, plateau_decay, one_cycle };

std::string to_string(ScheduleKind k);
ScheduleKind parse_schedule(const std::string& name);

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::plateau_decay;
  double plateau_factor = 0.5;
  int plateau_patience = 3;
  double plateau_min_delta = 1e-4;
  double max_lr = 6e-3;
  double div_factor = 25.0;         // one-cycle start = max_lr / div_factor
  double final_div_factor = 1e4;    // one-cycle end = start / final_div_factor

  void validate() const;
};

/// Learning-rate multiplier after replaying valid_history. plateau_decay
/// multiplies by plateau_factor each time plateau_patience consecutive epochs
/// fail to improve on the best loss by more than plateau_min_delta. one_cycle
/// returns the multiplier on max_lr at `step` of `total_steps`: linear warmup
/// from 1/div_factor to 1 at total_steps / 2, then linear anneal to
/// 1/(div_factor * final_div_factor). constant always returns 1.
double schedule_lr(const ScheduleConfig& cfg, long step, long total_steps, std::span<const double> valid_history);

double one_cycle_multiplier(const ScheduleConfig& cfg, long step, long total_steps);
double plateau_multiplier(const ScheduleConfig& cfg, std::span<const double> valid_history);

enum class StopDecision { continue_training, stop };

/// Early-stopping bookkeeping carried across epochs.
struct TrainState {
  int epoch = 0;
  double best_valid_loss = std::numeric_limits<double>::infinity();
  int patience_counter = 0;
  unsigned long long seed = 0;
  bool last_improved = false;
};

/// Records current_valid_loss; an improvement must beat the best by more than
/// min_delta. Stops once `patience` consecutive epochs fail to improve.
StopDecision early_stop_check(TrainState& state, double current_valid_loss, int patience, double min_delta = 1e-4);

}  // namespace cmls
