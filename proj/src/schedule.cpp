#include "sarw/schedule.hpp"

#include <cmath>

namespace sarw {

double lr_at(long long step, const TrainSchedule& schedule) {
  schedule.validate();
  if (schedule.steps_per_epoch <= 0) throw ConfigError("lr_at: steps_per_epoch not set");
  const long long warmup = schedule.warmup_steps();
  const long long total = schedule.total_steps();
  if (step < 0 || step > total)
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(total) + "]");
  if (step <= warmup && warmup > 0)
    return schedule.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return schedule.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace sarw
