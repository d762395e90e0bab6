#pragma once

#include <cstdint>

#include "sarw/error.hpp"

namespace sarw {

/// Pretraining / fine-tuning schedule. Defaults follow the pretraining
/// recipe: peak 1e-3 after 40 warmup epochs, 64 epochs total, AdamW
/// (0.9, 0.999) with decoupled decay 0.05.
struct TrainSchedule {
  double peak_lr = 1e-3;
  int warmup_epochs = 40;
  int total_epochs = 64;
  int steps_per_epoch = 0;  // derived from dataset size and batch size
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  uint64_t seed = 0;

  long long warmup_steps() const {
    return static_cast<long long>(warmup_epochs) * steps_per_epoch;
  }
  long long total_steps() const {
    return static_cast<long long>(total_epochs) * steps_per_epoch;
  }

  void validate() const {
    if (peak_lr <= 0.0) throw ConfigError("schedule: peak_lr must be positive");
    if (warmup_epochs < 0 || total_epochs <= 0 || warmup_epochs >= total_epochs)
      throw ConfigError("schedule: require 0 <= warmup_epochs < total_epochs");
    if (batch_size < 1) throw ConfigError("schedule: batch_size must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw ConfigError("schedule: betas must lie in [0, 1)");
    if (weight_decay < 0 || eps <= 0) throw ConfigError("schedule: bad decay or eps");
  }
};

/// Linear warmup from 0 to peak over the warmup steps, then a single
/// half-cosine decay to exactly 0 at the final step.
double lr_at(long long step, const TrainSchedule& schedule);

}  // namespace sarw
