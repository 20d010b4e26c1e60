#pragma once

#include "ocmae/losses.hpp"

namespace ocmae {

struct ScheduleConfig {
  double warmup_epochs = 10;
  double total_epochs = 300;
  double cooldown_epochs = 30;
  double mask_ratio_init = 0.75;
  double lw_init_pixel = 1e-4;
  double lw_final_pixel = 3e-3;
  double lw_init_object = 1e-4;
  double lw_final_object = 1e-2;
  double lr_start = 1e-5;
  double lr_base = 5e-4;
  double lr_min = 1e-5;

  void validate() const;
  // Length of the whole run including cooldown.
  double run_epochs() const { return total_epochs + cooldown_epochs; }
};

struct ScheduleValues {
  double mask_ratio = 0.0;
  LossWeights weights;
  double lr = 0.0;
};

// All functions take a fractional epoch.
double mask_ratio_at(double epoch, const ScheduleConfig& cfg);
LossWeights loss_weights_at(double epoch, const ScheduleConfig& cfg);
double lr_at(double epoch, const ScheduleConfig& cfg);
ScheduleValues schedule_at(double epoch, const ScheduleConfig& cfg);

}  // namespace ocmae
