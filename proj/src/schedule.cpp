#include "ocmae/schedule.hpp"

#include <cmath>
#include <numbers>

#include "ocmae/errors.hpp"

namespace ocmae {

void ScheduleConfig::validate() const {
  if (!(warmup_epochs >= 0 && warmup_epochs < total_epochs))
    throw ConfigError("schedule.warmup_epochs must be in [0, schedule.total_epochs)");
  if (!(cooldown_epochs >= 0)) throw ConfigError("schedule.cooldown_epochs must be non-negative");
  if (!(mask_ratio_init >= 0 && mask_ratio_init < 1)) throw ConfigError("schedule.mask_ratio_init must be in [0, 1)");
  if (!(lw_init_pixel >= 0 && lw_final_pixel >= 0 && lw_init_object >= 0 && lw_final_object >= 0))
    throw ConfigError("schedule loss weights must be non-negative");
  if (!(lr_start >= 0 && lr_base >= 0 && lr_min >= 0)) throw ConfigError("schedule learning rates must be non-negative");
}

namespace {

// 0 before warmup, 1 at total, linear in between.
double ramp(double epoch, const ScheduleConfig& cfg) {
  if (epoch <= cfg.warmup_epochs) return 0.0;
  if (epoch >= cfg.total_epochs) return 1.0;
  return (epoch - cfg.warmup_epochs) / (cfg.total_epochs - cfg.warmup_epochs);
}

}  // namespace

double mask_ratio_at(double epoch, const ScheduleConfig& cfg) {
  if (epoch >= cfg.total_epochs) return 0.0;
  if (epoch <= cfg.warmup_epochs) return cfg.mask_ratio_init;
  return cfg.mask_ratio_init * (cfg.total_epochs - epoch) / (cfg.total_epochs - cfg.warmup_epochs);
}

LossWeights loss_weights_at(double epoch, const ScheduleConfig& cfg) {
  if (epoch >= cfg.total_epochs) return {cfg.lw_final_pixel, cfg.lw_final_object};
  const double t = ramp(epoch, cfg);
  return {cfg.lw_init_pixel + (cfg.lw_final_pixel - cfg.lw_init_pixel) * t,
          cfg.lw_init_object + (cfg.lw_final_object - cfg.lw_init_object) * t};
}

double lr_at(double epoch, const ScheduleConfig& cfg) {
  if (epoch < cfg.warmup_epochs) return cfg.lr_start + (cfg.lr_base - cfg.lr_start) * epoch / cfg.warmup_epochs;
  if (epoch >= cfg.total_epochs) return cfg.lr_min;
  const double t = (epoch - cfg.warmup_epochs) / (cfg.total_epochs - cfg.warmup_epochs);
  return cfg.lr_min + (cfg.lr_base - cfg.lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

ScheduleValues schedule_at(double epoch, const ScheduleConfig& cfg) {
  return {mask_ratio_at(epoch, cfg), loss_weights_at(epoch, cfg), lr_at(epoch, cfg)};
}

}  // namespace ocmae
