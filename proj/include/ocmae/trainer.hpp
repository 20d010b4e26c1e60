#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ocmae/checkpoint.hpp"
#include "ocmae/config.hpp"
#include "ocmae/data.hpp"
#include "ocmae/losses.hpp"
#include "ocmae/metrics.hpp"
#include "ocmae/model.hpp"
#include "ocmae/optim.hpp"
#include "ocmae/schedule.hpp"

namespace ocmae {

struct StepResult {
  double total = 0.0;
  double rec = 0.0;
  double pixel = 0.0;
  double object = 0.0;
};

struct StepSettings {
  ScheduleValues schedule;
  Ablation ablation;
  bool class_token_noise = false;
};

// Weights and ratio after ablation switches are applied.
ScheduleValues effective_schedule(const ScheduleValues& values, const Ablation& ablation);

// One forward pass, one backward pass and one AdamW update.
StepResult train_step(Model<float>& model, AdamW<float>& optimizer, const Tensor<float>& images,
                      const StepSettings& settings, Rng& rng);

struct EvalResult {
  metrics::Scores scores;  // unweighted means over images
  std::int64_t n_images = 0;
};

// Full-image (ratio 0), noise-free evaluation; parameters are read only.
EvalResult evaluate(const Model<float>& model, const Dataset& data, std::int64_t batch_size);

// Forward pass on full images without masking or noise.
ForwardResult<float> infer(const Model<float>& model, const Tensor<float>& images);

struct EpochLog {
  std::int64_t epoch = 0;  // 0-based; schedule values are taken at its start
  StepResult loss;         // means over the epoch's steps
  double lr = 0.0;
  double mask_ratio = 0.0;
  double lambda_pixel = 0.0;
  double lambda_object = 0.0;
  std::optional<metrics::Scores> scores;
};

extern const char* const kLogHeader;
std::string format_log_row(const EpochLog& row);

struct FitOptions {
  // Resume from this checkpoint; empty starts fresh.
  std::string resume_from;
  std::ostream* progress = nullptr;
};

struct FitResult {
  std::int64_t epochs_completed = 0;
  bool interrupted = false;
  std::vector<EpochLog> log;  // rows written during this call
  std::optional<EvalResult> final_eval;
};

// Files in config.out: metrics.csv, checkpoint.ckpt (latest), config.txt.
FitResult fit(const RunConfig& config, const DatasetSplit& data, const FitOptions& options = {});

std::int64_t steps_per_epoch(std::int64_t n_train, std::int64_t batch_size);

// Model weights are a function of the run seed only.
std::uint64_t model_seed(std::uint64_t run_seed);

}  // namespace ocmae
