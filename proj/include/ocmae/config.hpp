#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ocmae/data.hpp"
#include "ocmae/model.hpp"
#include "ocmae/optim.hpp"
#include "ocmae/schedule.hpp"

namespace ocmae {

struct Ablation {
  bool no_object_entropy = false;
  bool no_pixel_entropy = false;
  bool no_masking = false;
  bool no_class_token_noise = false;

  bool operator==(const Ablation&) const = default;
};

struct RunConfig {
  std::string preset = "desk";
  ModelConfig model;
  ScheduleConfig schedule;
  AdamWConfig optim;
  Ablation ablation;
  std::string data_dir;
  double data_split = 0.9;
  std::int64_t batch_size = 128;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 1;  // epochs; 0 evaluates only after the last epoch
  std::int64_t checkpoint_every = 1;
  // Stop (as if interrupted) after this many epochs; -1 runs to completion.
  std::int64_t stop_after = -1;
  std::string out = "run";

  void validate() const;
  std::int64_t total_epochs() const;  // main phase plus cooldown
  // Canonical key=value text; parsing it back gives an equal config.
  std::string to_text() const;
};

// One `key=value` entry with its origin for error messages.
struct Setting {
  std::string key;
  std::string value;
  std::string origin;
};

// Flat key=value lines; `#` starts a comment, blank lines are skipped.
std::vector<Setting> parse_settings(const std::string& text, const std::string& source);
std::vector<Setting> read_settings_file(const std::string& path);
// "key=value" from the command line.
Setting parse_override(const std::string& text);

// Values of a named preset: tetrominoes, mdsprites, clevr6, clevrtex, desk.
RunConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Applies `preset` (if present, last one wins) and then every other key in
// order. Unknown keys throw ConfigError naming the key.
RunConfig run_config_from(const std::vector<Setting>& settings);

SceneSpec scene_spec_from(const std::vector<Setting>& settings);
std::string to_text(const SceneSpec& spec);

}  // namespace ocmae
