#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocmae/model.hpp"
#include "ocmae/optim.hpp"

namespace ocmae {

// On-disk layout, all integers little-endian:
//   "OCMAECK1" | u32 version | u64 n + config text | i64 epoch | i64 step |
//   u64 seed | i64 optimizer steps | u32 tensor count |
//   per tensor: u32 n + name | u32 rank | i64 dims[rank] | f32 values
// Optimizer moments are stored as "adam.m/<param>" and "adam.v/<param>".
// Random streams are derived from (seed, epoch, step), so those fields are
// the complete RNG state.
struct Checkpoint {
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<float> values;
  };

  std::string config_text;
  std::int64_t epoch = 0;  // completed epochs
  std::int64_t step = 0;   // completed optimizer steps
  std::uint64_t seed = 0;
  std::int64_t optimizer_steps = 0;
  std::vector<Entry> tensors;

  const Entry* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copies parameters (and optimizer moments when `optimizer` is non-null).
Checkpoint capture(const Model<float>& model, const AdamW<float>* optimizer);

// Writes stored values into the model; names and shapes must match the
// model's configuration exactly. Moments are restored when `optimizer` is
// non-null.
void restore(const Checkpoint& ckpt, Model<float>& model, AdamW<float>* optimizer);

}  // namespace ocmae
