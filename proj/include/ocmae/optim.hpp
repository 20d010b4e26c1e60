#pragma once

#include <cstdint>
#include <vector>

#include "ocmae/nn.hpp"

namespace ocmae {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decoupled weight decay: p -= lr * wd * p, then the bias-corrected Adam
// update. Parameters registered without decay skip the first part.
template <class T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const nn::ParameterList<T>& params, const AdamWConfig& config);

  void step(nn::ParameterList<T>& params, double lr);

  const AdamWConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  AdamWConfig config_;
  std::int64_t step_count_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace ocmae
