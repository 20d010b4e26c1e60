#include "ocmae/optim.hpp"

#include <cmath>

#include "ocmae/errors.hpp"

namespace ocmae {

template <class T>
AdamW<T>::AdamW(const nn::ParameterList<T>& params, const AdamWConfig& config) : config_(config) {
  for (const auto& p : params.items()) {
    m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), T(0));
    v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), T(0));
  }
}

template <class T>
void AdamW<T>::step(nn::ParameterList<T>& params, double lr) {
  const auto& items = params.items();
  if (items.size() != m_.size()) throw ConfigError("optimizer state does not match the parameter list");
  ++step_count_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tensor<T> p = items[i].tensor;
    auto values = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != values.size()) throw ConfigError("optimizer state shape mismatch for " + items[i].name);
    const double decay = items[i].weight_decay ? lr * config_.weight_decay : 0.0;
    const bool has_grad = p.has_grad();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = has_grad ? static_cast<double>(p.grad()[j]) : 0.0;
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * g;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      double x = static_cast<double>(values[j]);
      x -= decay * x;
      x -= lr * (mj / c1) / (std::sqrt(vj / c2) + config_.eps);
      values[j] = static_cast<T>(x);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace ocmae
