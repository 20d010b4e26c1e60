#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ocmae/tensor.hpp"

namespace ocmae {

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  // Errors are measured relative to max(|analytic|, |numeric|, floor), so
  // near-zero gradients are compared on an absolute scale.
  double floor = 1e-3;
  // Coordinates sampled per tensor; -1 checks every coordinate.
  std::int64_t max_coords_per_tensor = -1;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  bool passed = true;
  double max_error = 0.0;
  std::int64_t coordinates_checked = 0;
  std::size_t worst_tensor = 0;
  std::int64_t worst_coordinate = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string message;
};

// Compares reverse-mode gradients of a scalar loss against central finite
// differences, perturbing the given leaf tensors in place (values are restored).
template <class T>
GradCheckReport grad_check_params(const std::function<Tensor<T>()>& loss, const std::vector<Tensor<T>>& params,
                                  const GradCheckOptions& options = {});

// Single-input form: f is evaluated at `point` and at perturbations of it.
template <class T>
GradCheckReport grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& point,
                           const GradCheckOptions& options = {});

}  // namespace ocmae
