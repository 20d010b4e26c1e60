#pragma once

#include "ocmae/tensor.hpp"

namespace ocmae {

struct LossWeights {
  double lambda_pixel = 0.0;
  double lambda_object = 0.0;
};

// Terms switched off by ablation flags are reported as exactly 0.
struct LossTerms {
  bool use_pixel_entropy = true;
  bool use_object_entropy = true;
};

template <class T>
struct LossBreakdown {
  Tensor<T> total;
  Tensor<T> rec;
  Tensor<T> pixel;
  Tensor<T> object;
};

// Mean squared error over every entry.
template <class T>
Tensor<T> loss_reconstruction(const Tensor<T>& composed, const Tensor<T>& target);

// masks [B, K, H, W], normalized over K. Mean over B*H*W of -sum_k m log m.
template <class T>
Tensor<T> loss_pixel_entropy(const Tensor<T>& masks);

// -sum_k mbar_k log mbar_k with mbar the spatial mean per image; averaged over B.
template <class T>
Tensor<T> loss_object_entropy(const Tensor<T>& masks);

// rec + lambda_pixel * pixel + lambda_object * object. Throws NumericalError
// naming the first non-finite term.
template <class T>
LossBreakdown<T> loss_total(const Tensor<T>& composed, const Tensor<T>& target, const Tensor<T>& masks,
                            const LossWeights& weights, const LossTerms& terms = {});

}  // namespace ocmae
