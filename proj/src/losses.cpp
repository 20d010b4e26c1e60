#include "ocmae/losses.hpp"

#include <cmath>
#include <string>

#include "ocmae/errors.hpp"
#include "ocmae/ops.hpp"

namespace ocmae {

template <class T>
Tensor<T> loss_reconstruction(const Tensor<T>& composed, const Tensor<T>& target) {
  if (composed.shape() != target.shape())
    throw ConfigError("reconstruction loss: " + shape_str(composed.shape()) + " vs " + shape_str(target.shape()));
  return ops::mean(ops::square(ops::sub(composed, target)));
}

template <class T>
Tensor<T> loss_pixel_entropy(const Tensor<T>& masks) {
  if (masks.rank() != 4) throw ConfigError("pixel entropy expects [B, K, H, W], got " + shape_str(masks.shape()));
  // sum over K then mean over the B*H*W pixels
  const T pixels = static_cast<T>(masks.size(0) * masks.size(2) * masks.size(3));
  return ops::scale(ops::sum(ops::xlogx(masks)), T(-1) / pixels);
}

template <class T>
Tensor<T> loss_object_entropy(const Tensor<T>& masks) {
  if (masks.rank() != 4) throw ConfigError("object entropy expects [B, K, H, W], got " + shape_str(masks.shape()));
  const std::int64_t b = masks.size(0), k = masks.size(1);
  auto mbar = ops::mean(ops::reshape(masks, {b, k, -1}), 2);
  return ops::scale(ops::sum(ops::xlogx(mbar)), T(-1) / static_cast<T>(b));
}

namespace {

template <class T>
void require_finite(const Tensor<T>& t, const char* name) {
  if (!std::isfinite(static_cast<double>(t.item())))
    throw NumericalError(std::string("non-finite ") + name + " loss");
}

}  // namespace

template <class T>
LossBreakdown<T> loss_total(const Tensor<T>& composed, const Tensor<T>& target, const Tensor<T>& masks,
                            const LossWeights& weights, const LossTerms& terms) {
  LossBreakdown<T> out;
  out.rec = loss_reconstruction(composed, target);
  require_finite(out.rec, "reconstruction");
  out.total = out.rec;
  if (terms.use_pixel_entropy) {
    out.pixel = loss_pixel_entropy(masks);
    require_finite(out.pixel, "pixel entropy");
    out.total = ops::add(out.total, ops::scale(out.pixel, static_cast<T>(weights.lambda_pixel)));
  } else {
    out.pixel = Tensor<T>::scalar(T(0));
  }
  if (terms.use_object_entropy) {
    out.object = loss_object_entropy(masks);
    require_finite(out.object, "object entropy");
    out.total = ops::add(out.total, ops::scale(out.object, static_cast<T>(weights.lambda_object)));
  } else {
    out.object = Tensor<T>::scalar(T(0));
  }
  require_finite(out.total, "total");
  return out;
}

#define OCMAE_INSTANTIATE(T)                                                                          \
  template Tensor<T> loss_reconstruction<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> loss_pixel_entropy<T>(const Tensor<T>&);                                        \
  template Tensor<T> loss_object_entropy<T>(const Tensor<T>&);                                       \
  template LossBreakdown<T> loss_total<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                          const LossWeights&, const LossTerms&);

OCMAE_INSTANTIATE(float)
OCMAE_INSTANTIATE(double)
#undef OCMAE_INSTANTIATE

}  // namespace ocmae
