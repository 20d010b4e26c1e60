#include <doctest.h>

#include <cmath>
#include <vector>

#include "ocmae/errors.hpp"
#include "ocmae/grad_check.hpp"
#include "ocmae/losses.hpp"
#include "ocmae/ops.hpp"
#include "ocmae/schedule.hpp"
#include "support.hpp"

using namespace ocmae;
using testing::random_tensor;
using TD = Tensor<double>;

namespace {

// Random per-pixel distributions over K via softmax of random logits.
TD random_masks(std::int64_t b, std::int64_t k, std::int64_t h, std::int64_t w, Rng& rng, double spread = 3.0) {
  return ops::softmax(random_tensor<double>({b, k, h, w}, rng, -spread, spread), 1);
}

double plogp(double p) { return p > 0 ? p * std::log(p) : 0.0; }

}  // namespace

TEST_CASE("reconstruction loss") {
  Rng rng(1);
  const TD x = random_tensor<double>({2, 3, 3, 3}, rng, 0, 1);
  CHECK(loss_reconstruction(x, x).item() == 0.0);
  CHECK(loss_reconstruction(ops::add_scalar(x, 0.1), x).item() == doctest::Approx(0.01).epsilon(1e-9));
  const TD y = random_tensor<double>({2, 3, 3, 3}, rng, 0, 1);
  double want = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) want += (x[i] - y[i]) * (x[i] - y[i]);
  CHECK(std::abs(loss_reconstruction(x, y).item() - want / x.numel()) < 1e-7);
  CHECK_THROWS_AS(loss_reconstruction(x, TD({2, 3, 3, 1})), ConfigError);
}

TEST_CASE("pixel entropy") {
  TD onehot({1, 3, 2, 2});
  auto v = onehot.mutable_values();
  for (int p = 0; p < 4; ++p) v[(p % 3) * 4 + p] = 1.0;
  CHECK(loss_pixel_entropy(onehot).item() == 0.0);
  CHECK(loss_pixel_entropy(TD::full({2, 4, 3, 3}, 0.25)).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  TD quarter({1, 2, 5, 5});
  auto q = quarter.mutable_values();
  for (int p = 0; p < 25; ++p) {
    q[p] = 0.25;
    q[25 + p] = 0.75;
  }
  CHECK(std::abs(loss_pixel_entropy(quarter).item() - 0.5623351446188083) < 1e-3);

  Rng rng(2);
  const TD m = random_masks(2, 3, 4, 5, rng);
  double want = 0;
  for (int b = 0; b < 2; ++b)
    for (int p = 0; p < 20; ++p)
      for (int k = 0; k < 3; ++k) want -= plogp(m[(b * 3 + k) * 20 + p]);
  CHECK(loss_pixel_entropy(m).item() == doctest::Approx(want / 40).epsilon(1e-12));
}

TEST_CASE("object entropy") {
  TD owner({1, 3, 2, 2});
  auto v = owner.mutable_values();
  for (int p = 0; p < 4; ++p) v[4 + p] = 1.0;
  CHECK(loss_object_entropy(owner).item() == 0.0);
  CHECK(loss_object_entropy(TD::full({1, 5, 3, 3}, 0.2)).item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  Rng rng(3);
  const TD m = random_masks(3, 4, 5, 5, rng);
  double want = 0;
  for (int b = 0; b < 3; ++b)
    for (int k = 0; k < 4; ++k) {
      double mbar = 0;
      for (int p = 0; p < 25; ++p) mbar += m[(b * 4 + k) * 25 + p] / 25.0;
      want -= plogp(mbar);
    }
  CHECK(std::abs(loss_object_entropy(m).item() - want / 3) < 1e-6);
}

TEST_CASE("total loss weighting, ablation and non-finite detection") {
  Rng rng(4);
  const TD x = random_tensor<double>({1, 2, 2, 3}, rng, 0, 1);
  const TD y = random_tensor<double>({1, 2, 2, 3}, rng, 0, 1);
  const TD m = random_masks(1, 3, 2, 2, rng);
  const auto none = loss_total(x, y, m, {0.0, 0.0});
  CHECK(none.total.item() == none.rec.item());
  const auto full = loss_total(x, y, m, {0.1, 0.01});
  CHECK(full.total.item() ==
        doctest::Approx(full.rec.item() + 0.1 * full.pixel.item() + 0.01 * full.object.item()).epsilon(1e-12));
  const auto ablated = loss_total(x, y, m, {0.1, 0.01}, {false, false});
  CHECK(ablated.pixel.item() == 0.0);
  CHECK(ablated.object.item() == 0.0);
  CHECK(ablated.total.item() == ablated.rec.item());

  TD bad = y.detach();
  bad.mutable_values()[0] = std::nan("");
  try {
    loss_total(x, bad, m, {0.1, 0.1});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("reconstruction") != std::string::npos);
  }
}

TEST_CASE("total loss gradient passes through both entropy terms") {
  Rng rng(5);
  const TD target = random_tensor<double>({2, 3, 3, 3}, rng, 0, 1);
  TD rgb = random_tensor<double>({2, 3, 3, 3, 3}, rng, 0, 1, true);
  TD logits = random_tensor<double>({2, 3, 3, 3}, rng, -2, 2, true);
  const auto report = grad_check_params<double>(
      [&] {
        const auto scene_masks = ops::softmax(logits, 1);
        const auto composed = ops::sum(ops::mul(ops::reshape(scene_masks, {2, 3, 3, 3, 1}), rgb), 1);
        return loss_total(composed, target, scene_masks, {0.3, 0.7}).total;
      },
      {rgb, logits}, {});
  CHECK_MESSAGE(report.passed, report.message);
}

TEST_CASE("schedules at the published endpoints") {
  const ScheduleConfig cfg;
  for (double e : {0.0, 5.0, 9.99}) {
    CHECK(mask_ratio_at(e, cfg) == 0.75);
    CHECK(loss_weights_at(e, cfg).lambda_pixel == 1e-4);
    CHECK(loss_weights_at(e, cfg).lambda_object == 1e-4);
  }
  for (double e : {300.0, 315.0, 330.0}) {
    CHECK(mask_ratio_at(e, cfg) == 0.0);
    CHECK(loss_weights_at(e, cfg).lambda_pixel == 3e-3);
    CHECK(loss_weights_at(e, cfg).lambda_object == 1e-2);
    CHECK(lr_at(e, cfg) == 1e-5);
  }
  CHECK(lr_at(0, cfg) == 1e-5);
  CHECK(lr_at(10, cfg) == doctest::Approx(5e-4).epsilon(1e-15));
}

TEST_CASE("mid-schedule values") {
  const ScheduleConfig cfg;
  CHECK(std::abs(mask_ratio_at(155, cfg) - 0.375) < 1e-9);
  CHECK(std::abs(loss_weights_at(155, cfg).lambda_pixel - 1.55e-3) < 1e-9);
  CHECK(std::abs(loss_weights_at(155, cfg).lambda_object - (1e-4 + (1e-2 - 1e-4) * 0.5)) < 1e-9);
  CHECK(std::abs(lr_at(155, cfg) - 2.55e-4) < 1e-9);
  CHECK(lr_at(5, cfg) == doctest::Approx(1e-5 + (5e-4 - 1e-5) * 0.5));
}

TEST_CASE("schedules are continuous and monotone between warmup and total") {
  const ScheduleConfig cfg;
  double prev_ratio = mask_ratio_at(10, cfg), prev_lr = lr_at(10, cfg);
  LossWeights prev_w = loss_weights_at(10, cfg);
  for (double e = 10.05; e <= 300.0; e += 0.05) {
    const double r = mask_ratio_at(e, cfg), lr = lr_at(e, cfg);
    const auto w = loss_weights_at(e, cfg);
    CHECK(r <= prev_ratio);
    CHECK(lr <= prev_lr);
    CHECK(w.lambda_pixel >= prev_w.lambda_pixel);
    CHECK(w.lambda_object >= prev_w.lambda_object);
    CHECK(std::abs(r - prev_ratio) < 1e-3);
    CHECK(std::abs(lr - prev_lr) < 1e-6);
    prev_ratio = r;
    prev_lr = lr;
    prev_w = w;
  }
  const double eps = 1e-9;
  CHECK(std::abs(lr_at(10 - eps, cfg) - lr_at(10, cfg)) < 1e-9);
  CHECK(std::abs(mask_ratio_at(300 - eps, cfg) - mask_ratio_at(300, cfg)) < 1e-9);
}

TEST_CASE("schedule validation") {
  ScheduleConfig cfg;
  cfg.warmup_epochs = 300;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.mask_ratio_init = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
