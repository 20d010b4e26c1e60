#include <doctest.h>

#include <cmath>
#include <vector>

#include "ocmae/errors.hpp"
#include "ocmae/grad_check.hpp"
#include "ocmae/nn.hpp"
#include "ocmae/ops.hpp"
#include "support.hpp"

using namespace ocmae;
using testing::random_tensor;
using TD = Tensor<double>;

TEST_CASE("multi-head attention matches a naive per-head loop") {
  Rng rng(11);
  nn::ParameterList<double> params;
  const std::int64_t b = 2, n = 5, dim = 8, heads = 2, hd = dim / heads;
  nn::MultiHeadAttention<double> mha(params, "attn", dim, heads, rng);
  const TD x = random_tensor<double>({b, n, dim}, rng);
  TD probs;
  const TD y = mha(x, &probs);
  REQUIRE(y.shape() == Shape{b, n, dim});
  REQUIRE(probs.shape() == Shape{b, heads, n, n});

  const auto& wq = mha.qkv.weight;
  const auto& bq = mha.qkv.bias;
  for (std::int64_t bi = 0; bi < b; ++bi) {
    // qkv projection
    std::vector<double> proj(static_cast<std::size_t>(n * 3 * dim));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t o = 0; o < 3 * dim; ++o) {
        double s = bq[o];
        for (std::int64_t d = 0; d < dim; ++d) s += x[(bi * n + i) * dim + d] * wq[d * 3 * dim + o];
        proj[static_cast<std::size_t>(i * 3 * dim + o)] = s;
      }
    std::vector<double> merged(static_cast<std::size_t>(n * dim), 0.0);
    for (std::int64_t h = 0; h < heads; ++h)
      for (std::int64_t i = 0; i < n; ++i) {
        std::vector<double> score(static_cast<std::size_t>(n));
        double mx = -1e300;
        for (std::int64_t j = 0; j < n; ++j) {
          double s = 0;
          for (std::int64_t e = 0; e < hd; ++e)
            s += proj[static_cast<std::size_t>(i * 3 * dim + h * hd + e)] *
                 proj[static_cast<std::size_t>(j * 3 * dim + dim + h * hd + e)];
          score[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(hd));
          mx = std::max(mx, score[static_cast<std::size_t>(j)]);
        }
        double z = 0;
        for (auto& s : score) z += (s = std::exp(s - mx));
        for (std::int64_t j = 0; j < n; ++j) {
          const double p = score[static_cast<std::size_t>(j)] / z;
          CHECK(probs[((bi * heads + h) * n + i) * n + j] == doctest::Approx(p).epsilon(1e-12));
          for (std::int64_t e = 0; e < hd; ++e)
            merged[static_cast<std::size_t>(i * dim + h * hd + e)] +=
                p * proj[static_cast<std::size_t>(j * 3 * dim + 2 * dim + h * hd + e)];
        }
      }
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t o = 0; o < dim; ++o) {
        double s = mha.proj.bias[o];
        for (std::int64_t d = 0; d < dim; ++d) s += merged[static_cast<std::size_t>(i * dim + d)] * mha.proj.weight[d * dim + o];
        CHECK(y[(bi * n + i) * dim + o] == doctest::Approx(s).epsilon(1e-10));
      }
  }
}

TEST_CASE("attention rejects head counts that do not divide the width") {
  Rng rng(1);
  nn::ParameterList<double> params;
  CHECK_THROWS_AS(nn::MultiHeadAttention<double>(params, "a", 10, 3, rng), ConfigError);
}

TEST_CASE("parameter registration and initialization") {
  Rng rng(2);
  nn::ParameterList<float> params;
  nn::Linear<float> lin(params, "fc", 30, 50, rng);
  nn::LayerNorm<float> ln(params, "norm", 50);
  REQUIRE(params.items().size() == 4);
  CHECK(params.find("fc.weight")->weight_decay);
  CHECK_FALSE(params.find("fc.bias")->weight_decay);
  CHECK_FALSE(params.find("norm.weight")->weight_decay);
  CHECK_FALSE(params.find("norm.bias")->weight_decay);
  CHECK(params.total_elements() == 30 * 50 + 50 + 50 + 50);
  const double bound = std::sqrt(6.0 / 80.0);
  double maxabs = 0;
  for (float w : lin.weight.values()) maxabs = std::max(maxabs, static_cast<double>(std::abs(w)));
  CHECK(maxabs <= bound);
  CHECK(maxabs > 0.8 * bound);
  for (float v : lin.bias.values()) CHECK(v == 0.0f);
  for (float v : ln.gamma.values()) CHECK(v == 1.0f);
}

TEST_CASE("transformer block gradients match finite differences") {
  Rng rng(3);
  nn::ParameterList<double> params;
  nn::TransformerBlock<double> block(params, "blk", {8, 2, 2}, rng);
  TD x = random_tensor<double>({2, 3, 8}, rng, -1, 1, true);
  const TD w = random_tensor<double>({2, 3, 8}, rng);
  auto tensors = params.tensors();
  tensors.push_back(x);
  GradCheckOptions opts;
  opts.max_coords_per_tensor = 12;
  const auto report = grad_check_params<double>([&] { return ops::sum(ops::mul(block(x), w)); }, tensors, opts);
  CHECK_MESSAGE(report.passed, report.message);
}

TEST_CASE("self-attention is equivariant to token order") {
  Rng rng(4);
  nn::ParameterList<double> params;
  nn::TransformerBlock<double> block(params, "blk", {8, 2, 4}, rng);
  const TD x = random_tensor<double>({1, 5, 8}, rng);
  const std::vector<std::int64_t> perm{3, 0, 4, 1, 2};
  const auto y = block(x);
  const auto yp = block(ops::gather_rows(x, {perm}));
  const auto expected = ops::gather_rows(y, {perm});
  CHECK(testing::max_abs_diff(yp, expected) < 1e-12);
}
