#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ocmae/errors.hpp"
#include "ocmae/grad_check.hpp"
#include "ocmae/ops.hpp"
#include "op_cases.hpp"
#include "support.hpp"

using namespace ocmae;
using testing::random_tensor;
using TD = Tensor<double>;


TEST_CASE("elementwise ops broadcast like numpy") {
  const TD a({2, 3}, {1, 2, 3, 4, 5, 6});
  const TD b({3}, {10, 20, 30});
  const TD c({2, 1}, {100, 200});
  const auto s = ops::add(a, b);
  CHECK(s.shape() == Shape{2, 3});
  CHECK(std::vector<double>(s.values().begin(), s.values().end()) == std::vector<double>{11, 22, 33, 14, 25, 36});
  const auto p = ops::mul(a, c);
  CHECK(std::vector<double>(p.values().begin(), p.values().end()) ==
        std::vector<double>{100, 200, 300, 800, 1000, 1200});
  CHECK_THROWS_AS(ops::add(a, TD({2}, {1, 2})), ConfigError);
}

TEST_CASE("reductions, reshapes and slicing") {
  const TD a({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(ops::sum(a).item() == 21);
  CHECK(ops::mean(a).item() == 3.5);
  const auto s0 = ops::sum(a, 0);
  CHECK(s0.shape() == Shape{3});
  CHECK(s0[0] == 5);
  CHECK(s0[2] == 9);
  const auto m1 = ops::mean(a, 1, true);
  CHECK(m1.shape() == Shape{2, 1});
  CHECK(m1[1] == 5);
  CHECK(ops::reshape(a, {3, -1}).shape() == Shape{3, 2});
  const auto t = ops::transpose(a, 0, 1);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t[1] == 4);
  const auto c = ops::concat<double>({a, a}, 1);
  CHECK(c.shape() == Shape{2, 6});
  CHECK(c[3] == 1);
  const auto sl = ops::slice(a, 1, 1, 3);
  CHECK(sl.shape() == Shape{2, 2});
  CHECK(sl[0] == 2);
  CHECK(sl[3] == 6);
  const auto g = ops::gather_rows(TD({2, 3, 1}, {1, 2, 3, 4, 5, 6}), {{2, 0}, {1, 1}});
  CHECK(std::vector<double>(g.values().begin(), g.values().end()) == std::vector<double>{3, 1, 5, 5});
}

TEST_CASE("matmul matches a loop oracle for batched and shared operands") {
  Rng rng(5);
  const TD a = random_tensor<double>({2, 3, 4}, rng);
  const TD b = random_tensor<double>({2, 4, 5}, rng);
  const TD w = random_tensor<double>({4, 5}, rng);
  const auto c = ops::matmul(a, b);
  const auto d = ops::matmul(a, w);
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 5; ++j) {
        double want = 0, want_shared = 0;
        for (int k = 0; k < 4; ++k) {
          want += a[(n * 3 + i) * 4 + k] * b[(n * 4 + k) * 5 + j];
          want_shared += a[(n * 3 + i) * 4 + k] * w[k * 5 + j];
        }
        CHECK(c[(n * 3 + i) * 5 + j] == doctest::Approx(want).epsilon(1e-12));
        CHECK(d[(n * 3 + i) * 5 + j] == doctest::Approx(want_shared).epsilon(1e-12));
      }
}

TEST_CASE("softmax normalizes along any axis; layer norm standardizes") {
  Rng rng(6);
  const TD x = random_tensor<double>({2, 3, 4}, rng, -5, 5);
  for (std::int64_t axis : {0, 1, 2}) {
    const auto y = ops::softmax(x, axis);
    const auto s = ops::sum(y, axis);
    for (std::int64_t i = 0; i < s.numel(); ++i) CHECK(s[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto ln = ops::layer_norm(x, TD::full({4}, 1.0), TD::full({4}, 0.0));
  const auto mu = ops::mean(ln, -1);
  const auto var = ops::mean(ops::square(ln), -1);
  for (std::int64_t i = 0; i < mu.numel(); ++i) {
    CHECK(std::abs(mu[i]) < 1e-12);
    CHECK(var[i] == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("xlogx treats 0 log 0 as 0") {
  const auto y = ops::xlogx(TD({3}, {0.0, 1.0, 0.5}));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == doctest::Approx(0.5 * std::log(0.5)));
}

TEST_CASE("gradient checks for every op over 10 seeds") {
  CHECK(testing::op_cases().size() >= 25);
  for (const auto& c : testing::op_cases())
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto report = testing::check_op_case(c, seed);
      CHECK_MESSAGE(report.passed, c.name << " seed " << seed << ": " << report.message);
    }
}

TEST_CASE("grad check rejects a wrong backward") {
  Rng rng(9);
  TD x = random_tensor<double>({3, 4}, rng, -1, 1, true);
  // y = 2x whose backward claims 3.
  auto doubled = [](const TD& in) {
    auto node = std::make_shared<detail::Node<double>>();
    node->shape = in.shape();
    for (double v : in.values()) node->value.push_back(2 * v);
    if (grad_enabled() && in.requires_grad()) {
      node->requires_grad = true;
      node->inputs = {in.node()};
      node->backward = [](detail::Node<double>& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3 * self.grad[i];
      };
    }
    return TD::from_node(node);
  };
  const auto report = grad_check_params<double>([&] { return ops::sum(ops::square(doubled(x))); }, {x}, {});
  CHECK_FALSE(report.passed);
  CHECK(report.max_error > 0.1);
}
