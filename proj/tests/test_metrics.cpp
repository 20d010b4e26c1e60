#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ocmae/errors.hpp"
#include "ocmae/metrics.hpp"
#include "support.hpp"

using namespace ocmae;
using metrics::Labeling;

namespace {

// Pair-counting definition: agreements over all unordered pixel pairs.
double ari_by_pairs(const Labeling& a, const Labeling& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
      pairs += 1;
    }
  const double expected = pairs > 0 ? in_a * in_b / pairs : 0;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

}  // namespace

TEST_CASE("ari examples") {
  const Labeling t{0, 0, 1, 1};
  CHECK(metrics::ari(t, t, false) == 1.0);
  CHECK(metrics::ari(Labeling{1, 1, 0, 0}, t, false) == 1.0);
  CHECK(metrics::ari(Labeling{3, 3, 3, 3}, t, false) == 0.0);
  CHECK(metrics::ari(Labeling{0, 0, 0, 0}, Labeling{5, 5, 5, 5}, false) == 1.0);
  CHECK_THROWS_AS(metrics::ari(Labeling{0, 1}, t, false), ConfigError);
}

TEST_CASE("ari-fg ignores truth background only") {
  const Labeling truth{0, 0, 0, 1, 1, 2, 2};
  CHECK(metrics::ari(Labeling{9, 8, 7, 1, 1, 2, 2}, truth, true) == 1.0);
  CHECK(metrics::ari(Labeling{1, 1, 1, 1, 1, 2, 2}, truth, true) == 1.0);
  CHECK(metrics::ari(Labeling{0, 0, 0, 1, 2, 1, 2}, truth, true) < 0.0);
  CHECK_THROWS_AS(metrics::ari(Labeling{0, 0}, Labeling{0, 1}, true), ConfigError);
}

TEST_CASE("ari matches the pair-counting oracle on random labelings and is symmetric") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::size_t>(rng.range(2, 40));
    Labeling a(n), b(n);
    for (auto& x : a) x = rng.range(0, 4);
    for (auto& x : b) x = rng.range(0, 4);
    CHECK(std::abs(metrics::ari(a, b, false) - ari_by_pairs(a, b)) < 1e-12);
    CHECK(std::abs(metrics::ari(a, b, false) - metrics::ari(b, a, false)) < 1e-12);
    Labeling renamed = a;
    for (auto& x : renamed) x = (x * 7 + 3) % 11;
    CHECK(std::abs(metrics::ari(renamed, b, false) - metrics::ari(a, b, false)) < 1e-12);
  }
}

TEST_CASE("hungarian matches brute force on 5x5 and handles rectangles") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> c(25);
    for (auto& x : c) x = rng.uniform(-1, 1);
    const auto assignment = metrics::hungarian(c, 5, 5);
    double got = 0;
    for (int i = 0; i < 5; ++i) got += c[i * 5 + assignment[i]];
    std::vector<int> p{0, 1, 2, 3, 4};
    double best = 1e300;
    do {
      double s = 0;
      for (int i = 0; i < 5; ++i) s += c[i * 5 + p[i]];
      best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
  }
  const std::vector<double> diag{0, 5, 5, 5, 0, 5, 5, 5, 0};
  CHECK(metrics::hungarian(diag, 3, 3) == std::vector<std::int64_t>{0, 1, 2});
  CHECK(metrics::hungarian(std::vector<double>{4.0}, 1, 1) == std::vector<std::int64_t>{0});
  // 3 rows, 2 columns: the row left over gets -1.
  const std::vector<double> tall{1, 9, 9, 1, 0, 0};
  const auto t = metrics::hungarian(tall, 3, 2);
  CHECK(std::count(t.begin(), t.end(), -1) == 1);
  double cost = 0;
  for (int i = 0; i < 3; ++i)
    if (t[i] >= 0) cost += tall[i * 2 + t[i]];
  CHECK(cost == 0.0 + 1.0);
  const std::vector<double> wide{3, 1, 2, 2, 3, 1};
  const auto w = metrics::hungarian(wide, 2, 3);
  CHECK(wide[w[0]] + wide[3 + w[1]] == 2.0);
}

TEST_CASE("miou hand cases") {
  const Labeling t{0, 0, 1, 1};
  CHECK(metrics::miou(t, t) == 1.0);
  CHECK(metrics::miou(Labeling{1, 1, 0, 0}, t) == 1.0);
  CHECK(metrics::miou(Labeling{0, 0, 0, 0}, t) == 0.25);
  // truth {0:3 px, 1:1 px}; pred splits truth 0 into two segments.
  CHECK(metrics::miou(Labeling{0, 0, 2, 1}, Labeling{0, 0, 0, 1}) == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
  CHECK_THROWS_AS(metrics::miou(Labeling{}, Labeling{}), ConfigError);
}

TEST_CASE("labeling from masks") {
  // K=3, 4 pixels
  const std::vector<double> onehot{1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0};
  CHECK(metrics::labeling_from_masks<double>(onehot, 3, 4) == Labeling{0, 1, 2, 1});
  const std::vector<double> tie(12, 1.0 / 3.0);
  CHECK(metrics::labeling_from_masks<double>(tie, 3, 4) == Labeling{0, 0, 0, 0});
  Rng rng(3);
  std::vector<double> m(5 * 30);
  for (auto& x : m) x = rng.uniform();
  const auto got = metrics::labeling_from_masks<double>(m, 5, 30);
  for (int p = 0; p < 30; ++p) {
    int best = 0;
    for (int k = 1; k < 5; ++k)
      if (m[k * 30 + p] > m[best * 30 + p]) best = k;
    CHECK(got[p] == best);
  }
}
