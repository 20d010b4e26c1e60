#include "ocmae/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "ocmae/errors.hpp"

namespace ocmae::metrics {

namespace {

double pairs(std::int64_t n) { return static_cast<double>(n) * static_cast<double>(n - 1) / 2.0; }

// Dense ids 0..n-1 in order of first appearance.
std::vector<std::int64_t> compact(std::span<const std::int64_t> labels, std::int64_t& count) {
  std::map<std::int64_t, std::int64_t> ids;
  std::vector<std::int64_t> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(ids.try_emplace(l, static_cast<std::int64_t>(ids.size())).first->second);
  count = static_cast<std::int64_t>(ids.size());
  return out;
}

}  // namespace

double ari(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth, bool exclude_truth_background,
           std::int64_t background) {
  if (pred.size() != truth.size()) throw ConfigError("ari: labelings differ in size");
  std::vector<std::int64_t> p, t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (exclude_truth_background && truth[i] == background) continue;
    p.push_back(pred[i]);
    t.push_back(truth[i]);
  }
  if (exclude_truth_background && p.size() < 2) throw ConfigError("ari: fewer than two foreground pixels");
  std::int64_t np = 0, nt = 0;
  const auto pc = compact(p, np);
  const auto tc = compact(t, nt);
  std::vector<std::int64_t> table(static_cast<std::size_t>(np * nt), 0), rows(static_cast<std::size_t>(nt), 0),
      cols(static_cast<std::size_t>(np), 0);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    ++table[static_cast<std::size_t>(tc[i] * np + pc[i])];
    ++rows[static_cast<std::size_t>(tc[i])];
    ++cols[static_cast<std::size_t>(pc[i])];
  }
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (auto c : table) index += pairs(c);
  for (auto c : rows) sum_rows += pairs(c);
  for (auto c : cols) sum_cols += pairs(c);
  const double total = pairs(static_cast<std::int64_t>(pc.size()));
  const double expected = total > 0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<std::int64_t> hungarian(std::span<const double> costs, std::int64_t rows, std::int64_t cols) {
  if (rows < 0 || cols < 0 || static_cast<std::int64_t>(costs.size()) != rows * cols)
    throw ConfigError("hungarian: cost matrix size mismatch");
  std::vector<std::int64_t> result(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return result;
  const bool flip = rows > cols;
  const std::int64_t n = flip ? cols : rows, m = flip ? rows : cols;
  auto cost = [&](std::int64_t i, std::int64_t j) {
    return flip ? costs[static_cast<std::size_t>(j * cols + i)] : costs[static_cast<std::size_t>(i * cols + j)];
  };
  // Shortest augmenting path with potentials; 1-based, column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<std::int64_t> match(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (std::int64_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::int64_t j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const std::int64_t i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      std::int64_t j1 = 0;
      for (std::int64_t j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (std::int64_t j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const std::int64_t j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::int64_t j = 1; j <= m; ++j) {
    const std::int64_t i = match[static_cast<std::size_t>(j)];
    if (i == 0) continue;
    if (flip)
      result[static_cast<std::size_t>(j - 1)] = i - 1;
    else
      result[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return result;
}

double miou(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth) {
  if (pred.size() != truth.size()) throw ConfigError("miou: labelings differ in size");
  if (truth.empty()) throw ConfigError("miou: empty truth labeling");
  std::int64_t np = 0, nt = 0;
  const auto pc = compact(pred, np);
  const auto tc = compact(truth, nt);
  std::vector<std::int64_t> inter(static_cast<std::size_t>(nt * np), 0), tsize(static_cast<std::size_t>(nt), 0),
      psize(static_cast<std::size_t>(np), 0);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    ++inter[static_cast<std::size_t>(tc[i] * np + pc[i])];
    ++tsize[static_cast<std::size_t>(tc[i])];
    ++psize[static_cast<std::size_t>(pc[i])];
  }
  std::vector<double> iou(inter.size()), cost(inter.size());
  for (std::int64_t t = 0; t < nt; ++t)
    for (std::int64_t p = 0; p < np; ++p) {
      const auto k = static_cast<std::size_t>(t * np + p);
      const auto uni = tsize[static_cast<std::size_t>(t)] + psize[static_cast<std::size_t>(p)] - inter[k];
      iou[k] = static_cast<double>(inter[k]) / static_cast<double>(uni);
      cost[k] = -iou[k];
    }
  const auto assignment = hungarian(cost, nt, np);
  double total = 0.0;
  for (std::int64_t t = 0; t < nt; ++t) {
    const auto p = assignment[static_cast<std::size_t>(t)];
    if (p >= 0) total += iou[static_cast<std::size_t>(t * np + p)];
  }
  return total / static_cast<double>(nt);
}

template <class T>
Labeling labeling_from_masks(std::span<const T> masks, std::int64_t slots, std::int64_t pixels) {
  if (static_cast<std::int64_t>(masks.size()) != slots * pixels) throw ConfigError("labeling: mask size mismatch");
  Labeling out(static_cast<std::size_t>(pixels), 0);
  for (std::int64_t p = 0; p < pixels; ++p) {
    T best = masks[static_cast<std::size_t>(p)];
    for (std::int64_t k = 1; k < slots; ++k) {
      const T m = masks[static_cast<std::size_t>(k * pixels + p)];
      if (m > best) {
        best = m;
        out[static_cast<std::size_t>(p)] = k;
      }
    }
  }
  return out;
}

template <class T>
Labeling labeling_from_masks(const Tensor<T>& masks) {
  if (masks.rank() != 3) throw ConfigError("labeling expects masks [K, H, W], got " + shape_str(masks.shape()));
  return labeling_from_masks<T>(masks.values(), masks.size(0), masks.size(1) * masks.size(2));
}

template Labeling labeling_from_masks<float>(std::span<const float>, std::int64_t, std::int64_t);
template Labeling labeling_from_masks<double>(std::span<const double>, std::int64_t, std::int64_t);
template Labeling labeling_from_masks<float>(const Tensor<float>&);
template Labeling labeling_from_masks<double>(const Tensor<double>&);

Scores score(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth) {
  return {ari(pred, truth, false), ari(pred, truth, true), miou(pred, truth)};
}

}  // namespace ocmae::metrics
