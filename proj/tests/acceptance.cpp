// Acceptance suite: one PASS/FAIL line per criterion.
//   ocmae_acceptance [--only 1,2,...] [--work DIR] [--verbose]

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ocmae/cli.hpp"
#include "ocmae/grad_check.hpp"
#include "ocmae/losses.hpp"
#include "ocmae/metrics.hpp"
#include "ocmae/model.hpp"
#include "ocmae/ops.hpp"
#include "ocmae/schedule.hpp"
#include "op_cases.hpp"
#include "support.hpp"

using namespace ocmae;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

struct Env {
  fs::path work;
  bool verbose = false;
  // Desk runs shared between criteria 7 and 9.
  std::map<std::uint64_t, fs::path> desk_runs;
};

int cli_call(const Env& env, std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "ocmae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream captured, quiet;
  std::ostream& err = env.verbose ? std::cerr : static_cast<std::ostream&>(quiet);
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), captured, err);
  if (out) *out = captured.str();
  if (code != 0) std::cerr << "ocmae " << args[1] << " exited " << code << ": " << quiet.str() << "\n";
  return code;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- 1 -------------------------------------------------------------------

Verdict gradients(Env&) {
  const auto t0 = Clock::now();
  Verdict v;
  std::size_t checked = 0;
  for (const auto& c : testing::op_cases())
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = testing::check_op_case(c, seed, 1e-3);
      ++checked;
      if (!r.passed && v.pass) {
        v.pass = false;
        v.detail = c.name + " seed " + std::to_string(seed) + " " + r.message + "; ";
      }
    }

  ModelConfig cfg;
  cfg.slots = 3;
  cfg.enc_dim = cfg.dec_dim = 8;
  cfg.enc_depth = cfg.dec_depth = 1;
  cfg.enc_heads = cfg.dec_heads = 2;
  cfg.patch = 2;
  cfg.height = cfg.width = 4;
  Model<double> model(cfg, 12);
  Rng rng(11);
  for (auto& x : model.class_tokens.mutable_values()) x = rng.normal(0.0, 1.0);
  const auto images = testing::random_tensor<double>({2, 4, 4, 3}, rng, 0, 1);
  const auto draw = draw_mask(2, cfg.num_patches(), 0.5, rng);
  GradCheckOptions opts;
  opts.tolerance = 1e-2;
  const auto total = grad_check_params<double>(
      [&] {
        const auto r = model.forward(images, draw, Tensor<double>());
        return loss_total(r.scene.composed, images, r.scene.masks, {0.5, 0.5}).total;
      },
      model.parameters().tensors(), opts);
  if (!total.passed) {
    v.pass = false;
    v.detail += "total loss " + total.message + "; ";
  }
  const double secs = seconds_since(t0);
  if (secs >= 60) v.pass = false;
  v.detail += std::to_string(checked) + " op checks, total loss max error " + fmt(total.max_error) + " over " +
              std::to_string(total.coordinates_checked) + " coordinates, " + fmt(secs, 3) + "s";
  return v;
}

// ---- 2, 3 ----------------------------------------------------------------

ModelConfig random_config(Rng& rng) {
  ModelConfig c;
  c.slots = rng.range(2, 5);
  c.enc_dim = 2 * rng.range(2, 8);
  c.dec_dim = 2 * rng.range(2, 8);
  c.enc_heads = c.enc_dim % 4 == 0 ? 2 : 1;
  c.dec_heads = c.dec_dim % 4 == 0 ? 2 : 1;
  c.enc_depth = rng.range(1, 2);
  c.dec_depth = rng.range(1, 2);
  c.patch = rng.range(1, 3);
  c.height = c.patch * rng.range(1, 3);
  c.width = c.patch * rng.range(1, 3);
  return c;
}

void spread_class_tokens(Model<float>& model, Rng& rng) {
  for (auto& x : model.class_tokens.mutable_values()) x = static_cast<float>(rng.normal(0.0, 1.0));
}

Verdict mixture_invariants(Env&) {
  Verdict v;
  double worst_mass = 0, worst_mix = 0, worst_attn = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(2024, {trial}));
    const auto cfg = random_config(rng);
    Model<float> model(cfg, trial);
    if (trial % 2) spread_class_tokens(model, rng);
    const std::int64_t b = rng.range(1, 3);
    const auto images = testing::random_tensor<float>({b, cfg.height, cfg.width, 3}, rng, 0, 1);
    const auto r = model.forward(images, draw_mask(b, cfg.num_patches(), rng.uniform(0, 0.9), rng),
                                 model.sample_class_token_noise(b, rng));
    const auto& s = r.scene;
    const std::int64_t k = cfg.slots, hw = cfg.height * cfg.width;
    for (std::int64_t i = 0; i < b; ++i)
      for (std::int64_t p = 0; p < hw; ++p) {
        double mass = 0;
        double mix[3] = {0, 0, 0};
        for (std::int64_t j = 0; j < k; ++j) {
          const double m = s.masks[(i * k + j) * hw + p];
          mass += m;
          for (int ch = 0; ch < 3; ++ch) mix[ch] += m * s.per_slot_rgb[((i * k + j) * hw + p) * 3 + ch];
        }
        worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
        for (int ch = 0; ch < 3; ++ch) worst_mix = std::max(worst_mix, std::abs(mix[ch] - s.composed[(i * hw + p) * 3 + ch]));
      }
    const auto& a = r.slot_state.attn;
    const std::int64_t rows = a.numel() / k;
    for (std::int64_t row = 0; row < rows; ++row) {
      double sum = 0;
      for (std::int64_t j = 0; j < k; ++j) sum += a[row * k + j];
      worst_attn = std::max(worst_attn, std::abs(sum - 1.0));
    }
  }
  v.pass = worst_mass <= 1e-6 && worst_mix <= 1e-6 && worst_attn <= 1e-6;
  v.detail = "100 draws; max |sum m - 1| " + fmt(worst_mass) + ", max |composed - sum m x| " + fmt(worst_mix) +
             ", max |attn row - 1| " + fmt(worst_attn);
  return v;
}

Verdict permutation_equivariance(Env&) {
  Verdict v;
  double worst_composed = 0, worst_masks = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(77, {trial}));
    auto cfg = random_config(rng);
    cfg.slots = rng.range(3, 5);
    Model<float> model(cfg, trial);
    spread_class_tokens(model, rng);
    const std::int64_t k = cfg.slots, d = cfg.enc_dim, hw = cfg.height * cfg.width;
    const auto images = testing::random_tensor<float>({1, cfg.height, cfg.width, 3}, rng, 0, 1);
    const auto draw = draw_mask(1, cfg.num_patches(), rng.uniform(0, 0.75), rng);
    const auto before = model.forward(images, draw, Tensor<float>());
    std::vector<std::int64_t> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::int64_t i = k - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
    const std::vector<float> original(model.class_tokens.values().begin(), model.class_tokens.values().end());
    auto tokens = model.class_tokens.mutable_values();
    for (std::int64_t j = 0; j < k; ++j)
      for (std::int64_t e = 0; e < d; ++e) tokens[j * d + e] = original[perm[j] * d + e];
    const auto after = model.forward(images, draw, Tensor<float>());
    worst_composed = std::max(worst_composed, testing::max_abs_diff(after.scene.composed, before.scene.composed));
    for (std::int64_t j = 0; j < k; ++j)
      for (std::int64_t p = 0; p < hw; ++p)
        worst_masks = std::max(worst_masks, std::abs(static_cast<double>(after.scene.masks[j * hw + p]) -
                                                     before.scene.masks[perm[j] * hw + p]));
  }
  v.pass = worst_composed <= 1e-5 && worst_masks <= 1e-5;
  v.detail = "20 trials; max composed change " + fmt(worst_composed) + ", max permuted-mask mismatch " + fmt(worst_masks);
  return v;
}

// ---- 4 -------------------------------------------------------------------

Verdict entropy_bounds(Env&) {
  Verdict v;
  double worst_low = 0, worst_high = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    Rng rng(derive_seed(404, {trial}));
    const std::int64_t b = rng.range(1, 3), k = rng.range(1, 6), h = rng.range(1, 6), w = rng.range(1, 6);
    const double spread = std::exp(rng.uniform(-3, 4));
    const auto logits = testing::random_tensor<double>({b, k, h, w}, rng, -spread, spread);
    const auto masks = ops::softmax(logits, 1);
    const double log_k = std::log(static_cast<double>(k));
    for (double value : {loss_pixel_entropy(masks).item(), loss_object_entropy(masks).item()}) {
      worst_low = std::min(worst_low, value);
      worst_high = std::max(worst_high, value - log_k);
    }
  }
  double worst_equality = 0;
  for (std::int64_t k = 1; k <= 8; ++k) {
    const std::int64_t b = 2, h = 3, w = 5, hw = h * w;
    std::vector<double> uniform(static_cast<std::size_t>(b * k * hw), 1.0 / static_cast<double>(k));
    std::vector<double> onehot(uniform.size(), 0.0);
    for (std::int64_t i = 0; i < b; ++i)
      for (std::int64_t p = 0; p < hw; ++p) onehot[static_cast<std::size_t>((i * k + (p % k)) * hw + p)] = 1.0;
    std::vector<double> single(uniform.size(), 0.0);
    for (std::int64_t i = 0; i < b; ++i)
      for (std::int64_t p = 0; p < hw; ++p) single[static_cast<std::size_t>(i * k * hw + p)] = 1.0;
    const Tensor<double> u({b, k, h, w}, uniform), o({b, k, h, w}, onehot), s({b, k, h, w}, single);
    const double log_k = std::log(static_cast<double>(k));
    worst_equality = std::max({worst_equality, std::abs(loss_pixel_entropy(u).item() - log_k),
                               std::abs(loss_object_entropy(u).item() - log_k), std::abs(loss_pixel_entropy(o).item()),
                               std::abs(loss_object_entropy(s).item())});
  }
  v.pass = worst_low >= 0 && worst_high <= 0 && worst_equality <= 1e-6;
  v.detail = "1000 fields; min value " + fmt(worst_low) + ", max excess over log K " + fmt(worst_high) +
             ", worst equality-case error " + fmt(worst_equality);
  return v;
}

// ---- 5 -------------------------------------------------------------------

Verdict schedules(Env&) {
  Verdict v;
  ScheduleConfig cfg;
  cfg.mask_ratio_init = 0.75;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  for (double e : {0.0, 3.5, 9.0, 9.999}) {
    const auto s = schedule_at(e, cfg);
    expect(s.weights.lambda_pixel == 1e-4 && s.weights.lambda_object == 1e-4, "warmup weights at " + fmt(e));
    expect(s.mask_ratio == 0.75, "warmup ratio at " + fmt(e));
  }
  for (double e : {300.0, 310.0, 329.999}) {
    const auto s = schedule_at(e, cfg);
    expect(s.weights.lambda_pixel == 3e-3 && s.weights.lambda_object == 1e-2, "final weights at " + fmt(e));
    expect(s.mask_ratio == 0.0, "final ratio at " + fmt(e));
    expect(s.lr == 1e-5, "final lr at " + fmt(e));
  }
  expect(lr_at(0.0, cfg) == 1e-5, "lr at 0");
  expect(lr_at(10.0, cfg) == 5e-4, "peak lr");
  const auto mid = schedule_at(155.0, cfg);
  const double ratio_oracle = 0.75 * (300.0 - 155.0) / (300.0 - 10.0);
  const double pixel_oracle = 1e-4 + (3e-3 - 1e-4) * (155.0 - 10.0) / (300.0 - 10.0);
  const double lr_oracle = 1e-5 + (5e-4 - 1e-5) * 0.5 * (1.0 + std::cos(M_PI * (155.0 - 10.0) / (300.0 - 10.0)));
  expect(std::abs(mid.mask_ratio - 0.375) <= 1e-9 && std::abs(mid.mask_ratio - ratio_oracle) <= 1e-12, "mid ratio");
  expect(std::abs(mid.weights.lambda_pixel - 1.55e-3) <= 1e-9 && std::abs(mid.weights.lambda_pixel - pixel_oracle) <= 1e-12,
         "mid pixel weight");
  expect(std::abs(mid.lr - 2.55e-4) <= 1e-9 && std::abs(mid.lr - lr_oracle) <= 1e-12, "mid lr");
  v.pass = bad.empty();
  std::ostringstream os;
  os.precision(12);
  os << "at epoch 155: ratio " << mid.mask_ratio << ", lambda_pixel " << mid.weights.lambda_pixel << ", lr " << mid.lr;
  for (const auto& b : bad) os << "; mismatch: " << b;
  v.detail = os.str();
  return v;
}

// ---- 6 -------------------------------------------------------------------

double ari_by_pairs(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  const std::size_t n = a.size();
  std::int64_t both = 0, in_a = 0, in_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
      ++pairs;
    }
  const double expected = pairs > 0 ? static_cast<double>(in_a) * static_cast<double>(in_b) / static_cast<double>(pairs) : 0.0;
  const double max_index = 0.5 * static_cast<double>(in_a + in_b);
  if (max_index == expected) return 1.0;
  return (static_cast<double>(both) - expected) / (max_index - expected);
}

Verdict metric_oracles(Env&) {
  const auto t0 = Clock::now();
  Verdict v;
  double worst_ari = 0;
  std::int64_t pairs_checked = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < n; ++i) count *= 3;
    std::vector<std::vector<std::int64_t>> all(count, std::vector<std::int64_t>(n));
    for (std::size_t c = 0; c < count; ++c)
      for (std::size_t i = 0, x = c; i < n; ++i, x /= 3) all[c][i] = static_cast<std::int64_t>(x % 3);
    for (const auto& truth : all)
      for (const auto& pred : all) {
        worst_ari = std::max(worst_ari, std::abs(metrics::ari(pred, truth, false) - ari_by_pairs(pred, truth)));
        ++pairs_checked;
      }
  }

  double worst_hungarian = 0;
  std::vector<int> perm(5);
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    Rng rng(derive_seed(606, {trial}));
    std::vector<double> costs(25);
    for (auto& c : costs) c = trial % 3 == 0 ? static_cast<double>(rng.range(0, 3)) : rng.uniform(-5, 5);
    const auto assign = metrics::hungarian(costs, 5, 5);
    double got = 0;
    std::set<std::int64_t> used;
    for (int r = 0; r < 5; ++r) {
      got += costs[static_cast<std::size_t>(r * 5 + assign[static_cast<std::size_t>(r)])];
      used.insert(assign[static_cast<std::size_t>(r)]);
    }
    if (used.size() != 5) worst_hungarian = INFINITY;
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
      double c = 0;
      for (int r = 0; r < 5; ++r) c += costs[static_cast<std::size_t>(r * 5 + perm[static_cast<std::size_t>(r)])];
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    worst_hungarian = std::max(worst_hungarian, std::abs(got - best));
  }

  const metrics::Labeling truth{0, 0, 1, 1, 2, 2}, swapped{2, 2, 0, 0, 1, 1};
  const metrics::Labeling halves{0, 0, 0, 1, 1, 1}, single{4, 4, 4, 4, 4, 4};
  const bool miou_ok = metrics::miou(truth, truth) == 1.0 && metrics::miou(swapped, truth) == 1.0 &&
                       metrics::miou(single, halves) == 0.25;

  const double secs = seconds_since(t0);
  v.pass = worst_ari <= 1e-12 && worst_hungarian <= 1e-12 && miou_ok && secs < 120;
  v.detail = std::to_string(pairs_checked) + " labeling pairs, max ari error " + fmt(worst_ari) +
             "; 200 hungarian cases, max cost gap " + fmt(worst_hungarian) + "; miou hand cases " +
             (miou_ok ? "exact" : "WRONG") + "; " + fmt(secs, 3) + "s";
  return v;
}

// ---- 7, 8, 9 -------------------------------------------------------------

constexpr std::int64_t kDeskScenes = 2000;

fs::path desk_data(Env& env) {
  const fs::path dir = env.work / "desk_data";
  if (!fs::exists(dir / "manifest.txt")) {
    if (cli_call(env, {"gen-data", "--seed", "2000", "--count", std::to_string(kDeskScenes), "--out", dir.string()}) != 0)
      throw std::runtime_error("gen-data failed");
  }
  return dir;
}

struct DeskRun {
  fs::path dir;
  nlohmann::json eval;
  double seconds = 0;
};

DeskRun desk_run(Env& env, std::uint64_t seed) {
  DeskRun run;
  run.dir = env.work / ("desk_seed" + std::to_string(seed));
  const auto data = desk_data(env);
  const auto t0 = Clock::now();
  if (!env.desk_runs.count(seed)) {
    std::cerr << "training desk preset, seed " << seed << "\n";
    if (cli_call(env, {"train", "--override", "preset=desk", "--override", "train.eval_every=0", "--seed",
                       std::to_string(seed), "--data", data.string(), "--out", run.dir.string()}) != 0)
      throw std::runtime_error("desk training failed for seed " + std::to_string(seed));
    env.desk_runs[seed] = run.dir;
  }
  run.seconds = seconds_since(t0);
  std::string json;
  if (cli_call(env, {"eval", "--checkpoint", (run.dir / "checkpoint.ckpt").string()}, &json) != 0)
    throw std::runtime_error("eval failed");
  run.eval = nlohmann::json::parse(json);
  return run;
}

Verdict desk_training(Env& env) {
  Verdict v;
  int good = 0;
  std::ostringstream os;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto run = desk_run(env, seed);
    const double ari = run.eval["ari"], ari_fg = run.eval["ari_fg"];
    const bool ok = ari >= 0.80 && ari_fg >= 0.70 && run.seconds <= 45 * 60 && run.eval["n_images"] == 200;
    good += ok;
    os << "seed " << seed << ": ari " << fmt(ari) << " ari_fg " << fmt(ari_fg) << " miou " << fmt(run.eval["miou"])
       << " (" << fmt(run.seconds / 60, 3) << " min)" << (ok ? "" : " below target") << "; ";
  }
  v.pass = good >= 2;
  v.detail = os.str() + std::to_string(good) + "/3 seeds reach ARI >= 0.80 and ARI-FG >= 0.70";
  return v;
}

Verdict ablation_smoke(Env& env) {
  Verdict v;
  const fs::path data = env.work / "smoke_data";
  if (cli_call(env, {"gen-data", "--seed", "8", "--count", "320", "--out", data.string()}) != 0)
    return {false, "gen-data failed"};
  struct Mode {
    std::string name;
    std::vector<std::string> flags;
    std::vector<std::string> zero_columns;
  };
  const std::vector<Mode> modes = {
      {"w/o obj. ent.", {"ablation.no_object_entropy=true"}, {"loss_object", "lambda_object"}},
      {"w/o pixel ent.", {"ablation.no_pixel_entropy=true"}, {"loss_pixel", "lambda_pixel"}},
      {"w/o any ent.",
       {"ablation.no_object_entropy=true", "ablation.no_pixel_entropy=true"},
       {"loss_object", "lambda_object", "loss_pixel", "lambda_pixel"}},
      {"w/o masking", {"ablation.no_masking=true"}, {"mask_ratio"}},
  };
  std::ostringstream os;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto& m = modes[i];
    const fs::path out = env.work / ("smoke_" + std::to_string(i));
    std::vector<std::string> args = {"train", "--override", "preset=desk", "--override", "train.stop_after=5",
                                     "--data", data.string(), "--out", out.string()};
    for (const auto& f : m.flags) {
      args.push_back("--override");
      args.push_back(f);
    }
    bool ok = cli_call(env, args) == 0 && !fs::exists(out / "abort.ckpt");
    const auto rows = read_csv(out / "metrics.csv");
    ok = ok && rows.size() == 6;
    if (ok) {
      for (const auto& col : m.zero_columns) {
        const auto it = std::find(rows[0].begin(), rows[0].end(), col);
        const auto c = static_cast<std::size_t>(it - rows[0].begin());
        for (std::size_t r = 1; r < rows.size(); ++r) ok = ok && c < rows[r].size() && rows[r][c] == "0";
      }
      for (std::size_t r = 1; r < rows.size(); ++r)
        ok = ok && std::isfinite(std::stod(rows[r][1]));
    }
    v.pass = v.pass && ok;
    os << m.name << (ok ? " ok" : " FAILED") << (i + 1 < modes.size() ? "; " : "");
  }
  v.detail = "5 epochs each: " + os.str();
  return v;
}

Verdict determinism_resume(Env& env) {
  Verdict v;
  const auto full = desk_run(env, 0);
  const auto data = desk_data(env);
  const fs::path part = env.work / "desk_resume";
  if (cli_call(env, {"train", "--override", "preset=desk", "--override", "train.eval_every=0", "--override",
                     "train.stop_after=20", "--seed", "0", "--data", data.string(), "--out", part.string()}) != 0)
    return {false, "interrupted run failed"};
  if (cli_call(env, {"train", "--override", "preset=desk", "--override", "train.eval_every=0", "--seed", "0",
                     "--data", data.string(), "--out", part.string(), "--resume",
                     (part / "checkpoint.ckpt").string()}) != 0)
    return {false, "resumed run failed"};
  const auto a = read_csv(full.dir / "metrics.csv");
  const auto b = read_csv(part / "metrics.csv");
  std::size_t same = 0, compared = 0;
  for (std::size_t r = 21; r < std::max(a.size(), b.size()); ++r) {
    ++compared;
    same += r < a.size() && r < b.size() && a[r] == b[r];
  }
  std::string json_a, json_b;
  cli_call(env, {"eval", "--checkpoint", (full.dir / "checkpoint.ckpt").string()}, &json_a);
  cli_call(env, {"eval", "--checkpoint", (part / "checkpoint.ckpt").string()}, &json_b);
  const bool json_same = !json_a.empty() && json_a == json_b;
  v.pass = a.size() == 45 && b.size() == 45 && same == compared && compared == 24 && json_same;
  v.detail = "resumed at epoch 20: " + std::to_string(same) + "/" + std::to_string(compared) +
             " later log rows identical; metrics JSON " + (json_same ? "identical" : "differs") + " (" +
             json_a.substr(0, json_a.find('\n')) + ")";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ocmae acceptance suite", "ocmae_acceptance"};
  std::vector<int> only;
  std::string work;
  Env env;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--work", work, "working directory, kept afterwards (default: a temporary one)");
  app.add_flag("--verbose", env.verbose, "show training progress");
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<testing::TempDir> temp;
  if (work.empty()) {
    temp = std::make_unique<testing::TempDir>("acceptance");
    env.work = temp->path();
  } else {
    env.work = fs::absolute(work);
    fs::create_directories(env.work);
  }

  const std::vector<std::pair<std::string, std::function<Verdict(Env&)>>> criteria = {
      {"gradient correctness", gradients},
      {"mixture invariants", mixture_invariants},
      {"slot permutation equivariance", permutation_equivariance},
      {"entropy bounds", entropy_bounds},
      {"schedule conformance", schedules},
      {"metric oracles", metric_oracles},
      {"desk-scale training", desk_training},
      {"ablation smoke", ablation_smoke},
      {"determinism and resume", determinism_resume},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second(env);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
