#include "ocmae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ocmae/errors.hpp"
#include "ocmae/ops.hpp"
#include "ocmae/patch.hpp"

namespace ocmae {

namespace {

enum StreamTag : std::uint64_t { kInitStream = 1, kShuffleStream = 2, kStepStream = 3 };

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw DataError("cannot write " + path);
}

// Keeps the header and the rows for epochs before `epochs_done`.
std::string truncated_log(const std::string& path, std::int64_t epochs_done) {
  std::string kept = std::string(kLogHeader) + "\n";
  std::ifstream in(path);
  if (!in) return kept;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto epoch = std::stoll(line.substr(0, line.find(',')));
    if (epoch < epochs_done) kept += line + "\n";
  }
  return kept;
}

}  // namespace

const char* const kLogHeader =
    "epoch,loss_total,loss_rec,loss_pixel,loss_object,lr,mask_ratio,lambda_pixel,lambda_object,ari,ari_fg,miou";

std::string format_log_row(const EpochLog& row) {
  std::string out = std::to_string(row.epoch);
  for (double v : {row.loss.total, row.loss.rec, row.loss.pixel, row.loss.object, row.lr, row.mask_ratio,
                   row.lambda_pixel, row.lambda_object})
    out += "," + number(v);
  if (row.scores)
    out += "," + number(row.scores->ari) + "," + number(row.scores->ari_fg) + "," + number(row.scores->miou);
  else
    out += ",,,";
  return out;
}

std::int64_t steps_per_epoch(std::int64_t n_train, std::int64_t batch_size) {
  return (n_train + batch_size - 1) / batch_size;
}

std::uint64_t model_seed(std::uint64_t run_seed) { return derive_seed(run_seed, {kInitStream}); }

ScheduleValues effective_schedule(const ScheduleValues& values, const Ablation& ablation) {
  ScheduleValues out = values;
  if (ablation.no_masking) out.mask_ratio = 0.0;
  if (ablation.no_pixel_entropy) out.weights.lambda_pixel = 0.0;
  if (ablation.no_object_entropy) out.weights.lambda_object = 0.0;
  return out;
}

StepResult train_step(Model<float>& model, AdamW<float>& optimizer, const Tensor<float>& images,
                      const StepSettings& settings, Rng& rng) {
  const ScheduleValues sv = effective_schedule(settings.schedule, settings.ablation);
  const std::int64_t batch = images.size(0);
  const MaskDraw draw = draw_mask(batch, model.config().num_patches(), sv.mask_ratio, rng);
  Tensor<float> noise;
  if (settings.class_token_noise && model.config().class_token_noise_std > 0)
    noise = model.sample_class_token_noise(batch, rng);
  const auto result = model.forward(images, draw, noise);
  const LossTerms terms{!settings.ablation.no_pixel_entropy, !settings.ablation.no_object_entropy};
  const auto losses = loss_total(result.scene.composed, images, result.scene.masks, sv.weights, terms);
  model.parameters().zero_grad();
  losses.total.backward();
  optimizer.step(model.parameters(), sv.lr);
  return {losses.total.item(), losses.rec.item(), losses.pixel.item(), losses.object.item()};
}

ForwardResult<float> infer(const Model<float>& model, const Tensor<float>& images) {
  NoGradGuard guard;
  return model.forward(images, full_view(images.size(0), model.config().num_patches()), Tensor<float>());
}

EvalResult evaluate(const Model<float>& model, const Dataset& data, std::int64_t batch_size) {
  EvalResult out;
  if (data.size() == 0) return out;
  if (data.height != model.config().height || data.width != model.config().width)
    throw ConfigError("dataset images are " + std::to_string(data.height) + "x" + std::to_string(data.width) +
                      " but the model expects " + std::to_string(model.config().height) + "x" +
                      std::to_string(model.config().width));
  std::vector<std::int64_t> order(static_cast<std::size_t>(data.size()));
  for (std::int64_t i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  const std::int64_t k = model.config().slots, pixels = data.pixels();
  metrics::Scores sum;
  for (const auto& idx : make_batches(order, batch_size)) {
    const auto result = infer(model, make_batch<float>(data, idx));
    const auto masks = result.scene.masks.values();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto pred = metrics::labeling_from_masks<float>(
          masks.subspan(b * static_cast<std::size_t>(k * pixels), static_cast<std::size_t>(k * pixels)), k, pixels);
      const std::uint8_t* m = data.mask(idx[b]);
      const metrics::Labeling truth(m, m + pixels);
      const auto s = metrics::score(pred, truth);
      sum.ari += s.ari;
      sum.ari_fg += s.ari_fg;
      sum.miou += s.miou;
    }
  }
  const double n = static_cast<double>(data.size());
  out.scores = {sum.ari / n, sum.ari_fg / n, sum.miou / n};
  out.n_images = data.size();
  return out;
}

FitResult fit(const RunConfig& config, const DatasetSplit& data, const FitOptions& options) {
  config.validate();
  const Dataset& train = data.train;
  if (train.size() == 0) throw DataError("training split of " + config.data_dir + " is empty");
  if (train.height != config.model.height || train.width != config.model.width)
    throw ConfigError("dataset images are " + std::to_string(train.height) + "x" + std::to_string(train.width) +
                      " but model.height x model.width is " + std::to_string(config.model.height) + "x" +
                      std::to_string(config.model.width));

  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec) throw DataError("cannot create output directory " + config.out + ": " + ec.message());
  const std::filesystem::path out_dir(config.out);
  const std::string log_path = (out_dir / "metrics.csv").string();
  const std::string ckpt_path = (out_dir / "checkpoint.ckpt").string();

  Model<float> model(config.model, model_seed(config.seed));
  AdamW<float> optimizer(model.parameters(), config.optim);
  std::int64_t start_epoch = 0;
  if (!options.resume_from.empty()) {
    const Checkpoint ckpt = load_checkpoint(options.resume_from);
    const RunConfig saved = run_config_from(parse_settings(ckpt.config_text, options.resume_from));
    if (!(saved.model == config.model))
      throw ConfigError("checkpoint " + options.resume_from + " was written for a different model configuration");
    if (ckpt.seed != config.seed)
      throw ConfigError("checkpoint " + options.resume_from + " was written with train.seed=" +
                        std::to_string(ckpt.seed));
    restore(ckpt, model, &optimizer);
    start_epoch = ckpt.epoch;
  }
  write_text((out_dir / "config.txt").string(), config.to_text());
  write_text(log_path, start_epoch > 0 ? truncated_log(log_path, start_epoch) : std::string(kLogHeader) + "\n");

  const std::int64_t steps = steps_per_epoch(train.size(), config.batch_size);
  const std::int64_t total = config.total_epochs();
  const std::int64_t stop = config.stop_after < 0 ? total : std::min(total, config.stop_after);
  FitResult result;
  result.epochs_completed = start_epoch;

  auto save = [&](const std::string& path, std::int64_t epochs_done, std::int64_t global_step) {
    Checkpoint ckpt = capture(model, &optimizer);
    ckpt.config_text = config.to_text();
    ckpt.epoch = epochs_done;
    ckpt.step = global_step;
    ckpt.seed = config.seed;
    save_checkpoint(path, ckpt);
  };

  for (std::int64_t epoch = start_epoch; epoch < stop; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(config.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    const auto batches = make_batches(shuffled_indices(train.size(), shuffle_rng), config.batch_size);

    EpochLog row;
    row.epoch = epoch;
    const auto sv0 = effective_schedule(schedule_at(static_cast<double>(epoch), config.schedule), config.ablation);
    row.lr = sv0.lr;
    row.mask_ratio = sv0.mask_ratio;
    row.lambda_pixel = sv0.weights.lambda_pixel;
    row.lambda_object = sv0.weights.lambda_object;

    for (std::int64_t s = 0; s < steps; ++s) {
      const double fractional = static_cast<double>(epoch) + static_cast<double>(s) / static_cast<double>(steps);
      StepSettings settings;
      settings.schedule = schedule_at(fractional, config.schedule);
      settings.ablation = config.ablation;
      settings.class_token_noise = !config.ablation.no_class_token_noise && fractional < config.schedule.warmup_epochs;
      Rng step_rng(derive_seed(config.seed, {kStepStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(s)}));
      const std::int64_t global_step = epoch * steps + s;
      StepResult r;
      try {
        r = train_step(model, optimizer, make_batch<float>(train, batches[static_cast<std::size_t>(s)]), settings,
                       step_rng);
      } catch (const NumericalError& e) {
        const std::string dump = (out_dir / "abort.ckpt").string();
        save(dump, epoch, global_step);
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(s) + " (step stream seed " + std::to_string(config.seed) + "/" +
                             std::to_string(epoch) + "/" + std::to_string(s) + "); state saved to " + dump);
      }
      row.loss.total += r.total;
      row.loss.rec += r.rec;
      row.loss.pixel += r.pixel;
      row.loss.object += r.object;
    }
    for (double* v : {&row.loss.total, &row.loss.rec, &row.loss.pixel, &row.loss.object})
      *v /= static_cast<double>(steps);

    const bool last = epoch + 1 == total;
    const bool eval_now =
        data.eval.size() > 0 && (last || (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0));
    if (eval_now) {
      const auto ev = evaluate(model, data.eval, config.batch_size);
      row.scores = ev.scores;
      if (last) result.final_eval = ev;
    }
    {
      std::ofstream log(log_path, std::ios::app | std::ios::binary);
      if (!log || !(log << format_log_row(row) << '\n')) throw DataError("cannot append to " + log_path);
    }
    result.log.push_back(row);
    result.epochs_completed = epoch + 1;
    const std::int64_t done_steps = (epoch + 1) * steps;
    if (last || epoch + 1 == stop || (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0))
      save(ckpt_path, epoch + 1, done_steps);

    if (options.progress) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      char buf[256];
      std::snprintf(buf, sizeof buf, "epoch %lld/%lld loss %.5f rec %.5f ratio %.3f lr %.2e", static_cast<long long>(epoch + 1),
                    static_cast<long long>(total), row.loss.total, row.loss.rec, row.mask_ratio, row.lr);
      *options.progress << buf;
      if (row.scores) {
        std::snprintf(buf, sizeof buf, " | ari %.4f ari_fg %.4f miou %.4f", row.scores->ari, row.scores->ari_fg,
                      row.scores->miou);
        *options.progress << buf;
      }
      std::snprintf(buf, sizeof buf, " (%.1fs)\n", secs);
      *options.progress << buf << std::flush;
    }
  }
  result.interrupted = result.epochs_completed < total;
  return result;
}

}  // namespace ocmae
