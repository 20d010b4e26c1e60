#include "ocmae/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ocmae/checkpoint.hpp"
#include "ocmae/config.hpp"
#include "ocmae/data.hpp"
#include "ocmae/errors.hpp"
#include "ocmae/trainer.hpp"
#include "ocmae/viz.hpp"

namespace ocmae::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string resume;
  std::int64_t count = 100;
  std::int64_t n = 8;
};

std::string absolute(const std::string& path) { return path.empty() ? path : fs::absolute(path).lexically_normal().string(); }

std::vector<Setting> gather(const Options& o) {
  std::vector<Setting> settings;
  if (!o.config.empty()) settings = read_settings_file(o.config);
  for (const auto& text : o.overrides) settings.push_back(parse_override(text));
  return settings;
}

void gen_data(const Options& o, std::ostream& out) {
  SceneSpec spec = scene_spec_from(gather(o));
  if (o.seed) spec.seed = *o.seed;
  if (o.out.empty()) throw ConfigError("gen-data needs --out");
  if (o.count < 0) throw ConfigError("--count must be non-negative");
  const auto dir = absolute(o.out);
  generate(spec, o.count, dir);
  out << "wrote " << o.count << " samples to " << dir << "\n";
}

RunConfig train_config(const Options& o) {
  RunConfig cfg = run_config_from(gather(o));
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.data.empty()) cfg.data_dir = o.data;
  cfg.out = absolute(cfg.out);
  cfg.data_dir = absolute(cfg.data_dir);
  cfg.validate();
  return cfg;
}

DatasetSplit load_data(const std::string& dir, double split) {
  if (dir.empty()) throw ConfigError("data.dir is not set (use --data or data.dir=...)");
  if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir + " does not exist");
  return load(dir, split);
}

void train(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = train_config(o);
  const auto data = load_data(cfg.data_dir, cfg.data_split);
  FitOptions fo;
  fo.resume_from = absolute(o.resume);
  fo.progress = &err;
  const auto result = fit(cfg, data, fo);
  out << (result.interrupted ? "stopped after epoch " : "finished epoch ") << result.epochs_completed << "; log "
      << (fs::path(cfg.out) / "metrics.csv").string() << "\n";
}

// Model and data settings for a checkpoint, with --config/--override checked
// against the stored model.
struct Loaded {
  RunConfig config;
  Model<float> model;
};

Loaded load_model(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto path = absolute(o.checkpoint);
  const Checkpoint ckpt = load_checkpoint(path);
  RunConfig stored = run_config_from(parse_settings(ckpt.config_text, path));
  RunConfig cfg = stored;
  if (!o.config.empty() || !o.overrides.empty()) {
    cfg = run_config_from(gather(o));
    if (!(cfg.model == stored.model))
      throw ConfigError("checkpoint model (model.slots=" + std::to_string(stored.model.slots) +
                        ") does not match the given configuration (model.slots=" + std::to_string(cfg.model.slots) +
                        ")");
    if (cfg.data_dir.empty()) cfg.data_dir = stored.data_dir;
  }
  if (!o.data.empty()) cfg.data_dir = absolute(o.data);
  Loaded loaded{cfg, Model<float>(stored.model, model_seed(stored.seed))};
  restore(ckpt, loaded.model, nullptr);
  return loaded;
}

void eval(const Options& o, std::ostream& out) {
  const auto loaded = load_model(o);
  const auto data = load_data(loaded.config.data_dir, loaded.config.data_split);
  const auto result = evaluate(loaded.model, data.eval, loaded.config.batch_size);
  nlohmann::ordered_json j;
  j["ari"] = result.scores.ari;
  j["ari_fg"] = result.scores.ari_fg;
  j["miou"] = result.scores.miou;
  j["n_images"] = result.n_images;
  const std::string text = j.dump() + "\n";
  out << text;
  if (!o.out.empty()) {
    const auto path = absolute(o.out);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text) || !f.flush()) throw DataError("cannot write " + path);
  }
}

void viz(const Options& o, std::ostream& out, std::ostream& err) {
  const auto loaded = load_model(o);
  const auto data = load_data(loaded.config.data_dir, loaded.config.data_split);
  const std::string dir = absolute(o.out.empty() ? std::string("viz") : o.out);
  const auto paths = viz::write_grids(loaded.model, data.eval.size() > 0 ? data.eval : data.train, o.n, dir, &err);
  out << "wrote " << paths.size() << " grids to " << dir << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Object-centric masked autoencoder: data generation, training, evaluation and visualization", "ocmae"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key=value settings file");
    sub->add_option("--override", o.overrides, "key=value setting applied after --config (repeatable)");
    sub->add_option("--seed", seed, "random seed");
  };
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  common(gen);
  gen->add_option("--count", o.count, "number of scenes");
  gen->add_option("--out", o.out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  common(tr);
  tr->add_option("--out", o.out, "run directory (train.out)");
  tr->add_option("--data", o.data, "dataset directory (data.dir)");
  tr->add_option("--resume", o.resume, "checkpoint to resume from");

  auto* ev = app.add_subcommand("eval", "score a checkpoint on the eval split");
  common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  ev->add_option("--data", o.data, "dataset directory");
  ev->add_option("--out", o.out, "also write the JSON here");

  auto* vz = app.add_subcommand("viz", "render reconstruction grids");
  common(vz);
  vz->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  vz->add_option("--data", o.data, "dataset directory");
  vz->add_option("--n", o.n, "number of images");
  vz->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfigError;
  }
  for (auto* sub : {gen, tr, ev, vz})
    if (sub->count("--seed")) o.seed = seed;

  try {
    if (*gen) gen_data(o, out);
    else if (*tr) train(o, out, err);
    else if (*ev) eval(o, out);
    else if (*vz) viz(o, out, err);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace ocmae::cli
