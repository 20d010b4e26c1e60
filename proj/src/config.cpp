#include "ocmae/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ocmae/errors.hpp"

namespace ocmae {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const Setting& s, const char* expected) {
  throw ConfigError(s.origin + ": " + s.key + " expects " + expected + ", got '" + s.value + "'");
}

std::int64_t as_int(const Setting& s) {
  std::int64_t v = 0;
  const auto* end = s.value.data() + s.value.size();
  auto [ptr, ec] = std::from_chars(s.value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(s, "an integer");
  return v;
}

std::uint64_t as_uint(const Setting& s) {
  std::uint64_t v = 0;
  const auto* end = s.value.data() + s.value.size();
  auto [ptr, ec] = std::from_chars(s.value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(s, "a non-negative integer");
  return v;
}

double as_double(const Setting& s) {
  double v = 0;
  const auto* end = s.value.data() + s.value.size();
  auto [ptr, ec] = std::from_chars(s.value.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) bad_value(s, "a number");
  return v;
}

bool as_bool(const Setting& s) {
  if (s.value == "true" || s.value == "1" || s.value == "yes") return true;
  if (s.value == "false" || s.value == "0" || s.value == "no") return false;
  bad_value(s, "true or false");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(std::int64_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <class Target>
struct Field {
  const char* key;
  std::function<void(Target&, const Setting&)> set;
  std::function<std::string(const Target&)> get;
};

#define OCMAE_FIELD(Target, key, member, parse) \
  Field<Target> { key, [](Target& c, const Setting& s) { c.member = parse(s); }, [](const Target& c) { return fmt(c.member); } }

const std::vector<Field<RunConfig>>& run_fields() {
  static const std::vector<Field<RunConfig>> fields = {
      {"data.dir", [](RunConfig& c, const Setting& s) { c.data_dir = s.value; },
       [](const RunConfig& c) { return c.data_dir; }},
      OCMAE_FIELD(RunConfig, "data.split", data_split, as_double),
      OCMAE_FIELD(RunConfig, "model.slots", model.slots, as_int),
      OCMAE_FIELD(RunConfig, "model.enc_dim", model.enc_dim, as_int),
      OCMAE_FIELD(RunConfig, "model.dec_dim", model.dec_dim, as_int),
      OCMAE_FIELD(RunConfig, "model.enc_depth", model.enc_depth, as_int),
      OCMAE_FIELD(RunConfig, "model.dec_depth", model.dec_depth, as_int),
      OCMAE_FIELD(RunConfig, "model.enc_heads", model.enc_heads, as_int),
      OCMAE_FIELD(RunConfig, "model.dec_heads", model.dec_heads, as_int),
      OCMAE_FIELD(RunConfig, "model.patch", model.patch, as_int),
      OCMAE_FIELD(RunConfig, "model.height", model.height, as_int),
      OCMAE_FIELD(RunConfig, "model.width", model.width, as_int),
      OCMAE_FIELD(RunConfig, "model.channels", model.channels, as_int),
      OCMAE_FIELD(RunConfig, "model.mlp_ratio", model.mlp_ratio, as_int),
      OCMAE_FIELD(RunConfig, "model.class_token_init_std", model.class_token_init_std, as_double),
      OCMAE_FIELD(RunConfig, "model.class_token_noise_std", model.class_token_noise_std, as_double),
      OCMAE_FIELD(RunConfig, "model.epsilon", model.epsilon, as_double),
      OCMAE_FIELD(RunConfig, "model.log_epsilon", model.log_epsilon, as_double),
      OCMAE_FIELD(RunConfig, "schedule.warmup_epochs", schedule.warmup_epochs, as_double),
      OCMAE_FIELD(RunConfig, "schedule.total_epochs", schedule.total_epochs, as_double),
      OCMAE_FIELD(RunConfig, "schedule.cooldown_epochs", schedule.cooldown_epochs, as_double),
      OCMAE_FIELD(RunConfig, "schedule.mask_ratio_init", schedule.mask_ratio_init, as_double),
      OCMAE_FIELD(RunConfig, "schedule.lw_init_pixel", schedule.lw_init_pixel, as_double),
      OCMAE_FIELD(RunConfig, "schedule.lw_final_pixel", schedule.lw_final_pixel, as_double),
      OCMAE_FIELD(RunConfig, "schedule.lw_init_object", schedule.lw_init_object, as_double),
      OCMAE_FIELD(RunConfig, "schedule.lw_final_object", schedule.lw_final_object, as_double),
      OCMAE_FIELD(RunConfig, "schedule.lr_start", schedule.lr_start, as_double),
      OCMAE_FIELD(RunConfig, "schedule.lr_base", schedule.lr_base, as_double),
      OCMAE_FIELD(RunConfig, "schedule.lr_min", schedule.lr_min, as_double),
      OCMAE_FIELD(RunConfig, "train.batch_size", batch_size, as_int),
      OCMAE_FIELD(RunConfig, "train.seed", seed, as_uint),
      OCMAE_FIELD(RunConfig, "train.eval_every", eval_every, as_int),
      OCMAE_FIELD(RunConfig, "train.checkpoint_every", checkpoint_every, as_int),
      OCMAE_FIELD(RunConfig, "train.stop_after", stop_after, as_int),
      OCMAE_FIELD(RunConfig, "train.weight_decay", optim.weight_decay, as_double),
      OCMAE_FIELD(RunConfig, "train.beta1", optim.beta1, as_double),
      OCMAE_FIELD(RunConfig, "train.beta2", optim.beta2, as_double),
      OCMAE_FIELD(RunConfig, "train.eps", optim.eps, as_double),
      {"train.out", [](RunConfig& c, const Setting& s) { c.out = s.value; }, [](const RunConfig& c) { return c.out; }},
      OCMAE_FIELD(RunConfig, "ablation.no_object_entropy", ablation.no_object_entropy, as_bool),
      OCMAE_FIELD(RunConfig, "ablation.no_pixel_entropy", ablation.no_pixel_entropy, as_bool),
      OCMAE_FIELD(RunConfig, "ablation.no_masking", ablation.no_masking, as_bool),
      OCMAE_FIELD(RunConfig, "ablation.no_class_token_noise", ablation.no_class_token_noise, as_bool),
  };
  return fields;
}

std::string rgb_text(const Rgb& c) {
  return std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

Rgb parse_rgb(const Setting& s, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) bad_value(s, "r,g,b triples");
  Rgb c{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto v = as_int({s.key, parts[i], s.origin});
    if (v < 0 || v > 255) bad_value(s, "color components in [0, 255]");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

const std::vector<Field<SceneSpec>>& scene_fields() {
  static const std::vector<Field<SceneSpec>> fields = {
      OCMAE_FIELD(SceneSpec, "scene.height", height, as_int),
      OCMAE_FIELD(SceneSpec, "scene.width", width, as_int),
      {"scene.shapes",
       [](SceneSpec& c, const Setting& s) {
         c.shapes.clear();
         for (const auto& name : split(s.value, ',')) {
           try {
             c.shapes.push_back(parse_shape(name));
           } catch (const ConfigError&) {
             bad_value(s, "a comma list of square, circle, triangle, tetromino-L, tetromino-T, bar");
           }
         }
       },
       [](const SceneSpec& c) {
         std::string out;
         for (auto k : c.shapes) out += (out.empty() ? "" : ",") + std::string(shape_name(k));
         return out;
       }},
      OCMAE_FIELD(SceneSpec, "scene.min_objects", min_objects, as_int),
      OCMAE_FIELD(SceneSpec, "scene.max_objects", max_objects, as_int),
      OCMAE_FIELD(SceneSpec, "scene.min_size", min_size, as_int),
      OCMAE_FIELD(SceneSpec, "scene.max_size", max_size, as_int),
      {"scene.palette",
       [](SceneSpec& c, const Setting& s) {
         c.palette.clear();
         for (const auto& item : split(s.value, ';')) c.palette.push_back(parse_rgb(s, item));
       },
       [](const SceneSpec& c) {
         std::string out;
         for (const auto& rgb : c.palette) out += (out.empty() ? "" : ";") + rgb_text(rgb);
         return out;
       }},
      {"scene.background",
       [](SceneSpec& c, const Setting& s) {
         if (s.value == "gray-random")
           c.background.reset();
         else
           c.background = parse_rgb(s, s.value);
       },
       [](const SceneSpec& c) { return c.background ? rgb_text(*c.background) : std::string("gray-random"); }},
      OCMAE_FIELD(SceneSpec, "scene.allow_overlap", allow_overlap, as_bool),
      OCMAE_FIELD(SceneSpec, "scene.seed", seed, as_uint),
  };
  return fields;
}

#undef OCMAE_FIELD

template <class Target>
void apply(Target& target, const std::vector<Field<Target>>& fields, const Setting& s) {
  for (const auto& f : fields) {
    if (s.key == f.key) {
      f.set(target, s);
      return;
    }
  }
  throw ConfigError(s.origin + ": unknown key '" + s.key + "'");
}

bool integral(double v) { return std::floor(v) == v; }

}  // namespace

void RunConfig::validate() const {
  model.validate();
  schedule.validate();
  if (!integral(schedule.total_epochs) || !integral(schedule.cooldown_epochs))
    throw ConfigError("schedule.total_epochs and schedule.cooldown_epochs must be whole numbers");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (eval_every < 0) throw ConfigError("train.eval_every must be non-negative");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be non-negative");
  if (stop_after < -1) throw ConfigError("train.stop_after must be -1 or a non-negative epoch count");
  if (!(data_split >= 0 && data_split <= 1)) throw ConfigError("data.split must be in [0, 1]");
  if (!(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1))
    throw ConfigError("train.beta1 and train.beta2 must be in [0, 1)");
  if (!(optim.weight_decay >= 0)) throw ConfigError("train.weight_decay must be non-negative");
  if (!(optim.eps > 0)) throw ConfigError("train.eps must be positive");
}

std::int64_t RunConfig::total_epochs() const {
  return static_cast<std::int64_t>(schedule.total_epochs + schedule.cooldown_epochs);
}

std::string RunConfig::to_text() const {
  std::string out = "preset=" + preset + "\n";
  for (const auto& f : run_fields()) out += std::string(f.key) + "=" + f.get(*this) + "\n";
  return out;
}

std::vector<Setting> parse_settings(const std::string& text, const std::string& source) {
  std::vector<Setting> out;
  std::istringstream in(text);
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string origin = source + ":" + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected key=value, got '" + line + "'");
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin});
    if (out.back().key.empty()) throw ConfigError(origin + ": empty key");
  }
  return out;
}

std::vector<Setting> read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_settings(buf.str(), path);
}

Setting parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "' is not key=value");
  Setting s{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), "--override"};
  if (s.key.empty()) throw ConfigError("override '" + text + "' has an empty key");
  return s;
}

std::vector<std::string> preset_names() { return {"tetrominoes", "mdsprites", "clevr6", "clevrtex", "desk"}; }

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.batch_size = 128;
  auto& m = c.model;
  if (name == "tetrominoes") {
    m.height = m.width = 35;
    m.patch = 5;
    m.slots = 4;
    m.enc_dim = 192;
    m.enc_heads = 4;
    m.dec_dim = 128;
    m.dec_heads = 4;
    c.schedule.mask_ratio_init = 0.75;
  } else if (name == "mdsprites") {
    m.height = m.width = 64;
    m.patch = 8;
    m.slots = 6;
    m.enc_dim = 384;
    m.enc_heads = 8;
    m.dec_dim = 256;
    m.dec_heads = 8;
    c.schedule.mask_ratio_init = 0.5;
  } else if (name == "clevr6" || name == "clevrtex") {
    m.height = m.width = 128;
    m.patch = 16;
    m.slots = name == "clevr6" ? 7 : 11;
    m.enc_dim = 768;
    m.enc_heads = 16;
    m.dec_dim = 512;
    m.dec_heads = 16;
    c.schedule.mask_ratio_init = 0.75;
    if (name == "clevrtex") m.class_token_noise_std = 0.1;
  } else if (name == "desk") {
    m.height = m.width = 35;
    m.patch = 5;
    m.slots = 4;
    m.enc_dim = 64;
    m.enc_heads = 4;
    m.dec_dim = 32;
    m.dec_heads = 4;
    c.batch_size = 32;
    c.schedule.warmup_epochs = 4;
    c.schedule.total_epochs = 40;
    c.schedule.cooldown_epochs = 4;
    c.schedule.mask_ratio_init = 0.75;
    c.schedule.lr_base = 2e-2;
    m.class_token_noise_std = 0.3;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  m.enc_depth = 4;
  m.dec_depth = 2;
  return c;
}

RunConfig run_config_from(const std::vector<Setting>& settings) {
  std::string name = "desk";
  for (const auto& s : settings)
    if (s.key == "preset") name = s.value;
  RunConfig c;
  try {
    c = preset(name);
  } catch (const ConfigError&) {
    throw ConfigError("preset: unknown preset '" + name + "'");
  }
  for (const auto& s : settings)
    if (s.key != "preset") apply(c, run_fields(), s);
  return c;
}

SceneSpec scene_spec_from(const std::vector<Setting>& settings) {
  SceneSpec spec;
  for (const auto& s : settings) apply(spec, scene_fields(), s);
  return spec;
}

std::string to_text(const SceneSpec& spec) {
  std::string out;
  for (const auto& f : scene_fields()) out += std::string(f.key) + "=" + f.get(spec) + "\n";
  return out;
}

}  // namespace ocmae
