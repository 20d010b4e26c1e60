#include "ocmae/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ocmae/errors.hpp"

namespace ocmae {

namespace {

constexpr char kMagic[8] = {'O', 'C', 'M', 'A', 'E', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <class V>
  void put(V v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_string32(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}
  template <class V>
  V get() {
    V v{};
    read(&v, sizeof v);
    return v;
  }
  std::string get_string(std::uint64_t n) {
    if (n > (1u << 30)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(void* dst, std::uint64_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& why) { throw DataError(path_ + ": " + why); }

 private:
  std::ifstream& in_;
  std::string path_;
};

Checkpoint::Entry entry(const std::string& name, const Shape& shape, const std::vector<float>& values) {
  return {name, shape, values};
}

}  // namespace

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : tensors)
    if (e.name == name) return &e;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path);
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.put(kVersion);
    w.put(static_cast<std::uint64_t>(ckpt.config_text.size()));
    out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
    w.put(ckpt.epoch);
    w.put(ckpt.step);
    w.put(ckpt.seed);
    w.put(ckpt.optimizer_steps);
    w.put(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
      if (shape_numel(t.shape) != static_cast<std::int64_t>(t.values.size()))
        throw ConfigError("checkpoint tensor " + t.name + " has inconsistent size");
      w.put_string32(t.name);
      w.put(static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) w.put(static_cast<std::int64_t>(d));
      out.write(reinterpret_cast<const char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    }
    if (!out.flush()) throw DataError("failed writing checkpoint " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move checkpoint into place at " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  Reader r(in, path);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("not a checkpoint file");
  if (r.get<std::uint32_t>() != kVersion) r.fail("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config_text = r.get_string(r.get<std::uint64_t>());
  ckpt.epoch = r.get<std::int64_t>();
  ckpt.step = r.get<std::int64_t>();
  ckpt.seed = r.get<std::uint64_t>();
  ckpt.optimizer_steps = r.get<std::int64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Checkpoint::Entry e;
    e.name = r.get_string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("tensor " + e.name + " has implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto extent = r.get<std::int64_t>();
      if (extent < 0 || extent > (1ll << 32)) r.fail("tensor " + e.name + " has an invalid extent");
      e.shape.push_back(extent);
    }
    e.values.resize(static_cast<std::size_t>(shape_numel(e.shape)));
    r.read(e.values.data(), e.values.size() * sizeof(float));
    ckpt.tensors.push_back(std::move(e));
  }
  return ckpt;
}

Checkpoint capture(const Model<float>& model, const AdamW<float>* optimizer) {
  Checkpoint ckpt;
  const auto& items = model.parameters().items();
  for (const auto& p : items)
    ckpt.tensors.push_back(entry(p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}));
  if (optimizer) {
    ckpt.optimizer_steps = optimizer->step_count();
    for (std::size_t i = 0; i < items.size(); ++i)
      ckpt.tensors.push_back(entry("adam.m/" + items[i].name, items[i].tensor.shape(), optimizer->first_moments()[i]));
    for (std::size_t i = 0; i < items.size(); ++i)
      ckpt.tensors.push_back(entry("adam.v/" + items[i].name, items[i].tensor.shape(), optimizer->second_moments()[i]));
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, Model<float>& model, AdamW<float>* optimizer) {
  auto lookup = [&](const std::string& name, const Shape& shape) -> const Checkpoint::Entry& {
    const auto* e = ckpt.find(name);
    if (!e) throw ConfigError("checkpoint has no tensor '" + name + "'");
    if (e->shape != shape)
      throw ConfigError("checkpoint tensor '" + name + "' has shape " + shape_str(e->shape) +
                        " but the model expects " + shape_str(shape));
    return *e;
  };
  const auto& items = model.parameters().items();
  // Validate everything before touching the model.
  for (const auto& p : items) lookup(p.name, p.tensor.shape());
  if (optimizer)
    for (const auto& p : items) {
      lookup("adam.m/" + p.name, p.tensor.shape());
      lookup("adam.v/" + p.name, p.tensor.shape());
    }
  for (const auto& p : items) {
    const auto& e = lookup(p.name, p.tensor.shape());
    Tensor<float> t = p.tensor;
    std::copy(e.values.begin(), e.values.end(), t.mutable_values().begin());
  }
  if (optimizer) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      optimizer->first_moments()[i] = lookup("adam.m/" + items[i].name, items[i].tensor.shape()).values;
      optimizer->second_moments()[i] = lookup("adam.v/" + items[i].name, items[i].tensor.shape()).values;
    }
    optimizer->set_step_count(ckpt.optimizer_steps);
  }
}

}  // namespace ocmae
