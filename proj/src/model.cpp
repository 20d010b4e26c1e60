#include "ocmae/model.hpp"

#include <cmath>
#include <string>

#include "ocmae/errors.hpp"
#include "ocmae/ops.hpp"

namespace ocmae {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model config: " + what);
  };
  require(slots >= 2, "model.slots must be at least 2");
  require(enc_dim > 0 && dec_dim > 0, "embed dims must be positive");
  require(enc_depth >= 1 && dec_depth >= 1, "depths must be at least 1");
  require(enc_heads >= 1 && enc_dim % enc_heads == 0, "model.enc_dim must be divisible by model.enc_heads");
  require(dec_heads >= 1 && dec_dim % dec_heads == 0, "model.dec_dim must be divisible by model.dec_heads");
  require(enc_dim % 2 == 0 && dec_dim % 2 == 0, "embed dims must be even for sine-cosine positions");
  require(patch >= 1 && height % patch == 0 && width % patch == 0,
          "image " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible by patch " +
              std::to_string(patch));
  require(channels >= 1, "model.channels must be positive");
  require(mlp_ratio >= 1, "model.mlp_ratio must be positive");
  require(class_token_init_std > 0.0, "model.class_token_init_std must be positive");
  require(class_token_noise_std >= 0.0, "model.class_token_noise_std must be non-negative");
  require(epsilon >= 0.0 && log_epsilon > 0.0, "epsilons must be positive");
}

template <class T>
SlotState<T> object_function(const Tensor<T>& cls, const Tensor<T>& patches, double epsilon) {
  if (cls.rank() != 3 || patches.rank() != 3 || cls.size(0) != patches.size(0) || cls.size(2) != patches.size(2))
    throw ConfigError("object function: class tokens " + shape_str(cls.shape()) + " vs patches " +
                      shape_str(patches.shape()));
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(cls.size(2)));
  auto logits = ops::scale(ops::matmul(patches, ops::transpose(cls, 1, 2)), inv_sqrt_d);
  SlotState<T> state;
  state.attn = ops::softmax(logits, -1);
  auto mass = ops::add_scalar(ops::sum(state.attn, 1, true), static_cast<T>(epsilon));
  state.weights = ops::div(state.attn, mass);
  state.slots = ops::matmul(ops::transpose(state.weights, 1, 2), patches);
  return state;
}

template <class T>
DecodedScene<T> compose_scene(const Tensor<T>& per_slot_rgb, const Tensor<T>& alpha_logits) {
  if (per_slot_rgb.rank() != 5 || alpha_logits.rank() != 4 ||
      Shape(per_slot_rgb.shape().begin(), per_slot_rgb.shape().end() - 1) != alpha_logits.shape())
    throw ConfigError("compose: rgb " + shape_str(per_slot_rgb.shape()) + " vs alpha " +
                      shape_str(alpha_logits.shape()));
  DecodedScene<T> scene;
  scene.per_slot_rgb = per_slot_rgb;
  scene.alpha_logits = alpha_logits;
  scene.masks = ops::softmax(alpha_logits, 1);
  Shape mask_shape = alpha_logits.shape();
  mask_shape.push_back(1);
  scene.composed = ops::sum(ops::mul(ops::reshape(scene.masks, mask_shape), per_slot_rgb), 1);
  return scene;
}

template <class T>
Tensor<T> init_class_tokens(std::int64_t slots, std::int64_t dim, double stddev, Rng& rng) {
  if (!(stddev > 0.0)) throw ConfigError("class token init std must be positive");
  return nn::normal_tensor<T>({slots, dim}, stddev, rng);
}

template <class T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const auto& c = config_;
  patch_embed = nn::Linear<T>(params_, "patch_embed", c.patch_dim(), c.enc_dim, rng);
  class_tokens = params_.add("class_tokens", init_class_tokens<T>(c.slots, c.enc_dim, c.class_token_init_std, rng), false);
  const nn::BlockConfig enc{c.enc_dim, c.enc_heads, c.mlp_ratio};
  for (std::int64_t i = 0; i < c.enc_depth; ++i)
    encoder_blocks.emplace_back(params_, "encoder.blocks." + std::to_string(i), enc, rng);
  encoder_norm = nn::LayerNorm<T>(params_, "encoder.norm", c.enc_dim);
  slot_embed = nn::Linear<T>(params_, "decoder.embed", c.enc_dim + 1, c.dec_dim, rng);
  mask_token = params_.add("mask_token", nn::normal_tensor<T>({c.dec_dim}, 0.02, rng), false);
  const nn::BlockConfig dec{c.dec_dim, c.dec_heads, c.mlp_ratio};
  for (std::int64_t i = 0; i < c.dec_depth; ++i)
    decoder_blocks.emplace_back(params_, "decoder.blocks." + std::to_string(i), dec, rng);
  decoder_norm = nn::LayerNorm<T>(params_, "decoder.norm", c.dec_dim);
  head = nn::Linear<T>(params_, "decoder.head", c.dec_dim, c.patch * c.patch * (c.channels + 1), rng);
  encoder_pos_ = positional_encoding<T>(c.grid_h(), c.grid_w(), c.enc_dim);
  decoder_pos_ = positional_encoding<T>(c.grid_h(), c.grid_w(), c.dec_dim);
}

template <class T>
Tensor<T> Model<T>::embed(const Tensor<T>& images) const {
  const auto& c = config_;
  if (images.rank() != 4 || images.size(1) != c.height || images.size(2) != c.width || images.size(3) != c.channels)
    throw ConfigError("model expects images [B, " + std::to_string(c.height) + ", " + std::to_string(c.width) + ", " +
                      std::to_string(c.channels) + "], got " + shape_str(images.shape()));
  return ops::add(patch_embed(patchify(images, c.patch)), encoder_pos_);
}

template <class T>
EncodedTokens<T> Model<T>::encode(const PatchState<T>& state, const Tensor<T>& class_token_noise) const {
  const auto& c = config_;
  const Tensor<T>& tokens = state.tokens_unmasked;
  if (tokens.rank() != 3 || tokens.size(2) != c.enc_dim)
    throw ConfigError("encode: expected [B, N, " + std::to_string(c.enc_dim) + "] tokens, got " +
                      shape_str(tokens.shape()));
  const std::int64_t b = tokens.size(0), n = tokens.size(1);
  auto cls = ops::broadcast_to(ops::reshape(class_tokens, {1, c.slots, c.enc_dim}), {b, c.slots, c.enc_dim});
  if (class_token_noise.defined()) cls = ops::add(cls, class_token_noise);
  auto x = ops::concat<T>({cls, tokens}, 1);
  for (const auto& block : encoder_blocks) x = block(x);
  x = encoder_norm(x);
  return {ops::slice(x, 1, 0, c.slots), ops::slice(x, 1, c.slots, c.slots + n)};
}

template <class T>
Tensor<T> Model<T>::broadcast(const SlotState<T>& slot_state, const MaskDraw& draw) const {
  const auto& c = config_;
  const std::int64_t b = slot_state.slots.size(0);
  const std::int64_t k = c.slots;
  const std::int64_t nu = draw.n_unmasked;
  if (slot_state.attn.size(1) != nu || draw.batch() != b)
    throw ConfigError("broadcast: attention " + shape_str(slot_state.attn.shape()) + " does not match the mask draw");
  auto repeated = ops::broadcast_to(ops::reshape(slot_state.slots, {b, k, 1, c.enc_dim}), {b, k, nu, c.enc_dim});
  auto log_attn = ops::log(ops::add_scalar(slot_state.attn, static_cast<T>(c.log_epsilon)));
  log_attn = ops::reshape(ops::transpose(log_attn, 1, 2), {b, k, nu, 1});
  auto seq = ops::reshape(slot_embed(ops::concat<T>({repeated, log_attn}, -1)), {b * k, nu, c.dec_dim});
  if (draw.n_masked() > 0) {
    auto fill = ops::broadcast_to(ops::reshape(mask_token, {1, 1, c.dec_dim}), {b * k, draw.n_masked(), c.dec_dim});
    seq = ops::concat<T>({seq, fill}, 1);
  }
  std::vector<std::vector<std::int64_t>> restore;
  restore.reserve(static_cast<std::size_t>(b * k));
  for (std::int64_t i = 0; i < b; ++i)
    for (std::int64_t j = 0; j < k; ++j) restore.push_back(draw.restore[static_cast<std::size_t>(i)]);
  return ops::add(ops::gather_rows(seq, restore), decoder_pos_);
}

template <class T>
DecodedScene<T> Model<T>::decode(const Tensor<T>& tokens, std::int64_t batch) const {
  const auto& c = config_;
  auto x = tokens;
  for (const auto& block : decoder_blocks) x = block(x);
  auto out = head(decoder_norm(x));  // [B*K, N, P*P*(C+1)]
  const std::int64_t rgb_width = c.patch * c.patch * c.channels;
  auto rgb = unpatchify(ops::slice(out, -1, 0, rgb_width), c.height, c.width, c.channels, c.patch);
  auto alpha = unpatchify(ops::slice(out, -1, rgb_width, rgb_width + c.patch * c.patch), c.height, c.width, 1, c.patch);
  return compose_scene(ops::reshape(rgb, {batch, c.slots, c.height, c.width, c.channels}),
                       ops::reshape(alpha, {batch, c.slots, c.height, c.width}));
}

template <class T>
ForwardResult<T> Model<T>::forward(const Tensor<T>& images, const MaskDraw& draw,
                                   const Tensor<T>& class_token_noise) const {
  ForwardResult<T> result;
  result.patches = apply_mask(embed(images), draw);
  result.encoded = encode(result.patches, class_token_noise);
  result.slot_state = object_function(result.encoded.cls, result.encoded.patches, config_.epsilon);
  result.scene = decode(broadcast(result.slot_state, result.patches.draw), images.size(0));
  return result;
}

template <class T>
Tensor<T> Model<T>::sample_class_token_noise(std::int64_t batch, Rng& rng) const {
  return nn::normal_tensor<T>({batch, config_.slots, config_.enc_dim}, config_.class_token_noise_std, rng);
}

#define OCMAE_INSTANTIATE(T)                                                                   \
  template SlotState<T> object_function<T>(const Tensor<T>&, const Tensor<T>&, double);        \
  template DecodedScene<T> compose_scene<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> init_class_tokens<T>(std::int64_t, std::int64_t, double, Rng&);           \
  template class Model<T>;

OCMAE_INSTANTIATE(float)
OCMAE_INSTANTIATE(double)
#undef OCMAE_INSTANTIATE

}  // namespace ocmae
