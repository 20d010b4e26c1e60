#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocmae/nn.hpp"
#include "ocmae/patch.hpp"
#include "ocmae/rng.hpp"
#include "ocmae/tensor.hpp"

namespace ocmae {

struct ModelConfig {
  std::int64_t slots = 4;  // K: class tokens, one per object plus background
  std::int64_t enc_dim = 192;
  std::int64_t dec_dim = 128;
  std::int64_t enc_depth = 4;
  std::int64_t dec_depth = 2;
  std::int64_t enc_heads = 4;
  std::int64_t dec_heads = 4;
  std::int64_t patch = 5;
  std::int64_t height = 35;
  std::int64_t width = 35;
  std::int64_t channels = 3;
  std::int64_t mlp_ratio = 4;
  double class_token_init_std = 0.002;
  double class_token_noise_std = 0.0;
  // Added to the attention column sums before normalizing the pooling weights.
  double epsilon = 1e-8;
  // Added to attention values before taking the log passed to the decoder.
  double log_epsilon = 1e-12;

  void validate() const;
  std::int64_t grid_h() const { return height / patch; }
  std::int64_t grid_w() const { return width / patch; }
  std::int64_t num_patches() const { return grid_h() * grid_w(); }
  std::int64_t patch_dim() const { return patch * patch * channels; }

  bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct EncodedTokens {
  Tensor<T> cls;      // C: [B, K, D_enc]
  Tensor<T> patches;  // Z: [B, N_unmasked, D_enc]
};

template <class T>
struct SlotState {
  Tensor<T> slots;    // s: [B, K, D_enc]
  Tensor<T> attn;     // A: [B, N_unmasked, K], rows sum to 1
  Tensor<T> weights;  // w: [B, N_unmasked, K], columns sum to ~1
};

template <class T>
struct DecodedScene {
  Tensor<T> per_slot_rgb;  // [B, K, H, W, C]
  Tensor<T> alpha_logits;  // [B, K, H, W]
  Tensor<T> masks;         // softmax of alpha_logits over K
  Tensor<T> composed;      // [B, H, W, C]
};

template <class T>
struct ForwardResult {
  PatchState<T> patches;
  EncodedTokens<T> encoded;
  SlotState<T> slot_state;
  DecodedScene<T> scene;
};

// Dot-product slot extraction: A = softmax_K(Z C^T / sqrt(D)),
// w_ik = a_ik / (sum_i a_ik + epsilon), s_k = sum_i w_ik z_i.
template <class T>
SlotState<T> object_function(const Tensor<T>& cls, const Tensor<T>& patches, double epsilon);

// Normalizes alpha logits over the slot axis and mixes the per-slot images.
template <class T>
DecodedScene<T> compose_scene(const Tensor<T>& per_slot_rgb, const Tensor<T>& alpha_logits);

template <class T>
Tensor<T> init_class_tokens(std::int64_t slots, std::int64_t dim, double stddev, Rng& rng);

template <class T>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  // Copies would alias the same parameter storage.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  nn::ParameterList<T>& parameters() { return params_; }
  const nn::ParameterList<T>& parameters() const { return params_; }

  // [B, H, W, C] -> patch tokens with encoder positional codes, [B, N, D_enc].
  Tensor<T> embed(const Tensor<T>& images) const;

  // Runs the encoder over [class tokens; unmasked patches]. `class_token_noise`
  // ([B, K, D_enc]) is added to the class tokens when defined.
  EncodedTokens<T> encode(const PatchState<T>& state, const Tensor<T>& class_token_noise) const;

  // Decoder input for every slot: [B*K, N, D_dec], in original patch order.
  Tensor<T> broadcast(const SlotState<T>& slot_state, const MaskDraw& draw) const;

  DecodedScene<T> decode(const Tensor<T>& tokens, std::int64_t batch) const;

  ForwardResult<T> forward(const Tensor<T>& images, const MaskDraw& draw, const Tensor<T>& class_token_noise) const;

  // N(0, class_token_noise_std^2) entries of shape [B, K, D_enc].
  Tensor<T> sample_class_token_noise(std::int64_t batch, Rng& rng) const;

  Tensor<T> class_tokens;  // [K, D_enc]
  Tensor<T> mask_token;    // [D_dec]
  nn::Linear<T> patch_embed;
  std::vector<nn::TransformerBlock<T>> encoder_blocks;
  nn::LayerNorm<T> encoder_norm;
  nn::Linear<T> slot_embed;  // [D_enc + 1, D_dec]
  std::vector<nn::TransformerBlock<T>> decoder_blocks;
  nn::LayerNorm<T> decoder_norm;
  nn::Linear<T> head;  // [D_dec, P*P*(C+1)]

 private:
  ModelConfig config_;
  nn::ParameterList<T> params_;
  Tensor<T> encoder_pos_;
  Tensor<T> decoder_pos_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ocmae
