#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sarw/autograd.hpp"
#include "sarw/mixing.hpp"
#include "sarw/tensor.hpp"

namespace sarw {

/// Hierarchical encoder + decoder + head dimensions. The paper preset is the
/// full-size configuration; the desk preset keeps the same topology at
/// laptop-trainable width.
struct ModelConfig {
  int input_size = 128;
  int in_channels = 2;
  int patch_size = 4;
  std::array<int, 4> stage_channels{16, 32, 64, 128};
  std::array<int, 4> stage_heads{2, 2, 2, 2};
  std::array<int, 4> stage_depths{1, 1, 2, 1};
  std::array<int, 4> window_sizes{8, 8, 8, 4};
  int decoder_depth = 2;
  int decoder_dim = 64;
  int decoder_heads = 4;
  int mask_unit = 32;
  int label_count = 43;

  static ModelConfig desk();
  static ModelConfig paper();
  static ModelConfig tiny();  // gradient-check scale: input 64, C=(8,16,32,64)

  void validate() const;

  int final_stride() const { return patch_size * 8; }
  int stage_stride(int stage) const { return patch_size << stage; }  // stage 0..3
  int stage_grid(int stage) const { return input_size / stage_stride(stage); }
  int mask_grid() const { return input_size / mask_unit; }
  /// Window size actually used at a stage (capped by the token grid).
  int effective_window(int stage) const;

  /// Canonical key=value serialization; feeds the checkpoint fingerprint.
  std::string canonical_string() const;
};

template <typename T>
struct Param {
  std::string name;
  nn::Var<T> var;
  bool decay = false;  // weight matrices only; norms/biases/embeddings exempt
};

/// Named float32 tensor as stored in checkpoint files.
struct NamedBlob {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

enum class ModelTask { kPretrain, kClassify, kFlood };

const char* task_name(ModelTask task);

/// Swin-style windowed-attention encoder with patch merging, plus (per task)
/// either the dual-reconstruction decoder or a pooled linear head.
///
/// Window attention alternates between aligned and shifted windows
/// (shift = window/2, skipped when the window covers the whole grid) and
/// adds a per-window relative position bias. During pretraining each token
/// additionally carries mix provenance, and attention is restricted to
/// tokens of the same source image; with no mix mask this reduces to plain
/// window attention, which is the fine-tuning/inference path.
template <typename T>
class SwinModel {
 public:
  SwinModel(const ModelConfig& cfg, ModelTask task, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ModelTask task() const { return task_; }

  struct EncodeResult {
    nn::Var<T> final_tokens;                // [B, g4, g4, c4], layer-normed
    std::vector<nn::Var<T>> stage_tokens;   // per-stage outputs before merging
  };

  /// images: [B, in_channels, S, S]; masks: one mix mask per batch element
  /// (nullptr for downstream inference).
  EncodeResult encode(const Tensor<T>& images, const std::vector<MixMask>* masks);

  /// Patch embedding alone: [B, in_channels, S, S] -> [B, g1, g1, c1].
  nn::Var<T> patch_embed(const Tensor<T>& images);

  /// Dual reconstruction: unmixes final tokens by provenance, substitutes a
  /// learned placeholder for the counterpart's positions, and decodes each
  /// set to per-token pixel predictions.
  /// Returns (prediction for source A, prediction for source B), each in
  /// token layout [B, g4*g4, in_channels * mask_unit^2].
  std::pair<nn::Var<T>, nn::Var<T>> decode_dual(const nn::Var<T>& final_tokens,
                                                const std::vector<MixMask>& masks);

  /// Global-average-pooled features [B, c4] from normed final tokens.
  nn::Var<T> pool(const nn::Var<T>& final_tokens);

  /// Multi-label logits [B, label_count].
  nn::Var<T> classify(const nn::Var<T>& final_tokens);

  /// Binary logits [1, 2] from a pooled per-tile feature difference.
  nn::Var<T> flood_head(const nn::Var<T>& pooled_difference);

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  void zero_grads();

  std::vector<NamedBlob> export_blobs() const;
  /// Strict by-name import; every model parameter must be present with a
  /// matching shape. With `encoder_only`, only embed/enc parameters are
  /// loaded (all of them must match); remaining parameters keep their init.
  void import_blobs(const std::vector<NamedBlob>& blobs, bool encoder_only = false);

  size_t parameter_count() const;

 private:
  struct BlockParams {
    nn::Var<T> norm1_g, norm1_b, qkv_w, qkv_b, proj_w, proj_b;
    nn::Var<T> relpos;  // encoder blocks only
    nn::Var<T> norm2_g, norm2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  nn::Var<T> register_param(const std::string& name, std::vector<int> shape, bool decay,
                            double init_std);
  nn::Var<T> register_ones(const std::string& name, int n);
  nn::Var<T> register_zeros(const std::string& name, std::vector<int> shape, bool decay = false);
  BlockParams make_block(const std::string& prefix, int channels, int heads, int window,
                         bool relpos);

  nn::Var<T> run_block(const BlockParams& p, nn::Var<T> tokens, int grid, int heads, int window,
                       int shift, const std::vector<Grid<uint8_t>>* provenance, int batch);
  nn::Var<T> attention(const BlockParams& p, const nn::Var<T>& windows, int heads, int window,
                       std::shared_ptr<Tensor<T>> attn_mask);

  std::shared_ptr<std::vector<int>> relpos_index(int window);

  ModelConfig cfg_;
  ModelTask task_;
  Rng init_rng_;
  std::vector<Param<T>> params_;

  // encoder parameters
  nn::Var<T> embed_w_, embed_b_, embed_norm_g_, embed_norm_b_, pos_embed_;
  std::array<std::vector<BlockParams>, 4> stages_;
  struct MergeParams {
    nn::Var<T> norm_g, norm_b, red_w;
  };
  std::array<MergeParams, 3> merges_;
  nn::Var<T> enc_norm_g_, enc_norm_b_;

  // decoder parameters (pretrain task)
  nn::Var<T> dec_embed_w_, dec_embed_b_, dec_mask_token_, dec_pos_;
  std::vector<BlockParams> dec_blocks_;
  nn::Var<T> dec_norm_g_, dec_norm_b_, dec_out_w_, dec_out_b_;

  // heads
  nn::Var<T> head_w_, head_b_;

  // cached index maps, keyed by the parameters that define them
  std::map<std::string, std::shared_ptr<std::vector<int>>> index_cache_;
  std::map<int, std::shared_ptr<std::vector<int>>> relpos_cache_;
};

/// Token-layout <-> image-layout conversion for decoder predictions.
/// Token t = (ty * g4 + tx) stores channel-major mask_unit x mask_unit
/// pixels: slot c*u^2 + dy*u + dx.
std::shared_ptr<std::vector<int>> token_to_image_index(const ModelConfig& cfg, int batch);

template <typename T>
Tensor<T> assemble_prediction(const Tensor<T>& token_pred, const ModelConfig& cfg);

template <typename T>
Tensor<T> image_to_tokens(const Tensor<T>& image, const ModelConfig& cfg);

/// Packs a batch of standardized patches into [B, 2, S, S].
template <typename T>
Tensor<T> pack_images(const std::vector<const StandardizedPatch*>& batch);

/// Full flood-pair forward: both images are split into input_size tiles,
/// encoded, pooled per tile; the mean over tile feature differences feeds the
/// binary head. Images must be square with side k * input_size, k >= 1.
template <typename T>
nn::Var<T> flood_pair_logits(SwinModel<T>& model, const StandardizedPatch& reference,
                             const StandardizedPatch& query);

/// Pooled per-tile features [tiles, c4] of one (possibly multi-tile) image;
/// used to cache encoder outputs for head-only fine-tuning.
template <typename T>
Tensor<T> tile_features(SwinModel<T>& model, const StandardizedPatch& image);

extern template class SwinModel<float>;
extern template class SwinModel<double>;

}  // namespace sarw
