#include "sarw/model.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "sarw/error.hpp"

namespace sarw {

using nn::Var;

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig cfg;
  cfg.stage_channels = {128, 256, 512, 1024};
  cfg.stage_heads = {4, 8, 16, 32};
  cfg.stage_depths = {2, 2, 18, 2};
  cfg.window_sizes = {8, 8, 8, 4};
  cfg.decoder_depth = 8;
  cfg.decoder_dim = 512;
  cfg.decoder_heads = 16;
  return cfg;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.input_size = 64;
  cfg.stage_channels = {8, 16, 32, 64};
  cfg.stage_heads = {2, 2, 2, 2};
  cfg.decoder_dim = 16;
  cfg.decoder_heads = 2;
  cfg.label_count = 4;
  return cfg;
}

int ModelConfig::effective_window(int stage) const {
  return std::min(window_sizes[static_cast<size_t>(stage)], stage_grid(stage));
}

void ModelConfig::validate() const {
  if (patch_size != 4) throw ConfigError("model: patch_size must be 4 (stride sequence 4..32)");
  if (input_size < final_stride() || input_size % final_stride() != 0)
    throw ConfigError("model: input_size must be a positive multiple of " +
                      std::to_string(final_stride()));
  for (int s = 0; s < 4; ++s) {
    if (stage_channels[s] <= 0 || stage_heads[s] <= 0 || stage_depths[s] <= 0)
      throw ConfigError("model: stage dimensions must be positive");
    if (stage_channels[s] % stage_heads[s] != 0)
      throw ConfigError("model: stage " + std::to_string(s + 1) +
                        " channels not divisible by heads");
    const int w = effective_window(s);
    if (w <= 0 || stage_grid(s) % w != 0)
      throw ConfigError("model: stage " + std::to_string(s + 1) +
                        " token grid not divisible by window size");
  }
  if (mask_unit <= 0 || mask_unit % final_stride() != 0 || input_size % mask_unit != 0)
    throw ConfigError("model: mask_unit must be a multiple of the final token footprint and "
                      "divide input_size");
  if (decoder_depth <= 0 || decoder_dim <= 0 || decoder_heads <= 0 ||
      decoder_dim % decoder_heads != 0)
    throw ConfigError("model: bad decoder dimensions");
  if (in_channels <= 0 || label_count <= 0)
    throw ConfigError("model: channels and label_count must be positive");
}

std::string ModelConfig::canonical_string() const {
  std::ostringstream os;
  os << "input=" << input_size << ";in_ch=" << in_channels << ";patch=" << patch_size;
  os << ";C=" << stage_channels[0] << "," << stage_channels[1] << "," << stage_channels[2] << ","
     << stage_channels[3];
  os << ";H=" << stage_heads[0] << "," << stage_heads[1] << "," << stage_heads[2] << ","
     << stage_heads[3];
  os << ";B=" << stage_depths[0] << "," << stage_depths[1] << "," << stage_depths[2] << ","
     << stage_depths[3];
  os << ";W=" << window_sizes[0] << "," << window_sizes[1] << "," << window_sizes[2] << ","
     << window_sizes[3];
  os << ";dec=" << decoder_depth << "x" << decoder_dim << "h" << decoder_heads;
  os << ";unit=" << mask_unit << ";labels=" << label_count;
  return os.str();
}

const char* task_name(ModelTask task) {
  switch (task) {
    case ModelTask::kPretrain: return "pretrain";
    case ModelTask::kClassify: return "classify";
    case ModelTask::kFlood: return "flood";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Parameter registration
// ---------------------------------------------------------------------------

template <typename T>
Var<T> SwinModel<T>::register_param(const std::string& name, std::vector<int> shape, bool decay,
                                    double init_std) {
  Tensor<T> t(std::move(shape));
  for (auto& x : t.data) x = static_cast<T>(init_rng_.trunc_normal(init_std));
  auto var = nn::parameter(std::move(t));
  params_.push_back({name, var, decay});
  return var;
}

template <typename T>
Var<T> SwinModel<T>::register_ones(const std::string& name, int n) {
  auto var = nn::parameter(Tensor<T>::full({n}, T(1)));
  params_.push_back({name, var, false});
  return var;
}

template <typename T>
Var<T> SwinModel<T>::register_zeros(const std::string& name, std::vector<int> shape, bool decay) {
  auto var = nn::parameter(Tensor<T>(std::move(shape)));
  params_.push_back({name, var, decay});
  return var;
}

template <typename T>
typename SwinModel<T>::BlockParams SwinModel<T>::make_block(const std::string& prefix,
                                                            int channels, int heads, int window,
                                                            bool relpos) {
  BlockParams p;
  p.norm1_g = register_ones(prefix + "norm1.g", channels);
  p.norm1_b = register_zeros(prefix + "norm1.b", {channels});
  p.qkv_w = register_param(prefix + "attn.qkv.w", {channels, 3 * channels}, true, 0.02);
  p.qkv_b = register_zeros(prefix + "attn.qkv.b", {3 * channels});
  p.proj_w = register_param(prefix + "attn.proj.w", {channels, channels}, true, 0.02);
  p.proj_b = register_zeros(prefix + "attn.proj.b", {channels});
  if (relpos) {
    const int table = (2 * window - 1) * (2 * window - 1);
    p.relpos = register_param(prefix + "attn.relpos", {table, heads}, false, 0.02);
  }
  p.norm2_g = register_ones(prefix + "norm2.g", channels);
  p.norm2_b = register_zeros(prefix + "norm2.b", {channels});
  const int hidden = 4 * channels;
  p.fc1_w = register_param(prefix + "mlp.fc1.w", {channels, hidden}, true, 0.02);
  p.fc1_b = register_zeros(prefix + "mlp.fc1.b", {hidden});
  p.fc2_w = register_param(prefix + "mlp.fc2.w", {hidden, channels}, true, 0.02);
  p.fc2_b = register_zeros(prefix + "mlp.fc2.b", {channels});
  return p;
}

template <typename T>
SwinModel<T>::SwinModel(const ModelConfig& cfg, ModelTask task, uint64_t init_seed)
    : cfg_(cfg), task_(task), init_rng_(Rng::fork(init_seed, rng_stream::kInit, 0)) {
  cfg_.validate();

  const int patch_vec = cfg_.in_channels * cfg_.patch_size * cfg_.patch_size;
  const int c1 = cfg_.stage_channels[0];
  const int g1 = cfg_.stage_grid(0);
  embed_w_ = register_param("embed.proj.w", {patch_vec, c1}, true, 0.02);
  embed_b_ = register_zeros("embed.proj.b", {c1});
  embed_norm_g_ = register_ones("embed.norm.g", c1);
  embed_norm_b_ = register_zeros("embed.norm.b", {c1});
  pos_embed_ = register_param("embed.pos", {1, g1, g1, c1}, false, 0.02);

  for (int s = 0; s < 4; ++s) {
    const int c = cfg_.stage_channels[s];
    for (int b = 0; b < cfg_.stage_depths[s]; ++b) {
      char prefix[64];
      std::snprintf(prefix, sizeof(prefix), "enc.s%d.b%d.", s + 1, b);
      stages_[s].push_back(
          make_block(prefix, c, cfg_.stage_heads[s], cfg_.effective_window(s), true));
    }
    if (s < 3) {
      char prefix[64];
      std::snprintf(prefix, sizeof(prefix), "enc.merge%d.", s + 1);
      const int next_c = cfg_.stage_channels[s + 1];
      merges_[s].norm_g = register_ones(std::string(prefix) + "norm.g", 4 * c);
      merges_[s].norm_b = register_zeros(std::string(prefix) + "norm.b", {4 * c});
      merges_[s].red_w =
          register_param(std::string(prefix) + "red.w", {4 * c, next_c}, true, 0.02);
    }
  }
  const int c4 = cfg_.stage_channels[3];
  enc_norm_g_ = register_ones("enc.norm.g", c4);
  enc_norm_b_ = register_zeros("enc.norm.b", {c4});

  if (task_ == ModelTask::kPretrain) {
    const int d = cfg_.decoder_dim;
    const int n4 = cfg_.stage_grid(3) * cfg_.stage_grid(3);
    const int out_dim = cfg_.in_channels * cfg_.mask_unit * cfg_.mask_unit;
    dec_embed_w_ = register_param("dec.embed.w", {c4, d}, true, 0.02);
    dec_embed_b_ = register_zeros("dec.embed.b", {d});
    dec_mask_token_ = register_param("dec.mask_token", {d}, false, 0.02);
    dec_pos_ = register_param("dec.pos", {1, n4, d}, false, 0.02);
    for (int b = 0; b < cfg_.decoder_depth; ++b) {
      char prefix[64];
      std::snprintf(prefix, sizeof(prefix), "dec.b%d.", b);
      dec_blocks_.push_back(make_block(prefix, d, cfg_.decoder_heads, 0, false));
    }
    dec_norm_g_ = register_ones("dec.norm.g", d);
    dec_norm_b_ = register_zeros("dec.norm.b", {d});
    dec_out_w_ = register_param("dec.out.w", {d, out_dim}, true, 0.02);
    dec_out_b_ = register_zeros("dec.out.b", {out_dim});
  } else if (task_ == ModelTask::kClassify) {
    head_w_ = register_param("head.cls.w", {c4, cfg_.label_count}, true, 0.02);
    head_b_ = register_zeros("head.cls.b", {cfg_.label_count});
  } else {
    head_w_ = register_param("head.flood.w", {c4, 2}, true, 0.02);
    head_b_ = register_zeros("head.flood.b", {2});
  }
}

// ---------------------------------------------------------------------------
// Index maps
// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<std::vector<int>> build_patch_index(int batch, int channels, int size, int patch) {
  const int grid = size / patch;
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<size_t>(batch) * grid * grid * channels * patch * patch);
  for (int b = 0; b < batch; ++b)
    for (int py = 0; py < grid; ++py)
      for (int px = 0; px < grid; ++px)
        for (int c = 0; c < channels; ++c)
          for (int dy = 0; dy < patch; ++dy)
            for (int dx = 0; dx < patch; ++dx) {
              const int y = py * patch + dy;
              const int x = px * patch + dx;
              idx->push_back(((b * channels + c) * size + y) * size + x);
            }
  return idx;
}

std::shared_ptr<std::vector<int>> build_partition_index(int batch, int grid, int window) {
  const int nw = grid / window;
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<size_t>(batch) * grid * grid);
  for (int b = 0; b < batch; ++b)
    for (int wy = 0; wy < nw; ++wy)
      for (int wx = 0; wx < nw; ++wx)
        for (int iy = 0; iy < window; ++iy)
          for (int ix = 0; ix < window; ++ix)
            idx->push_back((b * grid + wy * window + iy) * grid + wx * window + ix);
  return idx;
}

std::shared_ptr<std::vector<int>> invert_index(const std::vector<int>& idx) {
  auto inv = std::make_shared<std::vector<int>>(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) (*inv)[idx[i]] = static_cast<int>(i);
  return inv;
}

/// Row map for rolling a [B, g, g, C] token grid up-left by `shift`.
std::shared_ptr<std::vector<int>> build_roll_index(int batch, int grid, int shift) {
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<size_t>(batch) * grid * grid);
  for (int b = 0; b < batch; ++b)
    for (int y = 0; y < grid; ++y)
      for (int x = 0; x < grid; ++x) {
        const int sy = (y + shift) % grid;
        const int sx = (x + shift) % grid;
        idx->push_back((b * grid + sy) * grid + sx);
      }
  return idx;
}

int shift_zone(int coord, int grid, int window, int shift) {
  if (coord < grid - window) return 0;
  if (coord < grid - shift) return 1;
  return 2;
}

}  // namespace

template <typename T>
std::shared_ptr<std::vector<int>> SwinModel<T>::relpos_index(int window) {
  auto it = relpos_cache_.find(window);
  if (it != relpos_cache_.end()) return it->second;
  const int l = window * window;
  auto idx = std::make_shared<std::vector<int>>(static_cast<size_t>(l) * l);
  for (int i = 0; i < l; ++i) {
    const int iy = i / window, ix = i % window;
    for (int j = 0; j < l; ++j) {
      const int jy = j / window, jx = j % window;
      (*idx)[static_cast<size_t>(i) * l + j] =
          (iy - jy + window - 1) * (2 * window - 1) + (ix - jx + window - 1);
    }
  }
  relpos_cache_[window] = idx;
  return idx;
}

// ---------------------------------------------------------------------------
// Attention and blocks
// ---------------------------------------------------------------------------

template <typename T>
Var<T> SwinModel<T>::attention(const BlockParams& p, const Var<T>& normed, int heads, int window,
                               std::shared_ptr<Tensor<T>> attn_mask) {
  const int channels = normed->value.cols();
  const int head_dim = channels / heads;
  auto qkv = nn::linear(normed, p.qkv_w, p.qkv_b);
  auto q = nn::split_heads(nn::slice_last(qkv, 0, channels), heads);
  auto k = nn::split_heads(nn::slice_last(qkv, channels, 2 * channels), heads);
  auto v = nn::split_heads(nn::slice_last(qkv, 2 * channels, 3 * channels), heads);
  q = nn::scale(q, static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim))));
  auto logits = nn::bmm_nt(q, k);
  if (p.relpos) logits = nn::add_rel_pos_bias(logits, p.relpos, relpos_index(window), heads);
  if (attn_mask) logits = nn::add_window_mask(logits, attn_mask, heads);
  auto attn = nn::softmax_last(logits);
  auto out = nn::merge_heads(nn::bmm_nn(attn, v), heads);
  return nn::linear(out, p.proj_w, p.proj_b);
}

template <typename T>
Var<T> SwinModel<T>::run_block(const BlockParams& p, Var<T> tokens, int grid, int heads,
                               int window, int shift, const std::vector<Grid<uint8_t>>* provenance,
                               int batch) {
  const int channels = tokens->value.cols();
  const int nw = grid / window;
  const int l = window * window;

  char key[96];
  if (shift > 0) {
    std::snprintf(key, sizeof(key), "roll:g=%d,s=%d,B=%d", grid, shift, batch);
    auto& roll = index_cache_[key];
    if (!roll) roll = build_roll_index(batch, grid, shift);
    tokens = nn::gather_rows(tokens, roll, tokens->value.shape);
  }

  std::snprintf(key, sizeof(key), "part:g=%d,w=%d,B=%d", grid, window, batch);
  auto& part = index_cache_[key];
  if (!part) part = build_partition_index(batch, grid, window);
  std::snprintf(key, sizeof(key), "partinv:g=%d,w=%d,B=%d", grid, window, batch);
  auto& partinv = index_cache_[key];
  if (!partinv) partinv = invert_index(*part);

  auto win = nn::gather_rows(tokens, part, {batch * nw * nw, l, channels});

  // Attention groups: tokens interact only within the same shift zone and,
  // during pretraining, the same mix source.
  std::shared_ptr<Tensor<T>> mask;
  if (shift > 0 || provenance != nullptr) {
    mask = std::make_shared<Tensor<T>>(std::vector<int>{batch * nw * nw, l, l});
    std::vector<int> gid(static_cast<size_t>(l));
    for (int b = 0; b < batch; ++b)
      for (int wy = 0; wy < nw; ++wy)
        for (int wx = 0; wx < nw; ++wx) {
          for (int iy = 0; iy < window; ++iy)
            for (int ix = 0; ix < window; ++ix) {
              const int y = wy * window + iy;
              const int x = wx * window + ix;
              int zone = 0;
              if (shift > 0)
                zone = shift_zone(y, grid, window, shift) * 3 + shift_zone(x, grid, window, shift);
              int prov = 0;
              if (provenance != nullptr) {
                // Provenance grids arrive in unshifted layout; index the
                // source position of the rolled token.
                const int sy = shift > 0 ? (y + shift) % grid : y;
                const int sx = shift > 0 ? (x + shift) % grid : x;
                prov = (*provenance)[b].at(sy, sx);
              }
              gid[static_cast<size_t>(iy) * window + ix] = zone * 2 + prov;
            }
          T* slab = mask->data.data() +
                    (static_cast<size_t>(b) * nw * nw + static_cast<size_t>(wy) * nw + wx) * l * l;
          for (int i = 0; i < l; ++i)
            for (int j = 0; j < l; ++j)
              slab[static_cast<size_t>(i) * l + j] = gid[i] == gid[j] ? T(0) : T(-1e9);
        }
  }

  auto h = nn::layer_norm(win, p.norm1_g, p.norm1_b);
  win = nn::add(win, attention(p, h, heads, window, mask));
  auto h2 = nn::layer_norm(win, p.norm2_g, p.norm2_b);
  auto mlp = nn::linear(nn::gelu(nn::linear(h2, p.fc1_w, p.fc1_b)), p.fc2_w, p.fc2_b);
  win = nn::add(win, mlp);

  auto back = nn::gather_rows(nn::reshape(win, {batch * grid * grid, channels}), partinv,
                              {batch, grid, grid, channels});
  if (shift > 0) {
    std::snprintf(key, sizeof(key), "unroll:g=%d,s=%d,B=%d", grid, shift, batch);
    auto& unroll = index_cache_[key];
    if (!unroll) unroll = build_roll_index(batch, grid, grid - shift);
    back = nn::gather_rows(back, unroll, back->value.shape);
  }
  return back;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

template <typename T>
Var<T> SwinModel<T>::patch_embed(const Tensor<T>& images) {
  if (images.rank() != 4 || images.dim(1) != cfg_.in_channels ||
      images.dim(2) != cfg_.input_size || images.dim(3) != cfg_.input_size)
    throw ShapeError("patch_embed: expected [B," + std::to_string(cfg_.in_channels) + "," +
                     std::to_string(cfg_.input_size) + "," + std::to_string(cfg_.input_size) +
                     "], got " + images.shape_str());
  const int batch = images.dim(0);
  const int grid = cfg_.stage_grid(0);
  const int patch_vec = cfg_.in_channels * cfg_.patch_size * cfg_.patch_size;

  char key[96];
  std::snprintf(key, sizeof(key), "patch:B=%d", batch);
  auto& idx = index_cache_[key];
  if (!idx) idx = build_patch_index(batch, cfg_.in_channels, cfg_.input_size, cfg_.patch_size);

  auto x = nn::constant(images);
  auto patches = nn::gather_flat(x, idx, {batch * grid * grid, patch_vec});
  auto tokens = nn::linear(patches, embed_w_, embed_b_);
  tokens = nn::layer_norm(tokens, embed_norm_g_, embed_norm_b_);
  tokens = nn::reshape(tokens, {batch, grid, grid, cfg_.stage_channels[0]});
  return nn::add_broadcast_batch(tokens, pos_embed_);
}

template <typename T>
typename SwinModel<T>::EncodeResult SwinModel<T>::encode(const Tensor<T>& images,
                                                         const std::vector<MixMask>* masks) {
  const int batch = images.dim(0);
  if (masks != nullptr && static_cast<int>(masks->size()) != batch)
    throw ShapeError("encode: one mix mask per batch element required");

  EncodeResult result;
  auto tokens = patch_embed(images);

  for (int s = 0; s < 4; ++s) {
    const int grid = cfg_.stage_grid(s);
    const int window = cfg_.effective_window(s);
    const int heads = cfg_.stage_heads[s];

    std::vector<Grid<uint8_t>> stage_prov;
    if (masks != nullptr) {
      stage_prov.reserve(masks->size());
      for (const auto& m : *masks)
        stage_prov.push_back(downsample_mask(m, cfg_.input_size, cfg_.stage_stride(s)));
    }

    for (int b = 0; b < cfg_.stage_depths[s]; ++b) {
      const int shift = (b % 2 == 1 && window < grid) ? window / 2 : 0;
      tokens = run_block(stages_[s][b], tokens, grid, heads, window, shift,
                         masks ? &stage_prov : nullptr, batch);
      for (const T x : tokens->value.data)
        if (!std::isfinite(static_cast<double>(x)))
          throw NumericError("encoder: non-finite activation at stage " + std::to_string(s + 1));
    }
    result.stage_tokens.push_back(tokens);

    if (s < 3) {
      const int half = grid / 2;
      std::vector<std::shared_ptr<std::vector<int>>> quads(4);
      for (int q = 0; q < 4; ++q) {
        char key[96];
        std::snprintf(key, sizeof(key), "merge%d:g=%d,B=%d", q, grid, batch);
        auto& cached = index_cache_[key];
        if (!cached) {
          auto idx = std::make_shared<std::vector<int>>();
          idx->reserve(static_cast<size_t>(batch) * half * half);
          const int oy = q % 2, ox = q / 2;  // order: (0,0), (1,0), (0,1), (1,1)
          for (int bb = 0; bb < batch; ++bb)
            for (int y = 0; y < half; ++y)
              for (int x = 0; x < half; ++x)
                idx->push_back((bb * grid + 2 * y + oy) * grid + 2 * x + ox);
          cached = idx;
        }
        quads[q] = cached;
      }
      const int c = cfg_.stage_channels[s];
      std::vector<Var<T>> parts;
      for (int q = 0; q < 4; ++q)
        parts.push_back(nn::gather_rows(tokens, quads[q], {batch, half, half, c}));
      auto cat = nn::concat_last(parts);
      cat = nn::layer_norm(cat, merges_[s].norm_g, merges_[s].norm_b);
      tokens = nn::linear(cat, merges_[s].red_w);
    }
  }

  result.final_tokens = nn::layer_norm(tokens, enc_norm_g_, enc_norm_b_);
  return result;
}

// ---------------------------------------------------------------------------
// Decoder and heads
// ---------------------------------------------------------------------------

template <typename T>
std::pair<Var<T>, Var<T>> SwinModel<T>::decode_dual(const Var<T>& final_tokens,
                                                    const std::vector<MixMask>& masks) {
  if (task_ != ModelTask::kPretrain)
    throw ConfigError("decode_dual: model was not built for pretraining");
  const int batch = final_tokens->value.dim(0);
  const int g4 = cfg_.stage_grid(3);
  const int n4 = g4 * g4;
  if (static_cast<int>(masks.size()) != batch)
    throw ShapeError("decode_dual: one mix mask per batch element required");

  auto x = nn::reshape(final_tokens, {batch, n4, cfg_.stage_channels[3]});
  auto emb = nn::linear(x, dec_embed_w_, dec_embed_b_);

  // Token t of sample b is visible to source A when its unit is 0, to B when
  // 1; the counterpart set sees the learned placeholder there.
  auto sel_a = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(batch) * n4);
  auto sel_b = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(batch) * n4);
  const int tokens_per_unit = cfg_.mask_unit / cfg_.final_stride();
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < n4; ++t) {
      const int ty = t / g4, tx = t % g4;
      const uint8_t unit =
          masks[static_cast<size_t>(b)].unit_grid.at(ty / tokens_per_unit, tx / tokens_per_unit);
      (*sel_a)[static_cast<size_t>(b) * n4 + t] = unit;            // B shown -> A placeholder
      (*sel_b)[static_cast<size_t>(b) * n4 + t] = unit ? 0 : 1;    // A shown -> B placeholder
    }

  auto decode_set = [&](const std::shared_ptr<std::vector<uint8_t>>& sel) {
    auto tokens = nn::substitute_rows(emb, sel, dec_mask_token_);
    tokens = nn::add_broadcast_batch(tokens, dec_pos_);
    for (const auto& blk : dec_blocks_) {
      auto h = nn::layer_norm(tokens, blk.norm1_g, blk.norm1_b);
      tokens = nn::add(tokens, attention(blk, h, cfg_.decoder_heads, 0, nullptr));
      auto h2 = nn::layer_norm(tokens, blk.norm2_g, blk.norm2_b);
      auto mlp = nn::linear(nn::gelu(nn::linear(h2, blk.fc1_w, blk.fc1_b)), blk.fc2_w, blk.fc2_b);
      tokens = nn::add(tokens, mlp);
    }
    tokens = nn::layer_norm(tokens, dec_norm_g_, dec_norm_b_);
    return nn::linear(tokens, dec_out_w_, dec_out_b_);
  };

  return {decode_set(sel_a), decode_set(sel_b)};
}

template <typename T>
Var<T> SwinModel<T>::pool(const Var<T>& final_tokens) {
  const int batch = final_tokens->value.dim(0);
  const int n4 = cfg_.stage_grid(3) * cfg_.stage_grid(3);
  return nn::mean_tokens(nn::reshape(final_tokens, {batch, n4, cfg_.stage_channels[3]}));
}

template <typename T>
Var<T> SwinModel<T>::classify(const Var<T>& final_tokens) {
  if (task_ != ModelTask::kClassify)
    throw ConfigError("classify: model was not built with a classification head");
  return nn::linear(pool(final_tokens), head_w_, head_b_);
}

template <typename T>
Var<T> SwinModel<T>::flood_head(const Var<T>& pooled_difference) {
  if (task_ != ModelTask::kFlood)
    throw ConfigError("flood_head: model was not built with a flood head");
  return nn::linear(pooled_difference, head_w_, head_b_);
}

// ---------------------------------------------------------------------------
// Parameter IO
// ---------------------------------------------------------------------------

template <typename T>
void SwinModel<T>::zero_grads() {
  for (auto& p : params_) p.var->zero_grad();
}

template <typename T>
size_t SwinModel<T>::parameter_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.var->value.numel();
  return n;
}

template <typename T>
std::vector<NamedBlob> SwinModel<T>::export_blobs() const {
  std::vector<NamedBlob> blobs;
  blobs.reserve(params_.size());
  for (const auto& p : params_) {
    NamedBlob b;
    b.name = p.name;
    b.shape = p.var->value.shape;
    b.data.resize(p.var->value.numel());
    for (size_t i = 0; i < b.data.size(); ++i)
      b.data[i] = static_cast<float>(p.var->value.data[i]);
    blobs.push_back(std::move(b));
  }
  return blobs;
}

template <typename T>
void SwinModel<T>::import_blobs(const std::vector<NamedBlob>& blobs, bool encoder_only) {
  std::map<std::string, const NamedBlob*> by_name;
  for (const auto& b : blobs) by_name[b.name] = &b;
  for (auto& p : params_) {
    const bool encoder_param =
        p.name.rfind("embed.", 0) == 0 || p.name.rfind("enc.", 0) == 0;
    if (encoder_only && !encoder_param) continue;
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw ConfigError("checkpoint does not match model: missing parameter '" + p.name + "'");
    const NamedBlob& b = *it->second;
    if (b.shape != p.var->value.shape)
      throw ConfigError("checkpoint does not match model: shape mismatch for '" + p.name + "'");
    for (size_t i = 0; i < b.data.size(); ++i)
      p.var->value.data[i] = static_cast<T>(b.data[i]);
  }
}

// ---------------------------------------------------------------------------
// Layout utilities
// ---------------------------------------------------------------------------

std::shared_ptr<std::vector<int>> token_to_image_index(const ModelConfig& cfg, int batch) {
  const int s = cfg.input_size;
  const int u = cfg.mask_unit;
  const int g = s / u;
  const int per_token = cfg.in_channels * u * u;
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<size_t>(batch) * cfg.in_channels * s * s);
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < cfg.in_channels; ++c)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          const int t = (y / u) * g + (x / u);
          const int slot = (c * u + (y % u)) * u + (x % u);
          idx->push_back((b * g * g + t) * per_token + slot);
        }
  return idx;
}

template <typename T>
Tensor<T> assemble_prediction(const Tensor<T>& token_pred, const ModelConfig& cfg) {
  const int g = cfg.input_size / cfg.mask_unit;
  const int per_token = cfg.in_channels * cfg.mask_unit * cfg.mask_unit;
  if (token_pred.rank() != 3 || token_pred.dim(1) != g * g || token_pred.dim(2) != per_token)
    throw ShapeError("assemble_prediction: unexpected token layout " + token_pred.shape_str());
  const int batch = token_pred.dim(0);
  auto idx = token_to_image_index(cfg, batch);
  Tensor<T> out({batch, cfg.in_channels, cfg.input_size, cfg.input_size});
  for (size_t i = 0; i < idx->size(); ++i) out.data[i] = token_pred.data[(*idx)[i]];
  return out;
}

template <typename T>
Tensor<T> image_to_tokens(const Tensor<T>& image, const ModelConfig& cfg) {
  const int g = cfg.input_size / cfg.mask_unit;
  const int per_token = cfg.in_channels * cfg.mask_unit * cfg.mask_unit;
  if (image.rank() != 4 || image.dim(1) != cfg.in_channels || image.dim(2) != cfg.input_size ||
      image.dim(3) != cfg.input_size)
    throw ShapeError("image_to_tokens: unexpected image layout " + image.shape_str());
  const int batch = image.dim(0);
  auto idx = token_to_image_index(cfg, batch);
  Tensor<T> out({batch, g * g, per_token});
  for (size_t i = 0; i < idx->size(); ++i) out.data[(*idx)[i]] = image.data[i];
  return out;
}

template <typename T>
Tensor<T> pack_images(const std::vector<const StandardizedPatch*>& batch) {
  if (batch.empty()) throw ShapeError("pack_images: empty batch");
  const int s = batch[0]->height();
  Tensor<T> out({static_cast<int>(batch.size()), 2, s, s});
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& p = *batch[b];
    if (p.height() != s || p.width() != s) throw ShapeError("pack_images: ragged batch");
    T* vh = out.data.data() + (b * 2 + 0) * static_cast<size_t>(s) * s;
    T* vv = out.data.data() + (b * 2 + 1) * static_cast<size_t>(s) * s;
    for (size_t i = 0; i < p.vh.v.size(); ++i) {
      vh[i] = static_cast<T>(p.vh.v[i]);
      vv[i] = static_cast<T>(p.vv.v[i]);
    }
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> pack_tiles(const StandardizedPatch& image, int tile_size) {
  const int side = image.height();
  if (image.width() != side || side % tile_size != 0)
    throw ShapeError("flood input must be square with side a multiple of " +
                     std::to_string(tile_size) + ", got " + std::to_string(image.height()) + "x" +
                     std::to_string(image.width()));
  const int k = side / tile_size;
  Tensor<T> out({k * k, 2, tile_size, tile_size});
  for (int ti = 0; ti < k; ++ti)
    for (int tj = 0; tj < k; ++tj) {
      const int t = ti * k + tj;
      for (int y = 0; y < tile_size; ++y)
        for (int x = 0; x < tile_size; ++x) {
          const size_t o = ((static_cast<size_t>(t) * 2) * tile_size + y) * tile_size + x;
          out.data[o] = static_cast<T>(image.vh.at(ti * tile_size + y, tj * tile_size + x));
          out.data[o + static_cast<size_t>(tile_size) * tile_size] =
              static_cast<T>(image.vv.at(ti * tile_size + y, tj * tile_size + x));
        }
    }
  return out;
}

}  // namespace

template <typename T>
Var<T> flood_pair_logits(SwinModel<T>& model, const StandardizedPatch& reference,
                         const StandardizedPatch& query) {
  if (reference.height() != query.height() || reference.width() != query.width())
    throw ShapeError("flood_pair_logits: pair dimensions differ");
  const int tile = model.config().input_size;
  auto ref_tiles = pack_tiles<T>(reference, tile);
  auto qry_tiles = pack_tiles<T>(query, tile);
  const int n_tiles = ref_tiles.dim(0);

  auto ref_pool = model.pool(model.encode(ref_tiles, nullptr).final_tokens);
  auto qry_pool = model.pool(model.encode(qry_tiles, nullptr).final_tokens);
  auto diff = nn::sub(qry_pool, ref_pool);
  auto pooled = nn::mean_tokens(nn::reshape(diff, {1, n_tiles, model.config().stage_channels[3]}));
  return model.flood_head(pooled);
}

template <typename T>
Tensor<T> tile_features(SwinModel<T>& model, const StandardizedPatch& image) {
  auto tiles = pack_tiles<T>(image, model.config().input_size);
  auto pooled = model.pool(model.encode(tiles, nullptr).final_tokens);
  return pooled->value;
}

template class SwinModel<float>;
template class SwinModel<double>;

template Tensor<float> assemble_prediction<float>(const Tensor<float>&, const ModelConfig&);
template Tensor<double> assemble_prediction<double>(const Tensor<double>&, const ModelConfig&);
template Tensor<float> image_to_tokens<float>(const Tensor<float>&, const ModelConfig&);
template Tensor<double> image_to_tokens<double>(const Tensor<double>&, const ModelConfig&);
template Tensor<float> pack_images<float>(const std::vector<const StandardizedPatch*>&);
template Tensor<double> pack_images<double>(const std::vector<const StandardizedPatch*>&);
template nn::Var<float> flood_pair_logits<float>(SwinModel<float>&, const StandardizedPatch&,
                                                 const StandardizedPatch&);
template nn::Var<double> flood_pair_logits<double>(SwinModel<double>&, const StandardizedPatch&,
                                                   const StandardizedPatch&);
template Tensor<float> tile_features<float>(SwinModel<float>&, const StandardizedPatch&);
template Tensor<double> tile_features<double>(SwinModel<double>&, const StandardizedPatch&);

}  // namespace sarw
