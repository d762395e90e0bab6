#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sarw/checkpoint.hpp"
#include "sarw/mixing.hpp"
#include "sarw/model.hpp"
#include "sarw/objectives.hpp"
#include "testutil.hpp"

using namespace sarw;
using namespace sarw::testutil;

namespace {

/// Fixed pretraining scenario at double precision for gradient checks.
struct PretrainScenario {
  ModelConfig cfg;
  Tensor<double> input;            // mixed image [1, 2, S, S]
  std::vector<MixMask> masks;
  Tensor<double> target_a, target_b;
  Grid<uint8_t> selector;
  WeightMap weights;

  explicit PretrainScenario(const ModelConfig& config, uint64_t seed) : cfg(config) {
    Rng rng(seed);
    const int s = cfg.input_size;
    auto a = random_standardized(s, rng);
    auto b = random_standardized(s, rng);
    Rng mask_rng = Rng::fork(seed, rng_stream::kMask, 7);
    masks.push_back(sample_mask(cfg.mask_grid(), 0.5, cfg.mask_unit, mask_rng));
    const auto mixed = mix(a, b, masks[0]);
    input = Tensor<double>({1, 2, s, s});
    for (size_t i = 0; i < a.vh.v.size(); ++i) {
      input.data[i] = mixed.mixed.vh.v[i];
      input.data[a.vh.v.size() + i] = mixed.mixed.vv.v[i];
    }
    auto to_chw = [&](const StandardizedPatch& p) {
      Tensor<double> t({2, s, s});
      for (size_t i = 0; i < p.vh.v.size(); ++i) {
        t.data[i] = p.vh.v[i];
        t.data[p.vh.v.size() + i] = p.vv.v[i];
      }
      return t;
    };
    target_a = to_chw(a);
    target_b = to_chw(b);
    selector = reconstruction_selector(masks[0], s);
    weights = random_grid(s, s, rng, 1.0f, 2.718f);
  }

  double forward_loss(SwinModel<double>& model) const {
    auto enc = model.encode(input, &masks);
    auto [pa, pb] = model.decode_dual(enc.final_tokens, masks);
    const auto img_a = assemble_prediction(pa->value, cfg);
    const auto img_b = assemble_prediction(pb->value, cfg);
    const auto loss = weighted_dual_reconstruction_loss(
        slice0(img_a), slice0(img_b), target_a, target_b, selector, weights, cfg.mask_unit);
    return loss.loss;
  }

  void backward_loss(SwinModel<double>& model) const {
    model.zero_grads();
    auto enc = model.encode(input, &masks);
    auto [pa, pb] = model.decode_dual(enc.final_tokens, masks);
    const auto img_a = assemble_prediction(pa->value, cfg);
    const auto img_b = assemble_prediction(pb->value, cfg);
    const auto loss = weighted_dual_reconstruction_loss(
        slice0(img_a), slice0(img_b), target_a, target_b, selector, weights, cfg.mask_unit);
    Tensor<double> ga({1, 2, cfg.input_size, cfg.input_size}, loss.grad1.data);
    Tensor<double> gb({1, 2, cfg.input_size, cfg.input_size}, loss.grad2.data);
    nn::backward<double>({{pa, image_to_tokens(ga, cfg)}, {pb, image_to_tokens(gb, cfg)}});
  }

  static Tensor<double> slice0(const Tensor<double>& batched) {
    std::vector<int> shape(batched.shape.begin() + 1, batched.shape.end());
    return Tensor<double>(shape, batched.data);
  }
};

}  // namespace

TEST_CASE("patch_embed produces the stride-4 token grid") {
  ModelConfig cfg = ModelConfig::desk();
  SwinModel<float> model(cfg, ModelTask::kPretrain, 1);
  Rng rng(3);
  auto img = random_tensor<float>({2, 2, 128, 128}, rng);
  auto tokens = model.patch_embed(img);
  CHECK(tokens->value.shape == std::vector<int>{2, 32, 32, 16});
  for (float x : tokens->value.data) CHECK(std::isfinite(x));
}

TEST_CASE("patch_embed on zero input with zero projection bias equals positional values") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kPretrain, 1);
  // Zero input means the projection contributes only its bias (zero-init),
  // so after the embed norm the tokens equal beta (zero) plus the position
  // embedding.
  Tensor<float> zeros({1, 2, 64, 64});
  auto tokens = model.patch_embed(zeros);
  const nn::Var<float> pos = [&] {
    for (const auto& p : model.params())
      if (p.name == "embed.pos") return p.var;
    return nn::Var<float>();
  }();
  REQUIRE(pos);
  for (size_t i = 0; i < tokens->value.data.size(); ++i)
    CHECK(tokens->value.data[i] == doctest::Approx(pos->value.data[i]).epsilon(1e-6));
}

TEST_CASE("encoder stride algebra holds for both presets") {
  for (const ModelConfig& cfg : {ModelConfig::desk(), ModelConfig::tiny()}) {
    SwinModel<float> model(cfg, ModelTask::kClassify, 1);
    Rng rng(5);
    auto img = random_tensor<float>({1, 2, cfg.input_size, cfg.input_size}, rng);
    auto enc = model.encode(img, nullptr);
    REQUIRE(enc.stage_tokens.size() == 4);
    for (int s = 0; s < 4; ++s) {
      CHECK(enc.stage_tokens[s]->value.dim(1) == cfg.input_size / (4 << s));
      CHECK(enc.stage_tokens[s]->value.dim(3) == cfg.stage_channels[s]);
    }
    CHECK(enc.final_tokens->value.shape ==
          std::vector<int>{1, cfg.input_size / 32, cfg.input_size / 32, cfg.stage_channels[3]});
  }
}

TEST_CASE("two constructions from one config have identical parameter inventories") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> a(cfg, ModelTask::kPretrain, 1);
  SwinModel<float> b(cfg, ModelTask::kPretrain, 99);
  REQUIRE(a.params().size() == b.params().size());
  CHECK(a.parameter_count() == b.parameter_count());
  for (size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i].name == b.params()[i].name);
    CHECK(a.params()[i].var->value.shape == b.params()[i].var->value.shape);
  }
  SwinModel<float> c(cfg, ModelTask::kPretrain, 1);
  for (size_t i = 0; i < a.params().size(); ++i)
    CHECK(a.params()[i].var->value.data == c.params()[i].var->value.data);
}

TEST_CASE("batch order permutes outputs without cross-sample mixing") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kClassify, 2);
  Rng rng(11);
  auto one = random_tensor<float>({1, 2, 64, 64}, rng);
  auto two = random_tensor<float>({1, 2, 64, 64}, rng);
  Tensor<float> fwd({2, 2, 64, 64});
  std::copy(one.data.begin(), one.data.end(), fwd.data.begin());
  std::copy(two.data.begin(), two.data.end(), fwd.data.begin() + one.numel());
  Tensor<float> rev({2, 2, 64, 64});
  std::copy(two.data.begin(), two.data.end(), rev.data.begin());
  std::copy(one.data.begin(), one.data.end(), rev.data.begin() + one.numel());

  auto out_fwd = model.encode(fwd, nullptr).final_tokens->value;
  auto out_rev = model.encode(rev, nullptr).final_tokens->value;
  const size_t half = out_fwd.numel() / 2;
  for (size_t i = 0; i < half; ++i) {
    CHECK(out_fwd.data[i] == out_rev.data[half + i]);
    CHECK(out_fwd.data[half + i] == out_rev.data[i]);
  }
}

TEST_CASE("classification head: zero features with zero weights give the bias") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kClassify, 3);
  for (auto& p : model.params())
    if (p.name == "head.cls.w")
      std::fill(p.var->value.data.begin(), p.var->value.data.end(), 0.0f);
  Rng rng(7);
  auto img = random_tensor<float>({1, 2, 64, 64}, rng);
  auto logits = model.classify(model.encode(img, nullptr).final_tokens);
  CHECK(logits->value.shape == std::vector<int>{1, cfg.label_count});
  for (float x : logits->value.data) CHECK(x == 0.0f);  // zero-init bias
}

TEST_CASE("token-layout assembly round trips") {
  ModelConfig cfg = ModelConfig::tiny();
  Rng rng(13);
  auto img = random_tensor<double>({2, 2, 64, 64}, rng);
  const auto tokens = image_to_tokens(img, cfg);
  const auto back = assemble_prediction(tokens, cfg);
  CHECK(back.data == img.data);
}

TEST_CASE("checkpoint round trip preserves the forward pass bit-exactly") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kClassify, 21);
  Rng rng(17);
  auto img = random_tensor<float>({1, 2, 64, 64}, rng);
  const auto before = model.classify(model.encode(img, nullptr).final_tokens)->value;

  CheckpointData ckpt;
  ckpt.fingerprint = config_fingerprint(cfg, ModelTask::kClassify);
  ckpt.blobs = model.export_blobs();
  const auto tmp = std::filesystem::temp_directory_path() / "sarw_ckpt_test.swck";
  write_checkpoint(tmp, ckpt);
  const auto loaded = read_checkpoint(tmp);
  CHECK(loaded.fingerprint == ckpt.fingerprint);

  SwinModel<float> restored(cfg, ModelTask::kClassify, 999);
  restored.import_blobs(loaded.blobs);
  const auto after = restored.classify(restored.encode(img, nullptr).final_tokens)->value;
  CHECK(before.data == after.data);
  std::filesystem::remove(tmp);
}

TEST_CASE("loading a checkpoint onto a mismatched config is rejected") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kClassify, 21);
  CheckpointData ckpt;
  ckpt.blobs = model.export_blobs();
  ModelConfig other = cfg;
  other.stage_channels = {16, 32, 64, 128};
  SwinModel<float> wrong(other, ModelTask::kClassify, 2);
  CHECK_THROWS_AS(wrong.import_blobs(ckpt.blobs), ConfigError);
}

TEST_CASE("decoder outputs one full-resolution prediction per source") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kPretrain, 5);
  Rng rng(23);
  auto img = random_tensor<float>({1, 2, 64, 64}, rng);
  Rng mask_rng(29);
  std::vector<MixMask> masks = {sample_mask(cfg.mask_grid(), 0.5, cfg.mask_unit, mask_rng)};
  auto enc = model.encode(img, &masks);
  auto [pa, pb] = model.decode_dual(enc.final_tokens, masks);
  const int n4 = (cfg.input_size / 32) * (cfg.input_size / 32);
  CHECK(pa->value.shape == std::vector<int>{1, n4, 2 * cfg.mask_unit * cfg.mask_unit});
  CHECK(pb->value.shape == pa->value.shape);
  const auto img_a = assemble_prediction(pa->value, cfg);
  CHECK(img_a.shape == std::vector<int>{1, 2, 64, 64});
  // The two sets share the decoder but differ through placeholder positions.
  bool differ = false;
  for (size_t i = 0; i < pa->value.data.size(); ++i)
    differ |= pa->value.data[i] != pb->value.data[i];
  CHECK(differ);
}

TEST_CASE("flood pair forward: self-pairs reduce to the head bias") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kFlood, 31);
  float bias[2] = {0.5f, -0.25f};
  for (auto& p : model.params())
    if (p.name == "head.flood.b") {
      p.var->value.data[0] = bias[0];
      p.var->value.data[1] = bias[1];
    }
  Rng rng(37);
  auto image = random_standardized(128, rng);  // 2x2 tiles of the 64-pixel input
  auto logits = flood_pair_logits(model, image, image);
  CHECK(logits->value.data[0] == doctest::Approx(bias[0]).epsilon(1e-6));
  CHECK(logits->value.data[1] == doctest::Approx(bias[1]).epsilon(1e-6));
}

TEST_CASE("flood pair forward: swapping reference and query negates the pooled difference") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kFlood, 41);
  Rng rng(43);
  auto ref = random_standardized(64, rng);
  auto qry = random_standardized(64, rng);
  const auto ab = flood_pair_logits(model, ref, qry)->value;
  const auto ba = flood_pair_logits(model, qry, ref)->value;
  float head_bias[2] = {0, 0};
  for (auto& p : model.params())
    if (p.name == "head.flood.b") {
      head_bias[0] = p.var->value.data[0];
      head_bias[1] = p.var->value.data[1];
    }
  // logits(v) = W v + b and logits(-v) = -W v + b, so they sum to 2b.
  CHECK(ab.data[0] + ba.data[0] == doctest::Approx(2 * head_bias[0]).epsilon(1e-4));
  CHECK(ab.data[1] + ba.data[1] == doctest::Approx(2 * head_bias[1]).epsilon(1e-4));
}

TEST_CASE("flood pair forward rejects non-tiling inputs") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<float> model(cfg, ModelTask::kFlood, 1);
  Rng rng(3);
  auto bad = random_standardized(96, rng);  // not a multiple of 64
  CHECK_THROWS_AS(flood_pair_logits(model, bad, bad), ShapeError);
}

TEST_CASE("finite differences validate every parameter tensor (pretrain path)") {
  ModelConfig cfg = ModelConfig::tiny();
  PretrainScenario scenario(cfg, 2024);
  SwinModel<double> model(cfg, ModelTask::kPretrain, 77);
  const auto result = finite_difference_check<double>(
      model, [&] { return scenario.forward_loss(model); },
      [&] { scenario.backward_loss(model); }, 3, 1e-5, 1e-3);
  INFO("worst: ", result.worst_name, " rel=", result.worst_rel, " checked=", result.checked);
  CHECK(result.checked >= 3 * static_cast<int>(model.params().size()) - 6);
  CHECK(result.failed == 0);
}

TEST_CASE("finite differences validate the shifted-window attention path") {
  // Depths of 2 in the first two stages force shifted blocks on grids larger
  // than the window, which the acceptance-scale config never exercises.
  ModelConfig cfg = ModelConfig::tiny();
  cfg.stage_depths = {2, 2, 1, 1};
  PretrainScenario scenario(cfg, 4711);
  SwinModel<double> model(cfg, ModelTask::kPretrain, 78);
  const auto result = finite_difference_check<double>(
      model, [&] { return scenario.forward_loss(model); },
      [&] { scenario.backward_loss(model); }, 3, 1e-5, 1e-3);
  INFO("worst: ", result.worst_name, " rel=", result.worst_rel);
  CHECK(result.failed == 0);
}

TEST_CASE("finite differences validate the classification head path") {
  ModelConfig cfg = ModelConfig::tiny();
  SwinModel<double> model(cfg, ModelTask::kClassify, 79);
  Rng rng(51);
  auto img = random_tensor<double>({1, 2, 64, 64}, rng);
  std::vector<uint8_t> labels = {1, 0, 1, 0};

  auto forward = [&] {
    auto logits = model.classify(model.encode(img, nullptr).final_tokens);
    std::vector<double> row(logits->value.data.begin(), logits->value.data.end());
    return multilabel_soft_margin_loss(row, labels).loss;
  };
  auto backward = [&] {
    model.zero_grads();
    auto logits = model.classify(model.encode(img, nullptr).final_tokens);
    std::vector<double> row(logits->value.data.begin(), logits->value.data.end());
    const auto loss = multilabel_soft_margin_loss(row, labels);
    nn::backward(logits, Tensor<double>({1, cfg.label_count}, loss.grad));
  };
  const auto result =
      finite_difference_check<double>(model, forward, backward, 3, 1e-5, 1e-3);
  INFO("worst: ", result.worst_name, " rel=", result.worst_rel);
  CHECK(result.failed == 0);
}
