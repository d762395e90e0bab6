#include "sarw/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sarw/mixing.hpp"
#include "sarw/objectives.hpp"
#include "sarw/optimizer.hpp"
#include "sarw/radiometry.hpp"
#include "sarw/sha256.hpp"

#ifndef SARW_VERSION
#define SARW_VERSION "dev"
#endif

namespace sarw {

using nlohmann::json;

const char* weight_mode_name(WeightMode mode) {
  return mode == WeightMode::kSar ? "sar" : "uniform";
}

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> epoch_order(size_t count, uint64_t seed, int epoch) {
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::fork(seed, rng_stream::kShuffle, static_cast<uint64_t>(epoch));
  for (size_t i = count; i > 1; --i) {
    const size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::string config_echo_json(const TrainOptions& opt) {
  json j = {{"model", opt.model.canonical_string()},
            {"schedule",
             {{"peak_lr", opt.schedule.peak_lr},
              {"warmup_epochs", opt.schedule.warmup_epochs},
              {"total_epochs", opt.schedule.total_epochs},
              {"steps_per_epoch", opt.schedule.steps_per_epoch},
              {"weight_decay", opt.schedule.weight_decay},
              {"beta1", opt.schedule.beta1},
              {"beta2", opt.schedule.beta2},
              {"eps", opt.schedule.eps},
              {"batch_size", opt.schedule.batch_size},
              {"seed", opt.schedule.seed}}},
            {"weight_mode", weight_mode_name(opt.weight_mode)},
            {"mask_ratio", opt.mask_ratio},
            {"deterministic", opt.deterministic},
            {"head_only", opt.head_only}};
  return j.dump();
}

/// Shared training-loop state: parameters, moments, schedule position.
struct Optim {
  std::vector<AdamMoments<float>> moments;
  long long global_step = 0;

  explicit Optim(const SwinModel<float>& model) : moments(model.params().size()) {}

  void step(SwinModel<float>& model, const TrainSchedule& schedule, bool head_only) {
    const double lr = lr_at(std::min(global_step, schedule.total_steps()), schedule);
    auto& params = model.params();
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (head_only && p.name.rfind("head.", 0) != 0) continue;
      if (p.var->grad.data.empty()) continue;
      adamw_step(p.var->value, p.var->grad, moments[i], global_step + 1, lr, schedule.beta1,
                 schedule.beta2, schedule.eps, p.decay ? schedule.weight_decay : 0.0);
    }
    model.zero_grads();
    ++global_step;
  }
};

CheckpointData snapshot(const SwinModel<float>& model, const Optim& optim, Rng& run_rng) {
  CheckpointData ckpt;
  ckpt.fingerprint = config_fingerprint(model.config(), model.task());
  ckpt.blobs = model.export_blobs();
  const auto& params = model.params();
  for (size_t i = 0; i < params.size(); ++i) {
    if (optim.moments[i].m.data.empty()) continue;
    NamedBlob m{"opt.m." + params[i].name, optim.moments[i].m.shape, optim.moments[i].m.data};
    NamedBlob v{"opt.v." + params[i].name, optim.moments[i].v.shape, optim.moments[i].v.data};
    ckpt.blobs.push_back(std::move(m));
    ckpt.blobs.push_back(std::move(v));
  }
  ckpt.blobs.push_back(
      encode_u64_blob("train.step", {static_cast<uint64_t>(optim.global_step)}));
  ckpt.blobs.push_back(encode_u64_blob(
      "train.rng", {run_rng.state()[0], run_rng.state()[1], run_rng.state()[2],
                    run_rng.state()[3]}));
  return ckpt;
}

void restore(SwinModel<float>& model, Optim& optim, Rng& run_rng, const CheckpointData& ckpt) {
  const auto expected = config_fingerprint(model.config(), model.task());
  if (ckpt.fingerprint != expected)
    throw ConfigError("checkpoint fingerprint does not match the run configuration");
  model.import_blobs(ckpt.blobs);
  auto& params = model.params();
  for (size_t i = 0; i < params.size(); ++i) {
    const NamedBlob* m = ckpt.find("opt.m." + params[i].name);
    const NamedBlob* v = ckpt.find("opt.v." + params[i].name);
    if (m && v) {
      optim.moments[i].m = Tensor<float>(m->shape, m->data);
      optim.moments[i].v = Tensor<float>(v->shape, v->data);
    }
  }
  if (const NamedBlob* step = ckpt.find("train.step"))
    optim.global_step = static_cast<long long>(decode_u64_blob(*step)[0]);
  if (const NamedBlob* rng = ckpt.find("train.rng")) {
    const auto words = decode_u64_blob(*rng);
    if (words.size() == 4) {
      uint64_t st[4] = {words[0], words[1], words[2], words[3]};
      run_rng.set_state(st);
    }
  }
}

/// Rotating per-epoch checkpoint files plus a best-by-selection copy.
class CheckpointWriter {
 public:
  CheckpointWriter(const std::string& out_dir, int keep) : dir_(out_dir), keep_(keep) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  void on_epoch(int epoch, double selection_value, const CheckpointData& ckpt) {
    if (dir_.empty()) return;
    char name[64];
    std::snprintf(name, sizeof(name), "ckpt_epoch_%04d.swck", epoch);
    write_checkpoint(dir_ / name, ckpt);
    written_.push_back(dir_ / name);
    while (static_cast<int>(written_.size()) > keep_) {
      std::filesystem::remove(written_.front());
      written_.erase(written_.begin());
    }
    if (!have_best_ || selection_value < best_value_) {
      best_value_ = selection_value;
      have_best_ = true;
      write_checkpoint(dir_ / "ckpt_best.swck", ckpt);
    }
  }

 private:
  std::filesystem::path dir_;
  int keep_ = 2;
  std::vector<std::filesystem::path> written_;
  bool have_best_ = false;
  double best_value_ = 0.0;
};

Tensor<float> slice_sample(const Tensor<float>& batch, int index) {
  std::vector<int> shape(batch.shape.begin() + 1, batch.shape.end());
  Tensor<float> out(shape);
  const size_t stride = out.numel();
  std::copy(batch.data.begin() + static_cast<size_t>(index) * stride,
            batch.data.begin() + static_cast<size_t>(index + 1) * stride, out.data.begin());
  return out;
}

Tensor<float> patch_to_chw(const StandardizedPatch& p) {
  Tensor<float> out({2, p.height(), p.width()});
  std::copy(p.vh.v.begin(), p.vh.v.end(), out.data.begin());
  std::copy(p.vv.v.begin(), p.vv.v.end(), out.data.begin() + p.vh.v.size());
  return out;
}

struct PretrainItem {
  StandardizedPatch standardized;
  Tensor<float> target;  // [2, S, S]
  WeightMap weights;
};

}  // namespace

std::string RunReport::summary_json() const {
  json j = {{"config", json::parse(config_echo.empty() ? "{}" : config_echo)},
            {"source_version", source_version},
            {"wall_seconds", wall_seconds},
            {"aborted", aborted},
            {"epochs", epochs.size()}};
  if (!abort_reason.empty()) j["abort_reason"] = abort_reason;
  if (!epochs.empty()) j["final_mean_loss"] = epochs.back().mean_loss;
  if (final_metrics) j["final_metrics"] = json::parse(final_metrics->to_json());
  return j.dump(2);
}

void RunReport::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream lines(dir / "report.jsonl", std::ios::trunc);
  for (const auto& e : epochs) {
    json j = {{"epoch", e.epoch},
              {"mean_loss", e.mean_loss},
              {"lr_last", e.lr_last},
              {"wall_s", e.wall_seconds}};
    lines << j.dump() << "\n";
  }
  std::ofstream summary(dir / "summary.json", std::ios::trunc);
  summary << summary_json() << "\n";
}

// ---------------------------------------------------------------------------
// Pretraining
// ---------------------------------------------------------------------------

TrainResult pretrain(const std::vector<SarPatch>& patches, const StandardizationStats& stats,
                     const TrainOptions& opt, const CheckpointData* resume) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainOptions o = opt;
  o.model.validate();
  const int batch = o.schedule.batch_size;
  if (static_cast<int>(patches.size()) < std::max(batch, 2))
    throw DataError("pretrain: need at least max(batch_size, 2) patches, got " +
                    std::to_string(patches.size()));
  o.schedule.steps_per_epoch = static_cast<int>(patches.size()) / batch;
  o.schedule.validate();

  SwinModel<float> model(o.model, ModelTask::kPretrain, o.schedule.seed);
  Optim optim(model);
  Rng run_rng(o.schedule.seed);

  // Stage every patch once: resize to the model input, standardize for the
  // network, and derive loss weights from the raw dB values.
  std::vector<PretrainItem> items;
  items.reserve(patches.size());
  for (const auto& p : patches) {
    const SarPatch sized = resize_patch(p, o.model.input_size);
    PretrainItem item;
    item.standardized = standardize(sized, stats);
    item.target = patch_to_chw(item.standardized);
    if (o.weight_mode == WeightMode::kSar)
      item.weights = compute_weight_map(sized);
    else
      item.weights = WeightMap(sized.height(), sized.width(), 1.0f);
    if (o.weight_hook) o.weight_hook(item.weights);
    items.push_back(std::move(item));
  }

  if (resume) restore(model, optim, run_rng, *resume);
  const int start_epoch = static_cast<int>(optim.global_step / o.schedule.steps_per_epoch);

  RunReport report;
  report.config_echo = config_echo_json(o);
  report.source_version = SARW_VERSION;

  CheckpointWriter writer(o.out_dir, o.keep_checkpoints);
  CheckpointData last_good = snapshot(model, optim, run_rng);
  const int mask_grid = o.model.mask_grid();

  for (int epoch = start_epoch; epoch < o.schedule.total_epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    const auto order = epoch_order(items.size(), o.schedule.seed, epoch);
    double loss_sum = 0.0;
    double lr_last = 0.0;

    auto run_step = [&](int step) {
      const int base = step * batch;
      std::vector<MixMask> masks;
      std::vector<const PretrainItem*> src_a(batch), src_b(batch);
      std::vector<StandardizedPatch> mixed_store;
      masks.reserve(batch);
      mixed_store.reserve(batch);
      for (int i = 0; i < batch; ++i) {
        src_a[i] = &items[order[base + i]];
        src_b[i] = &items[order[base + (batch - 1 - i)]];  // batch-flip pairing
        const uint64_t uid = static_cast<uint64_t>(optim.global_step) * batch + i;
        Rng mask_rng = Rng::fork(o.schedule.seed, rng_stream::kMask, uid);
        masks.push_back(sample_mask(mask_grid, o.mask_ratio, o.model.mask_unit, mask_rng));
        mixed_store.push_back(
            mix(src_a[i]->standardized, src_b[i]->standardized, masks.back()).mixed);
      }
      std::vector<const StandardizedPatch*> mixed_views;
      for (const auto& m : mixed_store) mixed_views.push_back(&m);

      const Tensor<float> input = pack_images<float>(mixed_views);
      auto encoded = model.encode(input, &masks);
      auto [pred_a_tok, pred_b_tok] = model.decode_dual(encoded.final_tokens, masks);

      const Tensor<float> pred_a = assemble_prediction(pred_a_tok->value, o.model);
      const Tensor<float> pred_b = assemble_prediction(pred_b_tok->value, o.model);

      Tensor<float> grad_a({batch, 2, o.model.input_size, o.model.input_size});
      Tensor<float> grad_b = Tensor<float>::zeros_like(grad_a);
      double batch_loss = 0.0;
      const float inv_batch = 1.0f / static_cast<float>(batch);
      for (int i = 0; i < batch; ++i) {
        const auto selector = reconstruction_selector(masks[i], o.model.input_size);
        const WeightMap routed = route_weights(selector, src_a[i]->weights, src_b[i]->weights);
        const auto loss = weighted_dual_reconstruction_loss(
            slice_sample(pred_a, i), slice_sample(pred_b, i), src_a[i]->target, src_b[i]->target,
            selector, routed, o.model.mask_unit);
        batch_loss += loss.loss;
        const size_t stride = loss.grad1.numel();
        for (size_t k = 0; k < stride; ++k) {
          grad_a.data[static_cast<size_t>(i) * stride + k] = loss.grad1.data[k] * inv_batch;
          grad_b.data[static_cast<size_t>(i) * stride + k] = loss.grad2.data[k] * inv_batch;
        }
      }
      batch_loss /= batch;

      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite loss at step " + std::to_string(optim.global_step));

      nn::backward<float>({{pred_a_tok, image_to_tokens(grad_a, o.model)},
                           {pred_b_tok, image_to_tokens(grad_b, o.model)}});
      lr_last = lr_at(std::min(optim.global_step, o.schedule.total_steps()), o.schedule);
      optim.step(model, o.schedule, /*head_only=*/false);
      loss_sum += batch_loss;
    };

    for (int step = 0; step < o.schedule.steps_per_epoch; ++step) {
      try {
        run_step(step);
      } catch (const NumericError& e) {
        // Divergence: stop and hand back the last good checkpoint.
        report.aborted = true;
        report.abort_reason = e.what();
        report.wall_seconds = seconds_since(t0);
        if (!o.out_dir.empty()) report.save(o.out_dir);
        return {last_good, report};
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / o.schedule.steps_per_epoch;
    rec.lr_last = lr_last;
    rec.wall_seconds = seconds_since(te);
    report.epochs.push_back(rec);

    last_good = snapshot(model, optim, run_rng);
    writer.on_epoch(epoch, rec.mean_loss, last_good);
  }

  report.wall_seconds = seconds_since(t0);
  if (!o.out_dir.empty()) report.save(o.out_dir);
  return {last_good, report};
}

// ---------------------------------------------------------------------------
// Classification fine-tuning
// ---------------------------------------------------------------------------

namespace {

struct ClassItem {
  StandardizedPatch standardized;
  std::vector<uint8_t> labels;
};

std::vector<ClassItem> prepare_class_items(const std::vector<LabeledPatch>& in, int input_size,
                                           const StandardizationStats& stats, int label_count) {
  std::vector<ClassItem> out;
  out.reserve(in.size());
  for (const auto& lp : in) {
    if (static_cast<int>(lp.labels.size()) != label_count)
      throw ConfigError("finetune_classify: label vector length " +
                        std::to_string(lp.labels.size()) + " does not match label_count " +
                        std::to_string(label_count));
    ClassItem item;
    item.standardized = standardize(resize_patch(lp.patch, input_size), stats);
    item.labels = lp.labels;
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<std::vector<double>> class_scores(SwinModel<float>& model,
                                              const std::vector<ClassItem>& items,
                                              int batch_size) {
  std::vector<std::vector<double>> scores;
  scores.reserve(items.size());
  for (size_t base = 0; base < items.size(); base += batch_size) {
    const size_t end = std::min(items.size(), base + batch_size);
    std::vector<const StandardizedPatch*> views;
    for (size_t i = base; i < end; ++i) views.push_back(&items[i].standardized);
    auto logits = model.classify(model.encode(pack_images<float>(views), nullptr).final_tokens);
    const int k = logits->value.dim(1);
    for (size_t i = base; i < end; ++i) {
      std::vector<double> row(k);
      for (int j = 0; j < k; ++j)
        row[j] = logits->value.data[(i - base) * k + j];
      scores.push_back(std::move(row));
    }
  }
  return scores;
}

MetricReport metrics_from_items(SwinModel<float>& model, const std::vector<ClassItem>& items,
                                int batch_size) {
  const auto scores = class_scores(model, items, batch_size);
  std::vector<std::vector<uint8_t>> labels;
  labels.reserve(items.size());
  for (const auto& it : items) labels.push_back(it.labels);
  return aggregate_macro_micro(scores, labels);
}

}  // namespace

MetricReport evaluate_classify(SwinModel<float>& model, const std::vector<LabeledPatch>& test,
                               const StandardizationStats& stats, int batch_size) {
  const auto items = prepare_class_items(test, model.config().input_size, stats,
                                         model.config().label_count);
  return metrics_from_items(model, items, batch_size);
}

TrainResult finetune_classify(const std::vector<LabeledPatch>& train,
                              const std::vector<LabeledPatch>& val,
                              const std::vector<LabeledPatch>& test,
                              const StandardizationStats& stats, const TrainOptions& opt,
                              const CheckpointData* init_encoder) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainOptions o = opt;
  o.model.validate();
  if (train.empty()) throw DataError("finetune_classify: empty training set");
  const int batch = o.schedule.batch_size;
  o.schedule.steps_per_epoch =
      std::max(1, static_cast<int>(train.size()) / batch);
  o.schedule.validate();

  SwinModel<float> model(o.model, ModelTask::kClassify, o.schedule.seed);
  if (init_encoder) model.import_blobs(init_encoder->blobs, /*encoder_only=*/true);
  if (o.head_only)
    for (auto& p : model.params())
      if (p.name.rfind("head.", 0) != 0) p.var->requires_grad = false;

  Optim optim(model);
  Rng run_rng(o.schedule.seed);
  const auto train_items = prepare_class_items(train, o.model.input_size, stats, o.model.label_count);
  const auto val_items = prepare_class_items(val, o.model.input_size, stats, o.model.label_count);
  const auto test_items = prepare_class_items(test, o.model.input_size, stats, o.model.label_count);

  RunReport report;
  report.config_echo = config_echo_json(o);
  report.source_version = SARW_VERSION;
  CheckpointWriter writer(o.out_dir, o.keep_checkpoints);
  CheckpointData last_good = snapshot(model, optim, run_rng);

  for (int epoch = 0; epoch < o.schedule.total_epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    const auto order = epoch_order(train_items.size(), o.schedule.seed, epoch);
    double loss_sum = 0.0;
    double lr_last = 0.0;

    for (int step = 0; step < o.schedule.steps_per_epoch; ++step) {
      const int base = step * batch;
      const int count = std::min<int>(batch, static_cast<int>(train_items.size()) - base);
      std::vector<const StandardizedPatch*> views;
      std::vector<const ClassItem*> batch_items;
      for (int i = 0; i < count; ++i) {
        batch_items.push_back(&train_items[order[base + i]]);
        views.push_back(&batch_items.back()->standardized);
      }

      auto logits = model.classify(model.encode(pack_images<float>(views), nullptr).final_tokens);
      const int k = o.model.label_count;
      Tensor<float> seed({count, k});
      double batch_loss = 0.0;
      for (int i = 0; i < count; ++i) {
        std::vector<float> row(logits->value.data.begin() + static_cast<size_t>(i) * k,
                               logits->value.data.begin() + static_cast<size_t>(i + 1) * k);
        const auto loss = multilabel_soft_margin_loss(row, batch_items[i]->labels);
        batch_loss += loss.loss;
        for (int j = 0; j < k; ++j)
          seed.data[static_cast<size_t>(i) * k + j] = loss.grad[j] / count;
      }
      batch_loss /= count;

      if (!std::isfinite(batch_loss)) {
        report.aborted = true;
        report.abort_reason = "non-finite loss at step " + std::to_string(optim.global_step);
        report.wall_seconds = seconds_since(t0);
        if (!o.out_dir.empty()) report.save(o.out_dir);
        return {last_good, report};
      }
      nn::backward(logits, std::move(seed));
      lr_last = lr_at(std::min(optim.global_step, o.schedule.total_steps()), o.schedule);
      optim.step(model, o.schedule, o.head_only);
      loss_sum += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / o.schedule.steps_per_epoch;
    rec.lr_last = lr_last;
    rec.wall_seconds = seconds_since(te);
    report.epochs.push_back(rec);

    last_good = snapshot(model, optim, run_rng);
    // Best checkpoint tracks validation macro AP when a val split exists.
    double selection = rec.mean_loss;
    if (!val_items.empty())
      selection = -metrics_from_items(model, val_items, batch).macro.ap;
    writer.on_epoch(epoch, selection, last_good);
  }

  if (!test_items.empty()) report.final_metrics = metrics_from_items(model, test_items, batch);
  report.wall_seconds = seconds_since(t0);
  if (!o.out_dir.empty()) report.save(o.out_dir);
  return {last_good, report};
}

// ---------------------------------------------------------------------------
// Flood fine-tuning
// ---------------------------------------------------------------------------

namespace {

const StandardizedPatch& flood_image(const FloodData& data, const std::string& id) {
  auto it = data.images.find(id);
  if (it == data.images.end()) throw DataError("flood pair references unknown image '" + id + "'");
  return it->second;
}

/// Mean over tiles of (query - reference) pooled tile features.
std::vector<float> pooled_difference(const Tensor<float>& ref_feats,
                                     const Tensor<float>& qry_feats) {
  const int tiles = ref_feats.dim(0), c = ref_feats.dim(1);
  std::vector<float> out(c, 0.0f);
  for (int t = 0; t < tiles; ++t)
    for (int j = 0; j < c; ++j)
      out[j] += (qry_feats.data[static_cast<size_t>(t) * c + j] -
                 ref_feats.data[static_cast<size_t>(t) * c + j]) /
                tiles;
  return out;
}

}  // namespace

MetricReport evaluate_flood(SwinModel<float>& model, const FloodData& data,
                            const std::vector<FloodPair>& pairs) {
  std::vector<uint8_t> preds, labels;
  for (const auto& pair : pairs) {
    auto logits = flood_pair_logits(model, flood_image(data, pair.reference_id),
                                    flood_image(data, pair.query_id));
    preds.push_back(logits->value.data[1] > logits->value.data[0] ? 1 : 0);
    labels.push_back(pair.flood ? 1 : 0);
  }
  MetricReport report;
  report.binary = binary_report(preds, labels);
  return report;
}

TrainResult finetune_flood(const FloodData& data, const TrainOptions& opt,
                           const CheckpointData* init_encoder) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainOptions o = opt;
  o.model.validate();
  if (data.train_pairs.empty()) throw DataError("finetune_flood: empty pair set");
  const int batch = o.schedule.batch_size;
  o.schedule.steps_per_epoch = std::max(1, static_cast<int>(data.train_pairs.size()) / batch);
  o.schedule.validate();

  SwinModel<float> model(o.model, ModelTask::kFlood, o.schedule.seed);
  if (init_encoder) model.import_blobs(init_encoder->blobs, /*encoder_only=*/true);
  if (o.head_only)
    for (auto& p : model.params())
      if (p.name.rfind("head.", 0) != 0) p.var->requires_grad = false;

  Optim optim(model);
  Rng run_rng(o.schedule.seed);
  RunReport report;
  report.config_echo = config_echo_json(o);
  report.source_version = SARW_VERSION;
  CheckpointWriter writer(o.out_dir, o.keep_checkpoints);
  CheckpointData last_good = snapshot(model, optim, run_rng);

  // Frozen encoder: cache pooled tile features once per unique image and
  // standardize the pooled differences with train-set statistics. The
  // standardization is a fixed affine reparametrization, so the trained head
  // is still one linear map over the raw differences; it only conditions the
  // optimization.
  std::map<std::string, Tensor<float>> feature_cache;
  const int c4 = o.model.stage_channels[3];
  std::vector<double> diff_mean(c4, 0.0), diff_scale(c4, 1.0);
  if (o.head_only) {
    for (const auto& [id, image] : data.images)
      feature_cache.emplace(id, tile_features(model, image));
    std::vector<double> var(c4, 0.0);
    for (const auto& pair : data.train_pairs) {
      const auto diff =
          pooled_difference(feature_cache.at(pair.reference_id), feature_cache.at(pair.query_id));
      for (int j = 0; j < c4; ++j) diff_mean[j] += diff[j] / data.train_pairs.size();
    }
    for (const auto& pair : data.train_pairs) {
      const auto diff =
          pooled_difference(feature_cache.at(pair.reference_id), feature_cache.at(pair.query_id));
      for (int j = 0; j < c4; ++j) {
        const double d = diff[j] - diff_mean[j];
        var[j] += d * d / data.train_pairs.size();
      }
    }
    for (int j = 0; j < c4; ++j) diff_scale[j] = 1.0 / std::max(std::sqrt(var[j]), 1e-9);
  }

  auto pair_logits = [&](const FloodPair& pair) {
    if (o.head_only) {
      const auto diff =
          pooled_difference(feature_cache.at(pair.reference_id), feature_cache.at(pair.query_id));
      Tensor<float> t({1, c4});
      for (int j = 0; j < c4; ++j)
        t.data[j] = static_cast<float>((diff[j] - diff_mean[j]) * diff_scale[j]);
      return model.flood_head(nn::constant(std::move(t)));
    }
    return flood_pair_logits(model, flood_image(data, pair.reference_id),
                             flood_image(data, pair.query_id));
  };

  // Rewrites a head trained on standardized differences into the equivalent
  // head over raw differences, so checkpoints and the full forward pass
  // compute the same function the training saw.
  auto fold_standardization = [&](float* w, float* b) {
    double bias_shift[2] = {0.0, 0.0};
    for (int j = 0; j < c4; ++j)
      for (int k = 0; k < 2; ++k) {
        const double folded = static_cast<double>(w[j * 2 + k]) * diff_scale[j];
        bias_shift[k] += folded * diff_mean[j];
        w[j * 2 + k] = static_cast<float>(folded);
      }
    for (int k = 0; k < 2; ++k) b[k] = static_cast<float>(b[k] - bias_shift[k]);
  };
  auto fold_blobs = [&](CheckpointData& ckpt) {
    if (!o.head_only) return;
    NamedBlob* wb = nullptr;
    NamedBlob* bb = nullptr;
    for (auto& blob : ckpt.blobs) {
      if (blob.name == "head.flood.w") wb = &blob;
      if (blob.name == "head.flood.b") bb = &blob;
    }
    if (wb && bb) fold_standardization(wb->data.data(), bb->data.data());
  };
  fold_blobs(last_good);

  // Validation selection for the frozen encoder uses the cached features.
  auto quick_f1 = [&](const std::vector<FloodPair>& pairs) {
    if (!o.head_only) return evaluate_flood(model, data, pairs).binary->f1;
    std::vector<uint8_t> preds, labels;
    for (const auto& pair : pairs) {
      auto logits = pair_logits(pair);
      preds.push_back(logits->value.data[1] > logits->value.data[0] ? 1 : 0);
      labels.push_back(pair.flood ? 1 : 0);
    }
    return binary_report(preds, labels).f1;
  };

  for (int epoch = 0; epoch < o.schedule.total_epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    const auto order = epoch_order(data.train_pairs.size(), o.schedule.seed, epoch);
    double loss_sum = 0.0;
    double lr_last = 0.0;

    for (int step = 0; step < o.schedule.steps_per_epoch; ++step) {
      const int base = step * batch;
      const int count = std::min<int>(batch, static_cast<int>(data.train_pairs.size()) - base);
      double batch_loss = 0.0;
      std::vector<std::pair<nn::Var<float>, Tensor<float>>> seeds;
      for (int i = 0; i < count; ++i) {
        const auto& pair = data.train_pairs[order[base + i]];
        auto logits = pair_logits(pair);
        const std::vector<float> row = {logits->value.data[0], logits->value.data[1]};
        const auto loss = binary_cross_entropy_logits(row, pair.flood ? 1 : 0);
        batch_loss += loss.loss;
        Tensor<float> seed({1, 2});
        seed.data[0] = loss.grad[0] / count;
        seed.data[1] = loss.grad[1] / count;
        seeds.emplace_back(logits, std::move(seed));
      }
      batch_loss /= count;

      if (!std::isfinite(batch_loss)) {
        report.aborted = true;
        report.abort_reason = "non-finite loss at step " + std::to_string(optim.global_step);
        report.wall_seconds = seconds_since(t0);
        if (!o.out_dir.empty()) report.save(o.out_dir);
        return {last_good, report};
      }
      nn::backward(seeds);
      lr_last = lr_at(std::min(optim.global_step, o.schedule.total_steps()), o.schedule);
      optim.step(model, o.schedule, o.head_only);
      loss_sum += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / o.schedule.steps_per_epoch;
    rec.lr_last = lr_last;
    rec.wall_seconds = seconds_since(te);
    report.epochs.push_back(rec);

    last_good = snapshot(model, optim, run_rng);
    fold_blobs(last_good);
    double selection = rec.mean_loss;
    if (!data.val_pairs.empty()) selection = -quick_f1(data.val_pairs);
    writer.on_epoch(epoch, selection, last_good);
  }

  if (o.head_only) {
    // Fold the live head as well; final evaluation runs the full forward.
    float* w = nullptr;
    float* b = nullptr;
    for (auto& p : model.params()) {
      if (p.name == "head.flood.w") w = p.var->value.data.data();
      if (p.name == "head.flood.b") b = p.var->value.data.data();
    }
    if (w && b) fold_standardization(w, b);
    last_good = snapshot(model, optim, run_rng);
  }
  if (!data.test_pairs.empty())
    report.final_metrics = evaluate_flood(model, data, data.test_pairs);
  report.wall_seconds = seconds_since(t0);
  if (!o.out_dir.empty()) report.save(o.out_dir);
  return {last_good, report};
}

SwinModel<float> model_from_checkpoint(const ModelConfig& cfg, ModelTask task,
                                       const CheckpointData& ckpt) {
  if (ckpt.fingerprint != config_fingerprint(cfg, task))
    throw ConfigError("checkpoint fingerprint does not match the requested configuration");
  SwinModel<float> model(cfg, task, /*init_seed=*/0);
  model.import_blobs(ckpt.blobs);
  return model;
}

}  // namespace sarw
