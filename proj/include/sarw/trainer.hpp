#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sarw/checkpoint.hpp"
#include "sarw/dataset.hpp"
#include "sarw/metrics.hpp"
#include "sarw/model.hpp"
#include "sarw/schedule.hpp"

namespace sarw {

enum class WeightMode { kSar, kUniform };

const char* weight_mode_name(WeightMode mode);

struct TrainOptions {
  ModelConfig model;
  TrainSchedule schedule;
  WeightMode weight_mode = WeightMode::kSar;
  bool deterministic = true;   // single-producer preparation, fixed order
  bool head_only = false;      // freeze everything except the task head
  double mask_ratio = 0.5;
  std::string out_dir;         // empty: no files, results stay in memory
  int keep_checkpoints = 2;
  /// Test hook: applied to every computed weight map before use.
  std::function<void(WeightMap&)> weight_hook;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr_last = 0.0;
  double wall_seconds = 0.0;
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  std::optional<MetricReport> final_metrics;
  double wall_seconds = 0.0;
  std::string config_echo;
  std::string source_version;
  bool aborted = false;
  std::string abort_reason;

  std::string summary_json() const;
  /// Writes report.jsonl (one record per epoch) plus summary.json.
  void save(const std::filesystem::path& dir) const;
};

struct TrainResult {
  CheckpointData checkpoint;  // final state (or last good state when aborted)
  RunReport report;
};

/// Self-supervised pretraining on mixed pairs. Patches are resized to the
/// model input when needed; weight maps come from the raw dB values of the
/// resized patches. Deterministic given (seed, config, data): rerunning
/// yields a bit-identical checkpoint.
TrainResult pretrain(const std::vector<SarPatch>& patches, const StandardizationStats& stats,
                     const TrainOptions& opt, const CheckpointData* resume = nullptr);

struct LabeledPatch {
  SarPatch patch;
  std::vector<uint8_t> labels;  // multi-hot, length label_count
};

/// Encoder + classification head fine-tuning with the multi-label
/// soft-margin loss; returns test-split metrics.
TrainResult finetune_classify(const std::vector<LabeledPatch>& train,
                              const std::vector<LabeledPatch>& val,
                              const std::vector<LabeledPatch>& test,
                              const StandardizationStats& stats, const TrainOptions& opt,
                              const CheckpointData* init_encoder = nullptr);

struct FloodData {
  std::map<std::string, StandardizedPatch> images;  // keyed by patch id
  std::vector<FloodPair> train_pairs;
  std::vector<FloodPair> val_pairs;
  std::vector<FloodPair> test_pairs;
};

/// Pairwise flood fine-tuning with cross-entropy; returns binary metrics on
/// the test pairs. With head_only the per-image tile features are computed
/// once and the head trains on cached pooled differences.
TrainResult finetune_flood(const FloodData& data, const TrainOptions& opt,
                           const CheckpointData* init_encoder = nullptr);

MetricReport evaluate_classify(SwinModel<float>& model, const std::vector<LabeledPatch>& test,
                               const StandardizationStats& stats, int batch_size);

MetricReport evaluate_flood(SwinModel<float>& model, const FloodData& data,
                            const std::vector<FloodPair>& pairs);

/// Builds a model and restores every parameter from the checkpoint; the
/// fingerprint must match the (config, task) pair exactly.
SwinModel<float> model_from_checkpoint(const ModelConfig& cfg, ModelTask task,
                                       const CheckpointData& ckpt);

}  // namespace sarw
