#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sarw/model.hpp"
#include "sarw/schedule.hpp"
#include "sarw/synthetic.hpp"
#include "sarw/trainer.hpp"

namespace sarw {

/// Parsed run configuration file. The JSON schema is strict: unknown keys
/// are rejected at every level so typos cannot silently change a run.
struct RunConfig {
  std::string preset = "desk";  // "desk" | "paper"
  bool deterministic = true;
  WeightMode weight_mode = WeightMode::kSar;
  uint64_t seed = 0;
  std::string task;  // "pretrain" | "classify" | "flood" (required for eval)
  std::string out_dir;
  std::string checkpoint;  // encoder init for fine-tuning, model for eval
  bool head_only = false;
  double mask_ratio = 0.5;

  ModelConfig model;
  TrainSchedule schedule;

  std::string data_root;
  std::optional<SyntheticSceneSpec> synthetic;
  int synthetic_count = 0;

  /// Resolves the dataset root, falling back to $SARW_DATA_ROOT.
  std::filesystem::path resolved_root() const;
};

RunConfig parse_run_config(const std::filesystem::path& path);

/// Synthetic generation config for the `synth` command: scene fields plus
/// optional "labels" and "flood" blocks.
struct SynthConfig {
  SyntheticSceneSpec scene;
  SynthDatasetOptions labels;
  std::optional<FloodBenchmarkOptions> flood;
};

SynthConfig parse_synth_config(const std::filesystem::path& path);

}  // namespace sarw
