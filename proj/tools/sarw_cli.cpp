#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sarw/radiometry.hpp"
#include "sarw/run_config.hpp"
#include "sarw/tile_io.hpp"
#include "sarw/trainer.hpp"

namespace {

using namespace sarw;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// CLI flags that override values from the config file.
struct Overrides {
  std::string config_path;
  std::string preset;
  std::string weight_mode;
  std::string out_dir;
  std::string checkpoint;
  std::string resume;
  uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  bool head_only = false;

  void attach(CLI::App* cmd, bool config_required = true) {
    cmd->add_option("--config", config_path, "Run configuration JSON")
        ->required(config_required);
    cmd->add_option("--seed", seed, "Override the run seed")->each([this](const std::string&) {
      seed_set = true;
    });
    cmd->add_flag("--deterministic", deterministic, "Force deterministic mode");
    cmd->add_option("--preset", preset, "Model preset: desk or paper");
    cmd->add_option("--weight-mode", weight_mode, "Loss weighting: sar or uniform");
    cmd->add_option("--out-dir", out_dir, "Override the output directory");
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint path (encoder init or eval model)");
  }

  RunConfig load() const {
    RunConfig cfg = parse_run_config(config_path);
    if (!preset.empty()) {
      ModelConfig base;
      if (preset == "desk")
        base = ModelConfig::desk();
      else if (preset == "paper")
        base = ModelConfig::paper();
      else
        throw ConfigError("--preset must be 'desk' or 'paper'");
      base.label_count = cfg.model.label_count;
      base.input_size = cfg.model.input_size;
      cfg.model = base;
      cfg.preset = preset;
    }
    if (!weight_mode.empty()) {
      if (weight_mode == "sar")
        cfg.weight_mode = WeightMode::kSar;
      else if (weight_mode == "uniform")
        cfg.weight_mode = WeightMode::kUniform;
      else
        throw ConfigError("--weight-mode must be 'sar' or 'uniform'");
    }
    if (seed_set) {
      cfg.seed = seed;
      cfg.schedule.seed = seed;
    }
    if (deterministic) cfg.deterministic = true;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    return cfg;
  }
};

TrainOptions train_options(const RunConfig& cfg) {
  TrainOptions opt;
  opt.model = cfg.model;
  opt.schedule = cfg.schedule;
  opt.weight_mode = cfg.weight_mode;
  opt.deterministic = cfg.deterministic;
  opt.head_only = cfg.head_only;
  opt.mask_ratio = cfg.mask_ratio;
  opt.out_dir = cfg.out_dir;
  return opt;
}

std::vector<SarPatch> load_split(const DatasetManifest& manifest, const std::string& split) {
  std::vector<SarPatch> out;
  for (const auto* e : manifest.split_entries(split)) out.push_back(load_patch(manifest, *e));
  return out;
}

std::vector<LabeledPatch> load_labeled_split(const DatasetManifest& manifest,
                                             const std::string& split, int label_count) {
  std::vector<LabeledPatch> out;
  for (const auto* e : manifest.split_entries(split)) {
    LabeledPatch lp;
    lp.patch = load_patch(manifest, *e);
    lp.labels.assign(label_count, 0);
    if (!e->has_labels)
      throw DataError("entry '" + e->id + "' has no labels; classification needs labeled data");
    for (int k : e->labels) {
      if (k < 0 || k >= label_count)
        throw DataError("entry '" + e->id + "': label " + std::to_string(k) +
                        " outside label_count " + std::to_string(label_count));
      lp.labels[k] = 1;
    }
    out.push_back(std::move(lp));
  }
  return out;
}

FloodData load_flood_data(const DatasetManifest& manifest, const StandardizationStats& stats) {
  FloodData data;
  data.train_pairs = build_flood_pairs(manifest, "train").pairs;
  data.val_pairs = build_flood_pairs(manifest, "val").pairs;
  data.test_pairs = build_flood_pairs(manifest, "test").pairs;
  auto require_image = [&](const std::string& id) {
    if (data.images.count(id)) return;
    const auto& entry = find_entry(manifest, id);
    data.images.emplace(id, standardize(load_patch(manifest, entry), stats));
  };
  for (const auto* pairs : {&data.train_pairs, &data.val_pairs, &data.test_pairs})
    for (const auto& p : *pairs) {
      require_image(p.reference_id);
      require_image(p.query_id);
    }
  return data;
}

int finish_run(const TrainResult& result, const std::string& what) {
  if (result.report.aborted) {
    std::cerr << what << " aborted: " << result.report.abort_reason << "\n";
    return kExitNumeric;
  }
  std::cout << result.report.summary_json() << "\n";
  return 0;
}

int cmd_weightmap(const std::string& vh_path, const std::string& vv_path,
                  const std::string& out_path, const std::string& stats_path) {
  SarPatch patch;
  patch.id = out_path;
  patch.vh_db = read_tile(vh_path);
  patch.vv_db = read_tile(vv_path);
  clamp_db_inplace(patch.vh_db);
  clamp_db_inplace(patch.vv_db);
  const WeightMap weights = compute_weight_map(patch);
  write_tile(out_path, weights);

  double mn = 1e300, mx = -1e300, sum = 0;
  for (float w : weights.v) {
    mn = std::min(mn, static_cast<double>(w));
    mx = std::max(mx, static_cast<double>(w));
    sum += w;
  }
  const json stats = {{"min", mn}, {"max", mx}, {"mean", sum / weights.size()}};
  if (!stats_path.empty()) {
    std::ofstream out(stats_path, std::ios::trunc);
    if (!out) throw IoError("cannot write stats: " + stats_path);
    out << stats.dump(2) << "\n";
  }
  std::cout << stats.dump() << "\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, int count, const std::string& out_dir,
              uint64_t seed, bool seed_set) {
  SynthConfig cfg = parse_synth_config(spec_path);
  if (seed_set) cfg.scene.seed = seed;
  if (cfg.flood) {
    const auto manifest = synthesize_flood_dataset(cfg.scene, *cfg.flood, out_dir);
    std::cout << "wrote " << manifest.entries.size() << " flood tiles to " << out_dir << "\n";
  } else {
    SynthDatasetOptions opt = cfg.labels;
    opt.count = count;
    const auto manifest = synthesize_dataset(cfg.scene, opt, out_dir);
    std::cout << "wrote " << manifest.entries.size() << " tiles to " << out_dir << "\n";
  }
  return 0;
}

int cmd_pretrain(const Overrides& flags) {
  RunConfig cfg = flags.load();
  TrainOptions opt = train_options(cfg);

  std::vector<SarPatch> patches;
  StandardizationStats stats;
  if (cfg.synthetic) {
    if (cfg.synthetic_count < 2) throw ConfigError("data.synthetic.count must be >= 2");
    patches = generate_patch_set(*cfg.synthetic, cfg.synthetic_count);
    stats = compute_standardization(patches);
  } else {
    const auto manifest = scan_manifest(cfg.resolved_root());
    stats = compute_standardization(manifest, "train");
    patches = load_split(manifest, "train");
  }

  CheckpointData resume;
  const CheckpointData* resume_ptr = nullptr;
  if (!flags.resume.empty()) {
    resume = read_checkpoint(flags.resume);
    resume_ptr = &resume;
  }
  return finish_run(pretrain(patches, stats, opt, resume_ptr), "pretrain");
}

int cmd_finetune_classify(const Overrides& flags) {
  RunConfig cfg = flags.load();
  TrainOptions opt = train_options(cfg);
  const auto manifest = scan_manifest(cfg.resolved_root());
  const auto stats = compute_standardization(manifest, "train");
  const auto train = load_labeled_split(manifest, "train", cfg.model.label_count);
  const auto val = load_labeled_split(manifest, "val", cfg.model.label_count);
  const auto test = load_labeled_split(manifest, "test", cfg.model.label_count);

  CheckpointData init;
  const CheckpointData* init_ptr = nullptr;
  if (!cfg.checkpoint.empty()) {
    init = read_checkpoint(cfg.checkpoint);
    init_ptr = &init;
  }
  return finish_run(finetune_classify(train, val, test, stats, opt, init_ptr),
                    "finetune-classify");
}

int cmd_finetune_flood(const Overrides& flags) {
  RunConfig cfg = flags.load();
  TrainOptions opt = train_options(cfg);
  const auto manifest = scan_manifest(cfg.resolved_root());
  const auto stats = compute_standardization(manifest, "train");
  const auto data = load_flood_data(manifest, stats);

  CheckpointData init;
  const CheckpointData* init_ptr = nullptr;
  if (!cfg.checkpoint.empty()) {
    init = read_checkpoint(cfg.checkpoint);
    init_ptr = &init;
  }
  return finish_run(finetune_flood(data, opt, init_ptr), "finetune-flood");
}

int cmd_eval(const Overrides& flags) {
  RunConfig cfg = flags.load();
  if (cfg.checkpoint.empty()) throw ConfigError("eval requires a checkpoint");
  const auto ckpt = read_checkpoint(cfg.checkpoint);

  MetricReport report;
  if (cfg.task == "classify") {
    auto model = model_from_checkpoint(cfg.model, ModelTask::kClassify, ckpt);
    const auto manifest = scan_manifest(cfg.resolved_root());
    const auto stats = compute_standardization(manifest, "train");
    const auto test = load_labeled_split(manifest, "test", cfg.model.label_count);
    report = evaluate_classify(model, test, stats, cfg.schedule.batch_size);
  } else if (cfg.task == "flood") {
    auto model = model_from_checkpoint(cfg.model, ModelTask::kFlood, ckpt);
    const auto manifest = scan_manifest(cfg.resolved_root());
    const auto stats = compute_standardization(manifest, "train");
    const auto data = load_flood_data(manifest, stats);
    report = evaluate_flood(model, data, data.test_pairs);
  } else {
    throw ConfigError("eval requires task: 'classify' or 'flood'");
  }

  std::cout << report.to_json() << "\n";
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "eval.json", std::ios::trunc);
    out << report.to_json() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backscatter-weighted masked-autoencoder pretraining for dual-pol SAR tiles"};
  app.require_subcommand(1);

  // weightmap
  std::string vh_path, vv_path, out_path, stats_path;
  auto* weightmap = app.add_subcommand(
      "weightmap", "Compute the per-pixel loss weight raster for one tile pair");
  weightmap->add_option("vh", vh_path, "VH channel tile")->required();
  weightmap->add_option("vv", vv_path, "VV channel tile")->required();
  weightmap->add_option("-o,--output", out_path, "Output weight tile")->required();
  weightmap->add_option("--stats", stats_path, "Write {min,max,mean} JSON here");

  // synth
  std::string synth_spec, synth_out;
  int synth_count = 10;
  uint64_t synth_seed = 0;
  bool synth_seed_set = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic speckle dataset");
  synth->add_option("--spec", synth_spec, "Scene spec JSON")->required();
  synth->add_option("--count", synth_count, "Number of tiles (80/10/10 split)");
  synth->add_option("-o,--output", synth_out, "Output dataset directory")->required();
  synth->add_option("--seed", synth_seed, "Override the scene seed")
      ->each([&](const std::string&) { synth_seed_set = true; });

  Overrides pre_flags, cls_flags, flood_flags, eval_flags;
  auto* pre = app.add_subcommand("pretrain", "Self-supervised pretraining");
  pre_flags.attach(pre);
  pre->add_option("--resume", pre_flags.resume, "Resume from a checkpoint");
  auto* cls = app.add_subcommand("finetune-classify", "Multi-label fine-tuning");
  cls_flags.attach(cls);
  auto* flood = app.add_subcommand("finetune-flood", "Pairwise flood fine-tuning");
  flood_flags.attach(flood);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval_flags.attach(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (weightmap->parsed()) return cmd_weightmap(vh_path, vv_path, out_path, stats_path);
    if (synth->parsed()) return cmd_synth(synth_spec, synth_count, synth_out, synth_seed,
                                          synth_seed_set);
    if (pre->parsed()) return cmd_pretrain(pre_flags);
    if (cls->parsed()) return cmd_finetune_classify(cls_flags);
    if (flood->parsed()) return cmd_finetune_flood(flood_flags);
    if (eval->parsed()) return cmd_eval(eval_flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
