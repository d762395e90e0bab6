#include "sarw/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sarw/error.hpp"

namespace sarw {

using nlohmann::json;

namespace {

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
  }
}

void read_array4(const json& obj, const char* key, std::array<int, 4>& out) {
  if (!obj.contains(key)) return;
  const auto v = obj.at(key).get<std::vector<int>>();
  if (v.size() != 4)
    throw ConfigError("config: '" + std::string(key) + "' must hold exactly 4 values");
  std::copy(v.begin(), v.end(), out.begin());
}

void parse_model(const json& obj, ModelConfig& model) {
  reject_unknown(obj, {"input_size", "in_channels", "patch_size", "stage_channels", "stage_heads",
                       "stage_depths", "window_sizes", "decoder_depth", "decoder_dim",
                       "decoder_heads", "mask_unit", "label_count"},
                 "model");
  read_into(obj, "input_size", model.input_size);
  read_into(obj, "in_channels", model.in_channels);
  read_into(obj, "patch_size", model.patch_size);
  read_array4(obj, "stage_channels", model.stage_channels);
  read_array4(obj, "stage_heads", model.stage_heads);
  read_array4(obj, "stage_depths", model.stage_depths);
  read_array4(obj, "window_sizes", model.window_sizes);
  read_into(obj, "decoder_depth", model.decoder_depth);
  read_into(obj, "decoder_dim", model.decoder_dim);
  read_into(obj, "decoder_heads", model.decoder_heads);
  read_into(obj, "mask_unit", model.mask_unit);
  read_into(obj, "label_count", model.label_count);
}

void parse_schedule(const json& obj, TrainSchedule& schedule) {
  reject_unknown(obj, {"peak_lr", "warmup_epochs", "total_epochs", "weight_decay", "beta1",
                       "beta2", "eps", "batch_size"},
                 "schedule");
  read_into(obj, "peak_lr", schedule.peak_lr);
  read_into(obj, "warmup_epochs", schedule.warmup_epochs);
  read_into(obj, "total_epochs", schedule.total_epochs);
  read_into(obj, "weight_decay", schedule.weight_decay);
  read_into(obj, "beta1", schedule.beta1);
  read_into(obj, "beta2", schedule.beta2);
  read_into(obj, "eps", schedule.eps);
  read_into(obj, "batch_size", schedule.batch_size);
}

SyntheticSceneSpec parse_scene(const json& obj) {
  reject_unknown(obj, {"size", "region_count", "region_means_db", "mean_lo_db", "mean_hi_db",
                       "region_spread_db", "speckle_looks", "speckle_looks_bright", "seed", "count"},
                 "synthetic");
  SyntheticSceneSpec scene;
  read_into(obj, "size", scene.size);
  read_into(obj, "region_count", scene.region_count);
  read_into(obj, "region_means_db", scene.region_means_db);
  read_into(obj, "mean_lo_db", scene.mean_lo_db);
  read_into(obj, "mean_hi_db", scene.mean_hi_db);
  read_into(obj, "region_spread_db", scene.region_spread_db);
  read_into(obj, "speckle_looks", scene.speckle_looks);
  read_into(obj, "speckle_looks_bright", scene.speckle_looks_bright);
  read_into(obj, "seed", scene.seed);
  return scene;
}

}  // namespace

std::filesystem::path RunConfig::resolved_root() const {
  if (!data_root.empty()) return data_root;
  if (const char* env = std::getenv("SARW_DATA_ROOT")) return env;
  throw ConfigError("no dataset root: set data.root in the config or SARW_DATA_ROOT");
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  const json doc = load_json(path);
  reject_unknown(doc, {"preset", "deterministic", "weight_mode", "seed", "task", "out_dir",
                       "checkpoint", "head_only", "mask_ratio", "model", "schedule", "data"},
                 "top level");

  RunConfig cfg;
  read_into(doc, "preset", cfg.preset);
  if (cfg.preset == "desk")
    cfg.model = ModelConfig::desk();
  else if (cfg.preset == "paper")
    cfg.model = ModelConfig::paper();
  else
    throw ConfigError("config: preset must be 'desk' or 'paper'");

  read_into(doc, "deterministic", cfg.deterministic);
  if (doc.contains("weight_mode")) {
    const std::string mode = doc.at("weight_mode").get<std::string>();
    if (mode == "sar")
      cfg.weight_mode = WeightMode::kSar;
    else if (mode == "uniform")
      cfg.weight_mode = WeightMode::kUniform;
    else
      throw ConfigError("config: weight_mode must be 'sar' or 'uniform'");
  }
  read_into(doc, "seed", cfg.seed);
  read_into(doc, "task", cfg.task);
  read_into(doc, "out_dir", cfg.out_dir);
  read_into(doc, "checkpoint", cfg.checkpoint);
  read_into(doc, "head_only", cfg.head_only);
  read_into(doc, "mask_ratio", cfg.mask_ratio);

  if (doc.contains("model")) parse_model(doc.at("model"), cfg.model);
  if (doc.contains("schedule")) parse_schedule(doc.at("schedule"), cfg.schedule);
  cfg.schedule.seed = cfg.seed;
  cfg.model.validate();

  if (doc.contains("data")) {
    const json& data = doc.at("data");
    reject_unknown(data, {"root", "synthetic"}, "data");
    read_into(data, "root", cfg.data_root);
    if (data.contains("synthetic")) {
      cfg.synthetic = parse_scene(data.at("synthetic"));
      int count = 0;
      read_into(data.at("synthetic"), "count", count);
      cfg.synthetic_count = count;
    }
  }
  return cfg;
}

SynthConfig parse_synth_config(const std::filesystem::path& path) {
  const json doc = load_json(path);
  reject_unknown(doc, {"size", "region_count", "region_means_db", "mean_lo_db", "mean_hi_db",
                       "region_spread_db", "speckle_looks", "speckle_looks_bright", "seed", "labels", "flood"},
                 "top level");
  SynthConfig cfg;
  {
    json scene = doc;
    scene.erase("labels");
    scene.erase("flood");
    cfg.scene = parse_scene(scene);
  }
  if (doc.contains("labels")) {
    const json& labels = doc.at("labels");
    reject_unknown(labels, {"label_count", "lo_db", "hi_db", "min_fraction"}, "labels");
    read_into(labels, "label_count", cfg.labels.label_count);
    read_into(labels, "lo_db", cfg.labels.label_lo_db);
    read_into(labels, "hi_db", cfg.labels.label_hi_db);
    read_into(labels, "min_fraction", cfg.labels.label_min_fraction);
  }
  if (doc.contains("flood")) {
    const json& flood = doc.at("flood");
    reject_unknown(flood,
                   {"train_footprints", "test_footprints", "non_flood_images", "flood_images",
                    "depression_db"},
                   "flood");
    FloodBenchmarkOptions opt;
    read_into(flood, "train_footprints", opt.train_footprints);
    read_into(flood, "test_footprints", opt.test_footprints);
    read_into(flood, "non_flood_images", opt.non_flood_images);
    read_into(flood, "flood_images", opt.flood_images);
    read_into(flood, "depression_db", opt.depression_db);
    cfg.flood = opt;
  }
  return cfg;
}

}  // namespace sarw
