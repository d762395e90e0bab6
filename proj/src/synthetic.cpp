#include "sarw/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "sarw/error.hpp"
#include "sarw/radiometry.hpp"
#include "sarw/tile_io.hpp"

namespace sarw {

void SyntheticSceneSpec::validate() const {
  if (size < 1) throw ConfigError("synthetic scene: size must be positive");
  if (region_count < 1) throw ConfigError("synthetic scene: region_count must be positive");
  if (speckle_looks < 1) throw ConfigError("synthetic scene: speckle_looks must be >= 1");
  if (speckle_looks_bright < 0)
    throw ConfigError("synthetic scene: speckle_looks_bright must be 0 or >= 1");
  if (!region_means_db.empty() &&
      static_cast<int>(region_means_db.size()) != region_count)
    throw ConfigError("synthetic scene: region_means_db size must equal region_count");
  for (double m : region_means_db)
    if (m < kDbClampMin || m > kDbClampMax)
      throw ConfigError("synthetic scene: region mean outside [-50, 10] dB");
  if (mean_lo_db < kDbClampMin || mean_hi_db > kDbClampMax || mean_lo_db > mean_hi_db)
    throw ConfigError("synthetic scene: bad mean sampling range");
}

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec) {
  spec.validate();
  Rng rng = Rng::fork(spec.seed, rng_stream::kScene, 0);

  // Voronoi sites, then region means, then speckle: fixed draw order keeps
  // scenes bit-identical for a given seed.
  std::vector<double> site_y(spec.region_count), site_x(spec.region_count);
  for (int k = 0; k < spec.region_count; ++k) {
    site_y[k] = rng.uniform(0.0, spec.size);
    site_x[k] = rng.uniform(0.0, spec.size);
  }

  SyntheticScene scene;
  scene.region_means_db = spec.region_means_db;
  if (scene.region_means_db.empty()) {
    scene.region_means_db.resize(spec.region_count);
    if (spec.region_spread_db > 0.0) {
      const double base = rng.uniform(spec.mean_lo_db, spec.mean_hi_db);
      const double half = spec.region_spread_db * 0.5;
      for (auto& m : scene.region_means_db)
        m = std::clamp(base + rng.uniform(-half, half), spec.mean_lo_db, spec.mean_hi_db);
    } else {
      for (auto& m : scene.region_means_db) m = rng.uniform(spec.mean_lo_db, spec.mean_hi_db);
    }
  }

  std::vector<double> mean_linear(spec.region_count);
  std::vector<double> region_looks(spec.region_count, spec.speckle_looks);
  for (int k = 0; k < spec.region_count; ++k) {
    mean_linear[k] = std::pow(10.0, scene.region_means_db[k] / 10.0);
    if (spec.speckle_looks_bright >= 1) {
      const double t = std::clamp((scene.region_means_db[k] - spec.mean_lo_db) /
                                      std::max(spec.mean_hi_db - spec.mean_lo_db, 1e-9),
                                  0.0, 1.0);
      region_looks[k] = std::max(
          1.0, std::exp(std::log(static_cast<double>(spec.speckle_looks)) * (1.0 - t) +
                        std::log(static_cast<double>(spec.speckle_looks_bright)) * t));
    }
  }

  scene.regions = Grid<int>(spec.size, spec.size);
  for (int r = 0; r < spec.size; ++r)
    for (int c = 0; c < spec.size; ++c) {
      double best = 1e300;
      int best_k = 0;
      for (int k = 0; k < spec.region_count; ++k) {
        const double dy = r + 0.5 - site_y[k];
        const double dx = c + 0.5 - site_x[k];
        const double d = dy * dy + dx * dx;
        if (d < best) {
          best = d;
          best_k = k;
        }
      }
      scene.regions.at(r, c) = best_k;
    }

  scene.patch.vh_db = GridF(spec.size, spec.size);
  scene.patch.vv_db = GridF(spec.size, spec.size);
  for (GridF* channel : {&scene.patch.vh_db, &scene.patch.vv_db}) {
    for (int r = 0; r < spec.size; ++r)
      for (int c = 0; c < spec.size; ++c) {
        const double looks = region_looks[scene.regions.at(r, c)];
        const double speckle = rng.gamma(looks, 1.0 / looks);
        const double power = mean_linear[scene.regions.at(r, c)] * speckle;
        // Guard against log of denormal-scale power from extreme draws.
        const double db = 10.0 * std::log10(std::max(power, 1e-30));
        channel->at(r, c) = std::clamp(static_cast<float>(db), kDbClampMin, kDbClampMax);
      }
  }
  return scene;
}

std::vector<int> band_occupancy_labels(const SyntheticScene& scene, int label_count,
                                       double lo_db, double hi_db, double min_fraction) {
  const int regions = static_cast<int>(scene.region_means_db.size());
  std::vector<double> region_fraction(regions, 0.0);
  const double inv = 1.0 / static_cast<double>(scene.regions.size());
  for (int id : scene.regions.v) region_fraction[id] += inv;

  std::vector<double> band_fraction(label_count, 0.0);
  const double width = (hi_db - lo_db) / label_count;
  for (int k = 0; k < regions; ++k) {
    int band = static_cast<int>(std::floor((scene.region_means_db[k] - lo_db) / width));
    band = std::clamp(band, 0, label_count - 1);
    band_fraction[band] += region_fraction[k];
  }

  std::vector<int> labels;
  for (int b = 0; b < label_count; ++b)
    if (band_fraction[b] >= min_fraction) labels.push_back(b);
  return labels;
}

namespace {

std::string split_for_index(int i, int count) {
  // 80/10/10 by sorted index; the leading slices go to train.
  const int train_end = (count * 8) / 10;
  const int val_end = (count * 9) / 10;
  if (i < train_end) return "train";
  if (i < val_end) return "val";
  return "test";
}

ManifestEntry write_scene(const std::filesystem::path& dir, const std::string& id,
                          const SarPatch& patch) {
  ManifestEntry e;
  e.id = id;
  e.vh = id + "_vh.tile";
  e.vv = id + "_vv.tile";
  write_tile(dir / e.vh, patch.vh_db);
  write_tile(dir / e.vv, patch.vv_db);
  return e;
}

std::string index_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05d", prefix, i);
  return buf;
}

}  // namespace

DatasetManifest synthesize_dataset(const SyntheticSceneSpec& base, const SynthDatasetOptions& opt,
                                   const std::filesystem::path& out_dir) {
  if (opt.count < 1) throw ConfigError("synthesize_dataset: count must be positive");
  std::filesystem::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.root = out_dir;
  for (int i = 0; i < opt.count; ++i) {
    SyntheticSceneSpec spec = base;
    spec.seed = base.seed + static_cast<uint64_t>(i);
    const SyntheticScene scene = generate_synthetic_scene(spec);
    ManifestEntry e = write_scene(out_dir, index_id("patch_", i), scene.patch);
    e.labels = band_occupancy_labels(scene, opt.label_count, opt.label_lo_db, opt.label_hi_db,
                                     opt.label_min_fraction);
    e.has_labels = true;
    e.split = split_for_index(i, opt.count);
    manifest.entries.push_back(std::move(e));
  }
  save_manifest(manifest);
  return manifest;
}

DatasetManifest synthesize_flood_dataset(const SyntheticSceneSpec& base,
                                         const FloodBenchmarkOptions& opt,
                                         const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.root = out_dir;

  const int total = opt.train_footprints + opt.test_footprints;
  for (int f = 0; f < total; ++f) {
    const std::string split = f < opt.train_footprints ? "train" : "test";
    const std::string footprint = index_id("fp_", f);

    // One base layout per footprint; every image redraws speckle.
    SyntheticSceneSpec layout = base;
    layout.seed = base.seed + 1000003ull * static_cast<uint64_t>(f);
    const SyntheticScene ref_scene = generate_synthetic_scene(layout);

    // The largest region plays open water when flooded.
    std::vector<double> fractions(ref_scene.region_means_db.size(), 0.0);
    for (int id : ref_scene.regions.v) fractions[id] += 1.0;
    const int water_region = static_cast<int>(
        std::max_element(fractions.begin(), fractions.end()) - fractions.begin());

    int timestamp = 0;
    auto emit = [&](bool flood) {
      SyntheticSceneSpec image = layout;
      image.region_means_db = ref_scene.region_means_db;
      if (flood)
        image.region_means_db[water_region] =
            std::max(image.region_means_db[water_region] - opt.depression_db,
                     static_cast<double>(kDbClampMin));
      image.seed = layout.seed + 17ull + static_cast<uint64_t>(timestamp);
      const SyntheticScene scene = generate_synthetic_scene(image);
      const std::string id = footprint + "_t" + std::to_string(timestamp);
      ManifestEntry e = write_scene(out_dir, id, scene.patch);
      e.split = split;
      e.footprint = footprint;
      e.flood = flood;
      e.timestamp = index_id("ts", timestamp);
      manifest.entries.push_back(std::move(e));
      ++timestamp;
    };

    for (int i = 0; i < opt.non_flood_images; ++i) emit(false);
    for (int i = 0; i < opt.flood_images; ++i) emit(true);
  }
  save_manifest(manifest);
  return manifest;
}

std::vector<SarPatch> generate_patch_set(const SyntheticSceneSpec& base, int count) {
  std::vector<SarPatch> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SyntheticSceneSpec spec = base;
    spec.seed = base.seed + static_cast<uint64_t>(i);
    SyntheticScene scene = generate_synthetic_scene(spec);
    scene.patch.id = index_id("patch_", i);
    out.push_back(std::move(scene.patch));
  }
  return out;
}

}  // namespace sarw
