#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sarw/grid.hpp"
#include "sarw/manifest.hpp"
#include "sarw/rng.hpp"

namespace sarw {

/// Desk-scale stand-in for real acquisitions: piecewise-constant linear-power
/// Voronoi scenes multiplied by unit-mean Gamma speckle, then converted to dB.
struct SyntheticSceneSpec {
  int size = 128;
  int region_count = 6;
  std::vector<double> region_means_db;  // explicit per-region means, else sampled
  double mean_lo_db = -28.0;            // sampling range when means are not given
  double mean_hi_db = -4.0;
  /// When positive, a scene base level is drawn from [mean_lo, mean_hi] and
  /// region means scatter at most this many dB around it (clamped to the
  /// range); when zero or negative, region means are sampled independently.
  double region_spread_db = 0.0;
  int speckle_looks = 4;
  /// When >= 1, looks interpolate log-linearly from `speckle_looks` at
  /// mean_lo_db to this value at mean_hi_db, so dark regions are smooth and
  /// bright ones noisy, the way calm water and clutter behave; 0 keeps the
  /// look count constant.
  int speckle_looks_bright = 0;
  uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScene {
  SarPatch patch;
  Grid<int> regions;                   // per-pixel Voronoi region index
  std::vector<double> region_means_db; // the means actually used
};

/// Deterministic given (spec, spec.seed). Both channels share the region
/// means; speckle is drawn independently per channel.
SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec);

/// Multi-label bits over backscatter bands: bit k is set when regions whose
/// mean falls into band k cover at least `min_fraction` of the scene.
std::vector<int> band_occupancy_labels(const SyntheticScene& scene, int label_count,
                                       double lo_db, double hi_db, double min_fraction = 0.15);

struct SynthDatasetOptions {
  int count = 10;
  int label_count = 8;
  double label_lo_db = -30.0;
  double label_hi_db = -2.0;
  double label_min_fraction = 0.15;
};

/// Writes `count` labeled tiles plus manifest.json with an 80/10/10
/// train/val/test split by sorted index.
DatasetManifest synthesize_dataset(const SyntheticSceneSpec& base, const SynthDatasetOptions& opt,
                                   const std::filesystem::path& out_dir);

struct FloodBenchmarkOptions {
  int train_footprints = 16;
  int test_footprints = 8;
  int non_flood_images = 2;  // per footprint
  int flood_images = 2;      // per footprint
  double depression_db = 6.0;
};

/// Flood-pair benchmark: each footprint is one base scene; flood images
/// depress the largest region (open-water mimic) by `depression_db` and all
/// images carry independent speckle.
DatasetManifest synthesize_flood_dataset(const SyntheticSceneSpec& base,
                                         const FloodBenchmarkOptions& opt,
                                         const std::filesystem::path& out_dir);

/// In-memory variants used by tests and the acceptance suite.
std::vector<SarPatch> generate_patch_set(const SyntheticSceneSpec& base, int count);

}  // namespace sarw
