#pragma once

#include <string>
#include <vector>

#include "sarw/grid.hpp"
#include "sarw/manifest.hpp"

namespace sarw {

/// Per-channel mean/std of the training split, in dB units.
struct StandardizationStats {
  double mean_vh = 0.0;
  double std_vh = 1.0;
  double mean_vv = 0.0;
  double std_vv = 1.0;
};

/// Network-input form of a patch: (x - mean) / std per channel.
struct StandardizedPatch {
  std::string id;
  GridF vh;
  GridF vv;

  int height() const { return vh.rows; }
  int width() const { return vh.cols; }
};

struct LoadStats {
  int nan_replaced = 0;
};

/// A (non-flood reference, query) pair for the flood downstream task.
/// Patches are loaded on demand through the owning manifest; both members
/// have already passed the zero-coverage filter.
struct FloodPair {
  std::string reference_id;
  std::string query_id;
  bool flood = false;  // label of the query image
};

struct FloodPairSet {
  std::vector<FloodPair> pairs;
  int skipped_footprints = 0;  // footprints with no usable non-flood reference
};

/// Loads a patch from its manifest entry: reads both channel tiles, replaces
/// NaNs with the clamp floor (-50 dB), clamps to [-50, 10] dB.
SarPatch load_patch(const DatasetManifest& manifest, const ManifestEntry& entry,
                    LoadStats* stats = nullptr);

const ManifestEntry& find_entry(const DatasetManifest& manifest, const std::string& id);

/// Bilinear resize in dB space, per channel, to target x target pixels.
SarPatch resize_patch(const SarPatch& p, int target);

/// Streams all pixels of a split through Welford accumulation.
/// Throws DataError on empty splits and on zero-variance channels.
StandardizationStats compute_standardization(const DatasetManifest& manifest,
                                             const std::string& split = "train");

/// Same accumulation over an in-memory patch set.
StandardizationStats compute_standardization(const std::vector<SarPatch>& patches);

StandardizedPatch standardize(const SarPatch& p, const StandardizationStats& stats);

/// Inverse of standardize, for round-trip checks and reconstruction previews.
SarPatch unstandardize(const StandardizedPatch& p, const StandardizationStats& stats);

/// Fraction of pixels whose stored value is exactly zero in either channel.
double zero_coverage_fraction(const SarPatch& p);

/// Builds (non-flood reference, any other image) pairs per footprint,
/// excluding members with zero coverage >= 0.25, deterministically ordered
/// by (footprint, reference timestamp, query timestamp).
FloodPairSet build_flood_pairs(const DatasetManifest& manifest, const std::string& split);

}  // namespace sarw
