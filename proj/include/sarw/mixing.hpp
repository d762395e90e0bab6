#pragma once

#include <cstdint>
#include <string>

#include "sarw/dataset.hpp"
#include "sarw/grid.hpp"
#include "sarw/rng.hpp"

namespace sarw {

/// Binary mix mask on the coarse unit grid. A unit value of 1 means the mixed
/// image shows source B there; 0 shows source A. The unit footprint equals
/// the encoder's final-stage token footprint so provenance stays exact at
/// every stage.
struct MixMask {
  Grid<uint8_t> unit_grid;
  int mask_unit = 32;
  double ratio = 0.5;

  int grid_side() const { return unit_grid.rows; }
  int ones() const {
    int n = 0;
    for (uint8_t u : unit_grid.v) n += u;
    return n;
  }
};

/// Uniformly random mask with exactly round(ratio * G^2) units set.
MixMask sample_mask(int grid_side, double ratio, int mask_unit, Rng& rng);

MixMask complement(const MixMask& mask);

/// Expands the unit grid to the token grid of a stage with the given stride.
/// Each token inherits its covering unit's value exactly; stage_stride must
/// divide mask_unit.
Grid<uint8_t> downsample_mask(const MixMask& mask, int input_size, int stage_stride);

/// Unit grid replicated to pixel resolution.
Grid<uint8_t> mask_to_pixels(const MixMask& mask, int input_size);

/// A mixed pretraining input together with everything the loss needs later.
struct MixedSample {
  StandardizedPatch mixed;
  std::string source_a;
  std::string source_b;
  MixMask mask;
  WeightMap weight_a;
  WeightMap weight_b;
};

/// Per-pixel source selection: A where the covering unit is 0, B where 1.
/// Weight maps ride along unmodified.
MixedSample mix(const StandardizedPatch& a, const StandardizedPatch& b, const MixMask& mask,
                WeightMap weight_a = {}, WeightMap weight_b = {});

/// Routes per-pixel weights by the reconstruction selector: where the
/// selector is 0 the first target (source A) is being reconstructed and the
/// weight comes from A's map; where 1 it comes from B's.
WeightMap route_weights(const Grid<uint8_t>& selector, const WeightMap& weight_a,
                        const WeightMap& weight_b);

/// Selector for the dual-reconstruction loss, at pixel resolution. Source A
/// is reconstructed where the mix shows B (its content is hidden there), so
/// the selector is the complement of the mix mask.
Grid<uint8_t> reconstruction_selector(const MixMask& mask, int input_size);

/// Convenience: routed weights for a mixed sample under that selector.
WeightMap route_weights(const MixedSample& sample);

}  // namespace sarw
