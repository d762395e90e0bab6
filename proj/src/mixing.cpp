#include "sarw/mixing.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "sarw/error.hpp"

namespace sarw {

MixMask sample_mask(int grid_side, double ratio, int mask_unit, Rng& rng) {
  if (grid_side < 1) throw ConfigError("sample_mask: grid side must be positive");
  const int total = grid_side * grid_side;
  const int k = static_cast<int>(std::lround(ratio * total));
  if (!(ratio > 0.0 && ratio < 1.0) || k <= 0 || k >= total)
    throw ConfigError("sample_mask: ratio " + std::to_string(ratio) +
                      " is degenerate for a " + std::to_string(grid_side) + "x" +
                      std::to_string(grid_side) + " grid");

  std::vector<int> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates; the first k slots become the selected units.
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(total - i)));
    std::swap(idx[i], idx[j]);
  }

  MixMask mask;
  mask.unit_grid = Grid<uint8_t>(grid_side, grid_side, 0);
  mask.mask_unit = mask_unit;
  mask.ratio = ratio;
  for (int i = 0; i < k; ++i) mask.unit_grid.v[idx[i]] = 1;
  return mask;
}

MixMask complement(const MixMask& mask) {
  MixMask out = mask;
  for (auto& u : out.unit_grid.v) u = u ? 0 : 1;
  return out;
}

Grid<uint8_t> downsample_mask(const MixMask& mask, int input_size, int stage_stride) {
  if (stage_stride < 1 || mask.mask_unit % stage_stride != 0)
    throw ConfigError("downsample_mask: stride " + std::to_string(stage_stride) +
                      " does not divide mask unit " + std::to_string(mask.mask_unit));
  const int side = input_size / stage_stride;
  const int tokens_per_unit = mask.mask_unit / stage_stride;
  Grid<uint8_t> out(side, side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      out.at(r, c) = mask.unit_grid.at(r / tokens_per_unit, c / tokens_per_unit);
  return out;
}

Grid<uint8_t> mask_to_pixels(const MixMask& mask, int input_size) {
  return downsample_mask(mask, input_size, 1);
}

MixedSample mix(const StandardizedPatch& a, const StandardizedPatch& b, const MixMask& mask,
                WeightMap weight_a, WeightMap weight_b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError("mix: input dimensions differ");
  if (a.height() != a.width() || a.height() != mask.grid_side() * mask.mask_unit)
    throw ShapeError("mix: mask does not cover the input grid");

  MixedSample out;
  out.source_a = a.id;
  out.source_b = b.id;
  out.mask = mask;
  out.weight_a = std::move(weight_a);
  out.weight_b = std::move(weight_b);
  out.mixed.id = a.id + "+" + b.id;
  out.mixed.vh = GridF(a.height(), a.width());
  out.mixed.vv = GridF(a.height(), a.width());
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c) {
      const bool from_b = mask.unit_grid.at(r / mask.mask_unit, c / mask.mask_unit) != 0;
      out.mixed.vh.at(r, c) = from_b ? b.vh.at(r, c) : a.vh.at(r, c);
      out.mixed.vv.at(r, c) = from_b ? b.vv.at(r, c) : a.vv.at(r, c);
    }
  return out;
}

WeightMap route_weights(const Grid<uint8_t>& selector, const WeightMap& weight_a,
                        const WeightMap& weight_b) {
  if (!selector.same_shape(weight_a) || !selector.same_shape(weight_b))
    throw ShapeError("route_weights: selector and weight map dimensions differ");
  WeightMap out(selector.rows, selector.cols);
  for (size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = selector.v[i] ? weight_b.v[i] : weight_a.v[i];
  return out;
}

Grid<uint8_t> reconstruction_selector(const MixMask& mask, int input_size) {
  Grid<uint8_t> selector = mask_to_pixels(mask, input_size);
  for (auto& s : selector.v) s = s ? 0 : 1;
  return selector;
}

WeightMap route_weights(const MixedSample& sample) {
  const int size = sample.mixed.height();
  return route_weights(reconstruction_selector(sample.mask, size), sample.weight_a,
                       sample.weight_b);
}

}  // namespace sarw
