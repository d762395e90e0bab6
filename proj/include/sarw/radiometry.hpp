#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "sarw/grid.hpp"

namespace sarw {

/// dB range accepted on ingestion; Sentinel-1 GRD backscatter lives here.
constexpr float kDbClampMin = -50.0f;
constexpr float kDbClampMax = 10.0f;

namespace detail {

template <typename T>
inline void require_finite(const Grid<T>& g, const char* what) {
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (!std::isfinite(static_cast<double>(g.at(r, c))))
        throw RadiometryError(std::string(what) + ": non-finite value at (" +
                              std::to_string(r) + ", " + std::to_string(c) + ")");
}

}  // namespace detail

/// sigma0(linear) = 10^(sigma0(dB) / 10), elementwise.
template <typename T>
Grid<T> db_to_linear(const Grid<T>& db) {
  detail::require_finite(db, "db_to_linear");
  Grid<T> out(db.rows, db.cols);
  for (size_t i = 0; i < db.v.size(); ++i)
    out.v[i] = static_cast<T>(std::pow(10.0, static_cast<double>(db.v[i]) / 10.0));
  return out;
}

/// Inverse of db_to_linear; input must be strictly positive.
template <typename T>
Grid<T> linear_to_db(const Grid<T>& linear) {
  Grid<T> out(linear.rows, linear.cols);
  for (int r = 0; r < linear.rows; ++r)
    for (int c = 0; c < linear.cols; ++c) {
      const double x = static_cast<double>(linear.at(r, c));
      if (!(x > 0.0) || !std::isfinite(x))
        throw RadiometryError("linear_to_db: nonpositive or non-finite value at (" +
                              std::to_string(r) + ", " + std::to_string(c) + ")");
      out.at(r, c) = static_cast<T>(10.0 * std::log10(x));
    }
  return out;
}

/// (vh + vv) / 2 elementwise in linear power.
template <typename T>
Grid<T> average_linear(const Grid<T>& vh, const Grid<T>& vv) {
  if (!vh.same_shape(vv)) throw ShapeError("average_linear: channel dimensions differ");
  Grid<T> out(vh.rows, vh.cols);
  for (size_t i = 0; i < vh.v.size(); ++i)
    out.v[i] = static_cast<T>((static_cast<double>(vh.v[i]) + static_cast<double>(vv.v[i])) * 0.5);
  return out;
}

/// Min-max normalization to [0, 1]; a constant grid maps to all zeros.
template <typename T>
Grid<T> min_max_normalize(const Grid<T>& g) {
  detail::require_finite(g, "min_max_normalize");
  Grid<T> out(g.rows, g.cols);
  if (g.v.empty()) return out;
  const auto [mn_it, mx_it] = std::minmax_element(g.v.begin(), g.v.end());
  const double mn = static_cast<double>(*mn_it);
  const double mx = static_cast<double>(*mx_it);
  if (mx == mn) {
    std::fill(out.v.begin(), out.v.end(), T(0));
    return out;
  }
  const double inv = 1.0 / (mx - mn);
  for (size_t i = 0; i < g.v.size(); ++i)
    out.v[i] = static_cast<T>((static_cast<double>(g.v[i]) - mn) * inv);
  return out;
}

/// Average linear backscatter of a patch: dB->linear per channel, then mean.
/// Uses the raw dB values, not standardized network inputs.
inline GridD patch_average_linear(const SarPatch& patch) {
  patch.check_consistent();
  const GridD vh = db_to_linear(patch.vh_db.cast<double>());
  const GridD vv = db_to_linear(patch.vv_db.cast<double>());
  return average_linear(vh, vv);
}

/// Per-pixel loss weights w = exp(1 - norm(avg_linear)), each in [1, e].
/// Normalization scope is the single patch.
inline WeightMap compute_weight_map(const SarPatch& patch) {
  const GridD norm = min_max_normalize(patch_average_linear(patch));
  WeightMap out(norm.rows, norm.cols);
  for (size_t i = 0; i < norm.v.size(); ++i)
    out.v[i] = static_cast<float>(std::exp(1.0 - norm.v[i]));
  return out;
}

/// Clamps a dB grid to the accepted ingestion range in place.
inline void clamp_db_inplace(GridF& g) {
  for (auto& x : g.v) x = std::clamp(x, kDbClampMin, kDbClampMax);
}

}  // namespace sarw
