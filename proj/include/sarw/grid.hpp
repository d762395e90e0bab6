#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sarw/error.hpp"

namespace sarw {

/// Dense row-major 2D raster of scalar values.
template <typename T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Grid() = default;
  Grid(int r, int c, T fill = T(0)) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  T& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }

  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return rows == o.rows && cols == o.cols;
  }

  template <typename U>
  Grid<U> cast() const {
    Grid<U> out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using GridF = Grid<float>;
using GridD = Grid<double>;

/// Dual-polarization (VH, VV) backscatter tile in dB, the unit of model input.
struct SarPatch {
  std::string id;
  GridF vh_db;
  GridF vv_db;

  int height() const { return vh_db.rows; }
  int width() const { return vh_db.cols; }

  void check_consistent() const {
    if (!vh_db.same_shape(vv_db))
      throw ShapeError("SarPatch '" + id + "': VH and VV dimensions differ");
  }
};

/// Per-pixel reconstruction-loss weights, each in [1, e].
using WeightMap = GridF;

}  // namespace sarw
