#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "sarw/error.hpp"

namespace sarw {

/// Dense row-major N-d array. Plain value type; all layout logic lives in
/// the operations that use it.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) throw ShapeError("Tensor: data size does not match shape");
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
  }

  size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  /// Product of all dimensions except the last (row count for 2D views).
  int rows() const {
    size_t r = 1;
    for (size_t i = 0; i + 1 < shape.size(); ++i) r *= static_cast<size_t>(shape[i]);
    return static_cast<int>(r);
  }
  int cols() const { return shape.empty() ? 0 : shape.back(); }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

  static Tensor full(std::vector<int> s, T value) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  Tensor reshaped(std::vector<int> s) const {
    if (numel_of(s) != data.size()) throw ShapeError("Tensor::reshaped: element count changes");
    return Tensor(std::move(s), data);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape[i]);
    return s + ")";
  }
};

// Row-major GEMM kernels. Loop orders keep the innermost loop contiguous so
// the compiler can vectorize; matrices here are small enough that blocking
// buys nothing measurable.

/// c[m,n] (+)= a[m,k] * b[k,n]
template <typename T>
void gemm_nn(int m, int n, int k, const T* __restrict a, const T* __restrict b, T* __restrict c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const T av = arow[l];
      const T* brow = b + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// c[m,n] (+)= a[m,k] * b[n,k]^T
/// Eight independent accumulators break the FMA latency chain; the sum
/// order is fixed, so results stay deterministic.
template <typename T>
void gemm_nt(int m, int n, int k, const T* __restrict a, const T* __restrict b, T* __restrict c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<size_t>(j) * k;
      T acc[8] = {};
      int l = 0;
      for (; l + 8 <= k; l += 8)
        for (int u = 0; u < 8; ++u) acc[u] += arow[l + u] * brow[l + u];
      T total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
      for (; l < k; ++l) total += arow[l] * brow[l];
      crow[j] = accumulate ? crow[j] + total : total;
    }
  }
}

/// c[m,n] (+)= a[k,m]^T * b[k,n]
template <typename T>
void gemm_tn(int m, int n, int k, const T* __restrict a, const T* __restrict b, T* __restrict c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, T(0));
  for (int l = 0; l < k; ++l) {
    const T* arow = a + static_cast<size_t>(l) * m;
    const T* brow = b + static_cast<size_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      T* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace sarw
