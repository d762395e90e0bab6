#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sarw/tensor.hpp"

namespace sarw {
namespace nn {

// Define-by-run reverse-mode tape over Tensor<T>. Each forward op returns a
// node holding its value plus a closure that routes the node's gradient into
// its parents. Nodes without grad-requiring ancestors carry no closure, so
// constant subgraphs cost nothing at backward time.

template <typename T>
class Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
class Node {
 public:
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<Var<T>> parents;
  std::function<void(Node<T>&)> backward_op;

  void ensure_grad() {
    if (grad.data.empty()) grad = Tensor<T>::zeros_like(value);
  }
  void zero_grad() { grad = Tensor<T>(); }
};

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_op) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_op = std::move(backward_op);
  }
  return n;
}

/// Accumulates seed gradients at the given roots and runs reverse-mode
/// traversal in topological order (every node is processed only after all of
/// its children).
template <typename T>
void backward(const std::vector<std::pair<Var<T>, Tensor<T>>>& seeds) {
  std::vector<Node<T>*> reachable;
  std::unordered_map<Node<T>*, int> child_count;
  std::vector<Node<T>*> stack;

  for (const auto& [root, seed] : seeds) {
    if (!root->requires_grad) continue;
    if (!root->value.same_shape(seed)) throw ShapeError("backward: seed shape mismatch");
    if (!child_count.count(root.get())) {
      child_count.emplace(root.get(), 0);
      stack.push_back(root.get());
      reachable.push_back(root.get());
    }
    root->ensure_grad();
    for (size_t i = 0; i < seed.data.size(); ++i) root->grad.data[i] += seed.data[i];
  }

  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    for (const auto& p : n->parents) {
      if (!p->requires_grad) continue;
      auto [it, inserted] = child_count.emplace(p.get(), 0);
      ++it->second;
      if (inserted) {
        stack.push_back(p.get());
        reachable.push_back(p.get());
      }
    }
  }

  // Seeds may be interior nodes; discount edges counted above.
  // (A root that is also some node's parent keeps its incoming count.)
  std::vector<Node<T>*> ready;
  for (Node<T>* n : reachable)
    if (child_count[n] == 0) ready.push_back(n);

  size_t processed = 0;
  while (!ready.empty()) {
    Node<T>* n = ready.back();
    ready.pop_back();
    ++processed;
    if (n->backward_op) {
      n->ensure_grad();
      n->backward_op(*n);
    }
    for (const auto& p : n->parents) {
      if (!p->requires_grad) continue;
      if (--child_count[p.get()] == 0) ready.push_back(p.get());
    }
  }
  if (processed != reachable.size())
    throw NumericError("backward: graph traversal incomplete (cycle?)");
}

template <typename T>
void backward(const Var<T>& root, Tensor<T> seed) {
  backward<T>({{root, std::move(seed)}});
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("add: shape mismatch");
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += n.grad.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (size_t i = 0; i < n.grad.data.size(); ++i) b->grad.data[i] += n.grad.data[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("sub: shape mismatch");
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += n.grad.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (size_t i = 0; i < n.grad.data.size(); ++i) b->grad.data[i] -= n.grad.data[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> out = a->value;
  for (auto& x : out.data) x *= c;
  return make_op<T>(std::move(out), {a}, [a, c](Node<T>& n) {
    a->ensure_grad();
    for (size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += c * n.grad.data[i];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
  Tensor<T> out = a->value.reshaped(std::move(shape));
  return make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
    a->ensure_grad();
    for (size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += n.grad.data[i];
  });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  const double inv_sqrt2 = 0.7071067811865475244;
  Tensor<T> out = Tensor<T>::zeros_like(a->value);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const double x = static_cast<double>(a->value.data[i]);
    out.data[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
  }
  return make_op<T>(std::move(out), {a}, [a, inv_sqrt2](Node<T>& n) {
    a->ensure_grad();
    const double inv_sqrt2pi = 0.3989422804014326779;
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      const double x = static_cast<double>(a->value.data[i]);
      const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      a->grad.data[i] += static_cast<T>(cdf + x * pdf) * n.grad.data[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// x[..., K] * w[K, N] + b[N]; leading dimensions are flattened to rows.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const int rows = x->value.rows();
  const int k = x->value.cols();
  if (w->value.rank() != 2 || w->value.dim(0) != k) throw ShapeError("linear: weight shape");
  const int ncols = w->value.dim(1);

  std::vector<int> out_shape = x->value.shape;
  out_shape.back() = ncols;
  Tensor<T> out(out_shape);
  gemm_nn(rows, ncols, k, x->value.data.data(), w->value.data.data(), out.data.data(), false);
  if (b) {
    if (b->value.numel() != static_cast<size_t>(ncols)) throw ShapeError("linear: bias shape");
    for (int r = 0; r < rows; ++r) {
      T* row = out.data.data() + static_cast<size_t>(r) * ncols;
      for (int j = 0; j < ncols; ++j) row[j] += b->value.data[j];
    }
  }

  std::vector<Var<T>> parents = {x, w};
  if (b) parents.push_back(b);
  return make_op<T>(std::move(out), std::move(parents), [x, w, b, rows, k, ncols](Node<T>& n) {
    if (x->requires_grad) {
      x->ensure_grad();
      // dx = dout * w^T as an nn product over a transposed weight copy; the
      // copy is tiny next to the m*k*n work and keeps the kernel vectorized.
      std::vector<T> wt(static_cast<size_t>(ncols) * k);
      for (int r = 0; r < k; ++r)
        for (int j = 0; j < ncols; ++j)
          wt[static_cast<size_t>(j) * k + r] = w->value.data[static_cast<size_t>(r) * ncols + j];
      gemm_nn(rows, k, ncols, n.grad.data.data(), wt.data(), x->grad.data.data(), true);
    }
    if (w->requires_grad) {
      w->ensure_grad();
      gemm_tn(k, ncols, rows, x->value.data.data(), n.grad.data.data(), w->grad.data.data(), true);
    }
    if (b && b->requires_grad) {
      b->ensure_grad();
      for (int r = 0; r < rows; ++r) {
        const T* row = n.grad.data.data() + static_cast<size_t>(r) * ncols;
        for (int j = 0; j < ncols; ++j) b->grad.data[j] += row[j];
      }
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w) {
  return linear(x, w, Var<T>());
}

/// a[B,L,d] x b[B,M,d]^T -> [B,L,M]
template <typename T>
Var<T> bmm_nt(const Var<T>& a, const Var<T>& b) {
  if (a->value.rank() != 3 || b->value.rank() != 3 || a->value.dim(0) != b->value.dim(0) ||
      a->value.dim(2) != b->value.dim(2))
    throw ShapeError("bmm_nt: shape mismatch " + a->value.shape_str() + " vs " +
                     b->value.shape_str());
  const int batch = a->value.dim(0), l = a->value.dim(1), m = b->value.dim(1), d = a->value.dim(2);
  Tensor<T> out({batch, l, m});
  for (int i = 0; i < batch; ++i)
    gemm_nt(l, m, d, a->value.data.data() + static_cast<size_t>(i) * l * d,
            b->value.data.data() + static_cast<size_t>(i) * m * d,
            out.data.data() + static_cast<size_t>(i) * l * m, false);
  return make_op<T>(std::move(out), {a, b}, [a, b, batch, l, m, d](Node<T>& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < batch; ++i)
        gemm_nn(l, d, m, n.grad.data.data() + static_cast<size_t>(i) * l * m,
                b->value.data.data() + static_cast<size_t>(i) * m * d,
                a->grad.data.data() + static_cast<size_t>(i) * l * d, true);
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < batch; ++i)
        gemm_tn(m, d, l, n.grad.data.data() + static_cast<size_t>(i) * l * m,
                a->value.data.data() + static_cast<size_t>(i) * l * d,
                b->grad.data.data() + static_cast<size_t>(i) * m * d, true);
    }
  });
}

/// a[B,L,M] x b[B,M,d] -> [B,L,d]
template <typename T>
Var<T> bmm_nn(const Var<T>& a, const Var<T>& b) {
  if (a->value.rank() != 3 || b->value.rank() != 3 || a->value.dim(0) != b->value.dim(0) ||
      a->value.dim(2) != b->value.dim(1))
    throw ShapeError("bmm_nn: shape mismatch " + a->value.shape_str() + " vs " +
                     b->value.shape_str());
  const int batch = a->value.dim(0), l = a->value.dim(1), m = a->value.dim(2), d = b->value.dim(2);
  Tensor<T> out({batch, l, d});
  for (int i = 0; i < batch; ++i)
    gemm_nn(l, d, m, a->value.data.data() + static_cast<size_t>(i) * l * m,
            b->value.data.data() + static_cast<size_t>(i) * m * d,
            out.data.data() + static_cast<size_t>(i) * l * d, false);
  return make_op<T>(std::move(out), {a, b}, [a, b, batch, l, m, d](Node<T>& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < batch; ++i)
        gemm_nt(l, m, d, n.grad.data.data() + static_cast<size_t>(i) * l * d,
                b->value.data.data() + static_cast<size_t>(i) * m * d,
                a->grad.data.data() + static_cast<size_t>(i) * l * m, true);
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < batch; ++i)
        gemm_tn(m, d, l, a->value.data.data() + static_cast<size_t>(i) * l * m,
                n.grad.data.data() + static_cast<size_t>(i) * l * d,
                b->grad.data.data() + static_cast<size_t>(i) * m * d, true);
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization and attention pieces
// ---------------------------------------------------------------------------

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  double eps = 1e-6) {
  const int rows = x->value.rows();
  const int c = x->value.cols();
  if (gamma->value.numel() != static_cast<size_t>(c) ||
      beta->value.numel() != static_cast<size_t>(c))
    throw ShapeError("layer_norm: affine parameter shape");

  Tensor<T> out = Tensor<T>::zeros_like(x->value);
  // Cache normalized activations and inverse stddevs for the backward pass.
  auto xhat = std::make_shared<std::vector<T>>(x->value.data.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  for (int r = 0; r < rows; ++r) {
    const T* row = x->value.data.data() + static_cast<size_t>(r) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += static_cast<double>(row[j]);
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = static_cast<double>(row[j]) - mean;
      var += d * d;
    }
    var /= c;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = static_cast<T>(istd);
    T* xh = xhat->data() + static_cast<size_t>(r) * c;
    T* orow = out.data.data() + static_cast<size_t>(r) * c;
    for (int j = 0; j < c; ++j) {
      xh[j] = static_cast<T>((static_cast<double>(row[j]) - mean) * istd);
      orow[j] = gamma->value.data[j] * xh[j] + beta->value.data[j];
    }
  }

  return make_op<T>(std::move(out), {x, gamma, beta},
                    [x, gamma, beta, xhat, inv_std, rows, c](Node<T>& n) {
    if (gamma->requires_grad) gamma->ensure_grad();
    if (beta->requires_grad) beta->ensure_grad();
    if (x->requires_grad) x->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const T* dy = n.grad.data.data() + static_cast<size_t>(r) * c;
      const T* xh = xhat->data() + static_cast<size_t>(r) * c;
      if (gamma->requires_grad || beta->requires_grad) {
        for (int j = 0; j < c; ++j) {
          if (gamma->requires_grad) gamma->grad.data[j] += dy[j] * xh[j];
          if (beta->requires_grad) beta->grad.data[j] += dy[j];
        }
      }
      if (x->requires_grad) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
          const double dxh = static_cast<double>(dy[j]) * static_cast<double>(gamma->value.data[j]);
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * static_cast<double>(xh[j]);
        }
        const double mean_dxhat = sum_dxhat / c;
        const double mean_dxhat_xhat = sum_dxhat_xhat / c;
        T* dx = x->grad.data.data() + static_cast<size_t>(r) * c;
        const double istd = static_cast<double>((*inv_std)[r]);
        for (int j = 0; j < c; ++j) {
          const double dxh = static_cast<double>(dy[j]) * static_cast<double>(gamma->value.data[j]);
          dx[j] += static_cast<T>(istd * (dxh - mean_dxhat -
                                          static_cast<double>(xh[j]) * mean_dxhat_xhat));
        }
      }
    }
  });
}

template <typename T>
Var<T> softmax_last(const Var<T>& x) {
  const int rows = x->value.rows();
  const int c = x->value.cols();
  Tensor<T> out = Tensor<T>::zeros_like(x->value);
  for (int r = 0; r < rows; ++r) {
    const T* row = x->value.data.data() + static_cast<size_t>(r) * c;
    T* orow = out.data.data() + static_cast<size_t>(r) * c;
    double mx = -1e300;
    for (int j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      const double e = std::exp(static_cast<double>(row[j]) - mx);
      orow[j] = static_cast<T>(e);
      denom += e;
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < c; ++j) orow[j] = static_cast<T>(static_cast<double>(orow[j]) * inv);
  }
  return make_op<T>(std::move(out), {x}, [x, rows, c](Node<T>& n) {
    x->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const T* y = n.value.data.data() + static_cast<size_t>(r) * c;
      const T* dy = n.grad.data.data() + static_cast<size_t>(r) * c;
      T* dx = x->grad.data.data() + static_cast<size_t>(r) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += static_cast<double>(dy[j]) * static_cast<double>(y[j]);
      for (int j = 0; j < c; ++j)
        dx[j] += static_cast<T>(static_cast<double>(y[j]) * (static_cast<double>(dy[j]) - dot));
    }
  });
}

/// logits[(n*H + h), i, j] += table[idx[i*L + j], h]
template <typename T>
Var<T> add_rel_pos_bias(const Var<T>& logits, const Var<T>& table,
                        std::shared_ptr<std::vector<int>> idx, int heads) {
  const int batch_heads = logits->value.dim(0);
  const int l = logits->value.dim(1);
  if (logits->value.dim(2) != l || batch_heads % heads != 0)
    throw ShapeError("add_rel_pos_bias: logits layout");
  Tensor<T> out = logits->value;
  const size_t ll = static_cast<size_t>(l) * l;
  for (int bh = 0; bh < batch_heads; ++bh) {
    const int h = bh % heads;
    T* slab = out.data.data() + static_cast<size_t>(bh) * ll;
    for (size_t p = 0; p < ll; ++p) slab[p] += table->value.data[(*idx)[p] * heads + h];
  }
  return make_op<T>(std::move(out), {logits, table},
                    [logits, table, idx, heads, batch_heads, ll](Node<T>& n) {
    if (logits->requires_grad) {
      logits->ensure_grad();
      for (size_t i = 0; i < n.grad.data.size(); ++i) logits->grad.data[i] += n.grad.data[i];
    }
    if (table->requires_grad) {
      table->ensure_grad();
      for (int bh = 0; bh < batch_heads; ++bh) {
        const int h = bh % heads;
        const T* slab = n.grad.data.data() + static_cast<size_t>(bh) * ll;
        for (size_t p = 0; p < ll; ++p) table->grad.data[(*idx)[p] * heads + h] += slab[p];
      }
    }
  });
}

/// logits[(n*H + h), i, j] += mask[n, i, j]; the mask carries no gradient.
template <typename T>
Var<T> add_window_mask(const Var<T>& logits, std::shared_ptr<Tensor<T>> mask, int heads) {
  const int batch_heads = logits->value.dim(0);
  const int l = logits->value.dim(1);
  if (mask->dim(0) * heads != batch_heads || mask->dim(1) != l || mask->dim(2) != l)
    throw ShapeError("add_window_mask: mask layout");
  Tensor<T> out = logits->value;
  const size_t ll = static_cast<size_t>(l) * l;
  for (int bh = 0; bh < batch_heads; ++bh) {
    const T* mslab = mask->data.data() + static_cast<size_t>(bh / heads) * ll;
    T* slab = out.data.data() + static_cast<size_t>(bh) * ll;
    for (size_t p = 0; p < ll; ++p) slab[p] += mslab[p];
  }
  return make_op<T>(std::move(out), {logits}, [logits](Node<T>& n) {
    logits->ensure_grad();
    for (size_t i = 0; i < n.grad.data.size(); ++i) logits->grad.data[i] += n.grad.data[i];
  });
}

// ---------------------------------------------------------------------------
// Data movement
// ---------------------------------------------------------------------------

/// out[m, :] = x[idx[m], :]; rows are the flattened leading dimensions.
template <typename T>
Var<T> gather_rows(const Var<T>& x, std::shared_ptr<std::vector<int>> idx,
                   std::vector<int> out_shape) {
  const int c = x->value.cols();
  Tensor<T> out(std::move(out_shape));
  if (out.cols() != c || out.numel() != idx->size() * static_cast<size_t>(c))
    throw ShapeError("gather_rows: output shape");
  for (size_t m = 0; m < idx->size(); ++m) {
    const T* src = x->value.data.data() + static_cast<size_t>((*idx)[m]) * c;
    T* dst = out.data.data() + m * c;
    std::copy(src, src + c, dst);
  }
  return make_op<T>(std::move(out), {x}, [x, idx, c](Node<T>& n) {
    x->ensure_grad();
    for (size_t m = 0; m < idx->size(); ++m) {
      const T* src = n.grad.data.data() + m * c;
      T* dst = x->grad.data.data() + static_cast<size_t>((*idx)[m]) * c;
      for (int j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

/// out.data[i] = x.data[idx[i]]; fully general elementwise gather.
template <typename T>
Var<T> gather_flat(const Var<T>& x, std::shared_ptr<std::vector<int>> idx,
                   std::vector<int> out_shape) {
  Tensor<T> out(std::move(out_shape));
  if (out.numel() != idx->size()) throw ShapeError("gather_flat: output shape");
  for (size_t i = 0; i < idx->size(); ++i) out.data[i] = x->value.data[(*idx)[i]];
  return make_op<T>(std::move(out), {x}, [x, idx](Node<T>& n) {
    x->ensure_grad();
    for (size_t i = 0; i < idx->size(); ++i) x->grad.data[(*idx)[i]] += n.grad.data[i];
  });
}

/// [B, L, H*d] -> [B*H, L, d]
template <typename T>
Var<T> split_heads(const Var<T>& x, int heads) {
  const int b = x->value.dim(0), l = x->value.dim(1), hd = x->value.dim(2);
  const int d = hd / heads;
  if (d * heads != hd) throw ShapeError("split_heads: channels not divisible by heads");
  Tensor<T> out({b * heads, l, d});
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < l; ++i) {
      const T* src = x->value.data.data() + (static_cast<size_t>(bi) * l + i) * hd;
      for (int h = 0; h < heads; ++h) {
        T* dst = out.data.data() +
                 ((static_cast<size_t>(bi) * heads + h) * l + i) * d;
        std::copy(src + h * d, src + (h + 1) * d, dst);
      }
    }
  return make_op<T>(std::move(out), {x}, [x, b, l, heads, d, hd](Node<T>& n) {
    x->ensure_grad();
    for (int bi = 0; bi < b; ++bi)
      for (int i = 0; i < l; ++i) {
        T* dst = x->grad.data.data() + (static_cast<size_t>(bi) * l + i) * hd;
        for (int h = 0; h < heads; ++h) {
          const T* src = n.grad.data.data() +
                         ((static_cast<size_t>(bi) * heads + h) * l + i) * d;
          for (int j = 0; j < d; ++j) dst[h * d + j] += src[j];
        }
      }
  });
}

/// [B*H, L, d] -> [B, L, H*d]
template <typename T>
Var<T> merge_heads(const Var<T>& x, int heads) {
  const int bh = x->value.dim(0), l = x->value.dim(1), d = x->value.dim(2);
  const int b = bh / heads;
  if (b * heads != bh) throw ShapeError("merge_heads: batch not divisible by heads");
  Tensor<T> out({b, l, heads * d});
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < l; ++i) {
      T* dst = out.data.data() + (static_cast<size_t>(bi) * l + i) * heads * d;
      for (int h = 0; h < heads; ++h) {
        const T* src = x->value.data.data() +
                       ((static_cast<size_t>(bi) * heads + h) * l + i) * d;
        std::copy(src, src + d, dst + h * d);
      }
    }
  return make_op<T>(std::move(out), {x}, [x, b, l, heads, d](Node<T>& n) {
    x->ensure_grad();
    for (int bi = 0; bi < b; ++bi)
      for (int i = 0; i < l; ++i) {
        const T* src = n.grad.data.data() + (static_cast<size_t>(bi) * l + i) * heads * d;
        for (int h = 0; h < heads; ++h) {
          T* dst = x->grad.data.data() +
                   ((static_cast<size_t>(bi) * heads + h) * l + i) * d;
          for (int j = 0; j < d; ++j) dst[j] += src[h * d + j];
        }
      }
  });
}

/// Columns [from, to) of the last dimension.
template <typename T>
Var<T> slice_last(const Var<T>& x, int from, int to) {
  const int rows = x->value.rows();
  const int c = x->value.cols();
  if (from < 0 || to > c || from >= to) throw ShapeError("slice_last: bad range");
  std::vector<int> out_shape = x->value.shape;
  out_shape.back() = to - from;
  Tensor<T> out(out_shape);
  const int w = to - from;
  for (int r = 0; r < rows; ++r)
    std::copy(x->value.data.data() + static_cast<size_t>(r) * c + from,
              x->value.data.data() + static_cast<size_t>(r) * c + to,
              out.data.data() + static_cast<size_t>(r) * w);
  return make_op<T>(std::move(out), {x}, [x, rows, c, from, w](Node<T>& n) {
    x->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const T* src = n.grad.data.data() + static_cast<size_t>(r) * w;
      T* dst = x->grad.data.data() + static_cast<size_t>(r) * c + from;
      for (int j = 0; j < w; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var<T> concat_last(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_last: empty input");
  const int rows = xs[0]->value.rows();
  int total = 0;
  for (const auto& x : xs) {
    if (x->value.rows() != rows) throw ShapeError("concat_last: row mismatch");
    total += x->value.cols();
  }
  std::vector<int> out_shape = xs[0]->value.shape;
  out_shape.back() = total;
  Tensor<T> out(out_shape);
  int offset = 0;
  for (const auto& x : xs) {
    const int c = x->value.cols();
    for (int r = 0; r < rows; ++r)
      std::copy(x->value.data.data() + static_cast<size_t>(r) * c,
                x->value.data.data() + static_cast<size_t>(r) * c + c,
                out.data.data() + static_cast<size_t>(r) * total + offset);
    offset += c;
  }
  std::vector<Var<T>> parents = xs;
  return make_op<T>(std::move(out), std::move(parents), [xs, rows, total](Node<T>& n) {
    int offset = 0;
    for (const auto& x : xs) {
      const int c = x->value.cols();
      if (x->requires_grad) {
        x->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          const T* src = n.grad.data.data() + static_cast<size_t>(r) * total + offset;
          T* dst = x->grad.data.data() + static_cast<size_t>(r) * c;
          for (int j = 0; j < c; ++j) dst[j] += src[j];
        }
      }
      offset += c;
    }
  });
}

/// Adds a [1, ...] parameter across the batch dimension of x [B, ...].
template <typename T>
Var<T> add_broadcast_batch(const Var<T>& x, const Var<T>& p) {
  const size_t per = p->value.numel();
  if (x->value.numel() % per != 0) throw ShapeError("add_broadcast_batch: size mismatch");
  const int reps = static_cast<int>(x->value.numel() / per);
  Tensor<T> out = x->value;
  for (int r = 0; r < reps; ++r) {
    T* dst = out.data.data() + static_cast<size_t>(r) * per;
    for (size_t j = 0; j < per; ++j) dst[j] += p->value.data[j];
  }
  return make_op<T>(std::move(out), {x, p}, [x, p, reps, per](Node<T>& n) {
    if (x->requires_grad) {
      x->ensure_grad();
      for (size_t i = 0; i < n.grad.data.size(); ++i) x->grad.data[i] += n.grad.data[i];
    }
    if (p->requires_grad) {
      p->ensure_grad();
      for (int r = 0; r < reps; ++r) {
        const T* src = n.grad.data.data() + static_cast<size_t>(r) * per;
        for (size_t j = 0; j < per; ++j) p->grad.data[j] += src[j];
      }
    }
  });
}

/// Replaces row r with `placeholder` wherever sel[r] != 0.
template <typename T>
Var<T> substitute_rows(const Var<T>& x, std::shared_ptr<std::vector<uint8_t>> sel,
                       const Var<T>& placeholder) {
  const int rows = x->value.rows();
  const int c = x->value.cols();
  if (sel->size() != static_cast<size_t>(rows)) throw ShapeError("substitute_rows: selector size");
  if (placeholder->value.numel() != static_cast<size_t>(c))
    throw ShapeError("substitute_rows: placeholder size");
  Tensor<T> out = x->value;
  for (int r = 0; r < rows; ++r)
    if ((*sel)[r])
      std::copy(placeholder->value.data.begin(), placeholder->value.data.end(),
                out.data.begin() + static_cast<size_t>(r) * c);
  return make_op<T>(std::move(out), {x, placeholder}, [x, placeholder, sel, rows, c](Node<T>& n) {
    if (x->requires_grad) x->ensure_grad();
    if (placeholder->requires_grad) placeholder->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const T* src = n.grad.data.data() + static_cast<size_t>(r) * c;
      if ((*sel)[r]) {
        if (placeholder->requires_grad)
          for (int j = 0; j < c; ++j) placeholder->grad.data[j] += src[j];
      } else if (x->requires_grad) {
        T* dst = x->grad.data.data() + static_cast<size_t>(r) * c;
        for (int j = 0; j < c; ++j) dst[j] += src[j];
      }
    }
  });
}

/// [B, N, C] -> [B, C], mean over the token axis.
template <typename T>
Var<T> mean_tokens(const Var<T>& x) {
  if (x->value.rank() != 3) throw ShapeError("mean_tokens: expected rank-3 input");
  const int b = x->value.dim(0), ntok = x->value.dim(1), c = x->value.dim(2);
  Tensor<T> out({b, c});
  const T inv = T(1) / static_cast<T>(ntok);
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < ntok; ++i) {
      const T* src = x->value.data.data() + (static_cast<size_t>(bi) * ntok + i) * c;
      T* dst = out.data.data() + static_cast<size_t>(bi) * c;
      for (int j = 0; j < c; ++j) dst[j] += src[j] * inv;
    }
  return make_op<T>(std::move(out), {x}, [x, b, ntok, c, inv](Node<T>& n) {
    x->ensure_grad();
    for (int bi = 0; bi < b; ++bi) {
      const T* src = n.grad.data.data() + static_cast<size_t>(bi) * c;
      for (int i = 0; i < ntok; ++i) {
        T* dst = x->grad.data.data() + (static_cast<size_t>(bi) * ntok + i) * c;
        for (int j = 0; j < c; ++j) dst[j] += src[j] * inv;
      }
    }
  });
}

}  // namespace nn
}  // namespace sarw
