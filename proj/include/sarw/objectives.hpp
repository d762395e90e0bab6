#pragma once

#include <cstdint>
#include <vector>

#include "sarw/grid.hpp"
#include "sarw/tensor.hpp"

namespace sarw {

/// Loss value plus analytic gradients with respect to both predictions.
template <typename T>
struct DualReconLoss {
  double loss = 0.0;
  Tensor<T> grad1;
  Tensor<T> grad2;
};

/// Weighted dual-reconstruction objective.
///
/// Predictions and targets are [C, S, S]; `selector` (0/1, pixel resolution)
/// activates the first target where 0 and the second where 1; `weights` are
/// the routed per-pixel loss weights in [1, e]. Per mask unit the weighted
/// squared errors are averaged over the unit's pixel-channel slots, then the
/// unit means are averaged over the N units.
template <typename T>
DualReconLoss<T> weighted_dual_reconstruction_loss(const Tensor<T>& t1_hat,
                                                   const Tensor<T>& t2_hat, const Tensor<T>& t1,
                                                   const Tensor<T>& t2,
                                                   const Grid<uint8_t>& selector,
                                                   const GridF& weights, int mask_unit);

/// Same reduction with no weighting; the weighted loss with unit weights
/// equals this exactly.
template <typename T>
DualReconLoss<T> dual_reconstruction_loss(const Tensor<T>& t1_hat, const Tensor<T>& t2_hat,
                                          const Tensor<T>& t1, const Tensor<T>& t2,
                                          const Grid<uint8_t>& selector, int mask_unit);

template <typename T>
struct ScalarLoss {
  double loss = 0.0;
  std::vector<T> grad;  // d loss / d logits
};

/// Mean over classes of the numerically stable soft-margin binary loss on
/// sigmoid(logits); labels are multi-hot.
template <typename T>
ScalarLoss<T> multilabel_soft_margin_loss(const std::vector<T>& logits,
                                          const std::vector<uint8_t>& labels);

/// Two-way softmax cross entropy with a log-sum-exp kernel; label in {0, 1}.
template <typename T>
ScalarLoss<T> binary_cross_entropy_logits(const std::vector<T>& logits, int label);

}  // namespace sarw
