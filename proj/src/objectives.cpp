#include "sarw/objectives.hpp"

#include <cmath>

#include "sarw/error.hpp"

namespace sarw {

namespace {

constexpr double kWeightUpper = 2.718281828459045235 + 1e-5;
constexpr double kWeightLower = 1.0 - 1e-5;

template <typename T>
void check_recon_shapes(const Tensor<T>& t1_hat, const Tensor<T>& t2_hat, const Tensor<T>& t1,
                        const Tensor<T>& t2, const Grid<uint8_t>& selector, const GridF* weights,
                        int mask_unit) {
  if (t1_hat.rank() != 3) throw ShapeError("reconstruction loss: expected [C,S,S] predictions");
  if (!t1_hat.same_shape(t2_hat) || !t1_hat.same_shape(t1) || !t1_hat.same_shape(t2))
    throw ShapeError("reconstruction loss: prediction/target shapes differ");
  const int h = t1_hat.dim(1), w = t1_hat.dim(2);
  if (selector.rows != h || selector.cols != w)
    throw ShapeError("reconstruction loss: selector resolution mismatch");
  if (mask_unit < 1 || h % mask_unit != 0 || w % mask_unit != 0)
    throw ShapeError("reconstruction loss: mask unit does not tile the image");
  for (const T x : t1_hat.data)
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericError("reconstruction loss: non-finite prediction");
  for (const T x : t2_hat.data)
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericError("reconstruction loss: non-finite prediction");
  if (weights) {
    if (weights->rows != h || weights->cols != w)
      throw ShapeError("reconstruction loss: weight map resolution mismatch");
    for (const float x : weights->v)
      if (!(x >= kWeightLower && x <= kWeightUpper))
        throw RadiometryError("reconstruction loss: weight outside [1, e]");
  }
}

/// Shared kernel; `weights` == nullptr means unit weights.
template <typename T>
DualReconLoss<T> recon_loss_impl(const Tensor<T>& t1_hat, const Tensor<T>& t2_hat,
                                 const Tensor<T>& t1, const Tensor<T>& t2,
                                 const Grid<uint8_t>& selector, const GridF* weights,
                                 int mask_unit) {
  check_recon_shapes(t1_hat, t2_hat, t1, t2, selector, weights, mask_unit);
  const int channels = t1_hat.dim(0);
  const int h = t1_hat.dim(1), w = t1_hat.dim(2);
  const int units_y = h / mask_unit, units_x = w / mask_unit;
  const int unit_count = units_y * units_x;
  const double slot_norm = 1.0 / (static_cast<double>(channels) * mask_unit * mask_unit);
  const double unit_norm = 1.0 / static_cast<double>(unit_count);

  DualReconLoss<T> out;
  out.grad1 = Tensor<T>::zeros_like(t1_hat);
  out.grad2 = Tensor<T>::zeros_like(t2_hat);

  double loss = 0.0;
  const double grad_scale = 2.0 * slot_norm * unit_norm;
  for (int uy = 0; uy < units_y; ++uy)
    for (int ux = 0; ux < units_x; ++ux) {
      double unit_sum = 0.0;
      for (int c = 0; c < channels; ++c)
        for (int dy = 0; dy < mask_unit; ++dy) {
          const int y = uy * mask_unit + dy;
          for (int dx = 0; dx < mask_unit; ++dx) {
            const int x = ux * mask_unit + dx;
            const size_t i =
                (static_cast<size_t>(c) * h + y) * w + x;
            const double wgt = weights ? static_cast<double>(weights->at(y, x)) : 1.0;
            const bool second = selector.at(y, x) != 0;
            const double err = second
                                   ? static_cast<double>(t2_hat.data[i]) - t2.data[i]
                                   : static_cast<double>(t1_hat.data[i]) - t1.data[i];
            unit_sum += wgt * err * err;
            const T g = static_cast<T>(grad_scale * wgt * err);
            if (second)
              out.grad2.data[i] = g;
            else
              out.grad1.data[i] = g;
          }
        }
      loss += unit_sum * slot_norm;
    }
  out.loss = loss * unit_norm;
  return out;
}

}  // namespace

template <typename T>
DualReconLoss<T> weighted_dual_reconstruction_loss(const Tensor<T>& t1_hat,
                                                   const Tensor<T>& t2_hat, const Tensor<T>& t1,
                                                   const Tensor<T>& t2,
                                                   const Grid<uint8_t>& selector,
                                                   const GridF& weights, int mask_unit) {
  return recon_loss_impl(t1_hat, t2_hat, t1, t2, selector, &weights, mask_unit);
}

template <typename T>
DualReconLoss<T> dual_reconstruction_loss(const Tensor<T>& t1_hat, const Tensor<T>& t2_hat,
                                          const Tensor<T>& t1, const Tensor<T>& t2,
                                          const Grid<uint8_t>& selector, int mask_unit) {
  return recon_loss_impl(t1_hat, t2_hat, t1, t2, selector, nullptr, mask_unit);
}

template <typename T>
ScalarLoss<T> multilabel_soft_margin_loss(const std::vector<T>& logits,
                                          const std::vector<uint8_t>& labels) {
  if (logits.size() != labels.size())
    throw ShapeError("multilabel_soft_margin_loss: logits/labels length mismatch");
  if (logits.empty()) throw ShapeError("multilabel_soft_margin_loss: empty input");
  ScalarLoss<T> out;
  out.grad.resize(logits.size());
  const double inv_k = 1.0 / static_cast<double>(logits.size());
  double loss = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    const double z = static_cast<double>(logits[k]);
    // log(1 + exp(s)) evaluated as max(s,0) + log1p(exp(-|s|))
    const double s = labels[k] ? -z : z;
    loss += std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
    const double sigma = 1.0 / (1.0 + std::exp(-z));
    out.grad[k] = static_cast<T>((sigma - (labels[k] ? 1.0 : 0.0)) * inv_k);
  }
  out.loss = loss * inv_k;
  return out;
}

template <typename T>
ScalarLoss<T> binary_cross_entropy_logits(const std::vector<T>& logits, int label) {
  if (logits.size() != 2) throw ShapeError("binary_cross_entropy_logits: expected 2 logits");
  if (label != 0 && label != 1) throw ConfigError("binary_cross_entropy_logits: label not 0/1");
  const double z0 = static_cast<double>(logits[0]);
  const double z1 = static_cast<double>(logits[1]);
  const double m = std::max(z0, z1);
  const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
  ScalarLoss<T> out;
  out.loss = lse - (label == 0 ? z0 : z1);
  const double p0 = std::exp(z0 - lse);
  const double p1 = std::exp(z1 - lse);
  out.grad = {static_cast<T>(p0 - (label == 0 ? 1.0 : 0.0)),
              static_cast<T>(p1 - (label == 1 ? 1.0 : 0.0))};
  return out;
}

template DualReconLoss<float> weighted_dual_reconstruction_loss<float>(
    const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
    const Grid<uint8_t>&, const GridF&, int);
template DualReconLoss<double> weighted_dual_reconstruction_loss<double>(
    const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
    const Grid<uint8_t>&, const GridF&, int);
template DualReconLoss<float> dual_reconstruction_loss<float>(const Tensor<float>&,
                                                              const Tensor<float>&,
                                                              const Tensor<float>&,
                                                              const Tensor<float>&,
                                                              const Grid<uint8_t>&, int);
template DualReconLoss<double> dual_reconstruction_loss<double>(const Tensor<double>&,
                                                                const Tensor<double>&,
                                                                const Tensor<double>&,
                                                                const Tensor<double>&,
                                                                const Grid<uint8_t>&, int);
template ScalarLoss<float> multilabel_soft_margin_loss<float>(const std::vector<float>&,
                                                              const std::vector<uint8_t>&);
template ScalarLoss<double> multilabel_soft_margin_loss<double>(const std::vector<double>&,
                                                                const std::vector<uint8_t>&);
template ScalarLoss<float> binary_cross_entropy_logits<float>(const std::vector<float>&, int);
template ScalarLoss<double> binary_cross_entropy_logits<double>(const std::vector<double>&, int);

}  // namespace sarw
