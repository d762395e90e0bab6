#pragma once

#include "sarw/schedule.hpp"
#include "sarw/tensor.hpp"

namespace sarw {

template <typename T>
struct AdamMoments {
  Tensor<T> m;
  Tensor<T> v;
};

/// One decoupled-weight-decay Adam step with bias-corrected moments.
/// `step` is 1-based. Throws NumericError on a non-finite gradient so the
/// caller can abort the update.
template <typename T>
void adamw_step(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& moments, long long step,
                double lr, double beta1, double beta2, double eps, double weight_decay);

extern template void adamw_step<float>(Tensor<float>&, const Tensor<float>&, AdamMoments<float>&,
                                       long long, double, double, double, double, double);
extern template void adamw_step<double>(Tensor<double>&, const Tensor<double>&,
                                        AdamMoments<double>&, long long, double, double, double,
                                        double, double);

}  // namespace sarw
