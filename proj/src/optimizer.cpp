#include "sarw/optimizer.hpp"

#include <cmath>

namespace sarw {

template <typename T>
void adamw_step(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& moments, long long step,
                double lr, double beta1, double beta2, double eps, double weight_decay) {
  if (!param.same_shape(grad)) throw ShapeError("adamw_step: parameter/gradient shape mismatch");
  if (moments.m.data.empty()) moments.m = Tensor<T>::zeros_like(param);
  if (moments.v.data.empty()) moments.v = Tensor<T>::zeros_like(param);
  if (!moments.m.same_shape(param) || !moments.v.same_shape(param))
    throw ShapeError("adamw_step: moment shape mismatch");
  if (step < 1) throw ConfigError("adamw_step: step must be >= 1");

  for (const T g : grad.data)
    if (!std::isfinite(static_cast<double>(g)))
      throw NumericError("adamw_step: non-finite gradient");

  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (size_t i = 0; i < param.data.size(); ++i) {
    const double g = static_cast<double>(grad.data[i]);
    const double m = beta1 * static_cast<double>(moments.m.data[i]) + (1.0 - beta1) * g;
    const double v = beta2 * static_cast<double>(moments.v.data[i]) + (1.0 - beta2) * g * g;
    moments.m.data[i] = static_cast<T>(m);
    moments.v.data[i] = static_cast<T>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    double p = static_cast<double>(param.data[i]);
    p -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * p);
    param.data[i] = static_cast<T>(p);
  }
}

template void adamw_step<float>(Tensor<float>&, const Tensor<float>&, AdamMoments<float>&,
                                long long, double, double, double, double, double);
template void adamw_step<double>(Tensor<double>&, const Tensor<double>&, AdamMoments<double>&,
                                 long long, double, double, double, double, double);

}  // namespace sarw
