#include "cholec/nn/optim.hpp"

#include <cmath>

#include "cholec/common/errors.hpp"

namespace cholec::nn {

template <typename T>
double grad_norm(const std::vector<Parameter<T>>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.grad.size(); ++i) {
      const double g = static_cast<double>(p.grad.data()[i]);
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(std::vector<Parameter<T>>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_grad_norm: max_norm must be > 0");
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / (norm + 1e-6));
    for (auto& p : params) p.grad *= factor;
  }
  return norm;
}

template <typename T>
bool adam_step(std::vector<Parameter<T>>& params, AdamState<T>& state, const AdamConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match the parameter list");
  }
  bool any = false;
  for (const auto& p : params) {
    if (p.grad.size() != 0 && !p.grad.isZero(0)) {
      any = true;
      break;
    }
  }
  if (!any) return false;

  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T step_size = static_cast<T>(config.learning_rate / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(config.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (p.grad.size() == 0) continue;
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    const auto g = p.grad.array();
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.square();
    p.value.array() -= step_size * m / (v.sqrt() * inv_sqrt_c2 + eps);
  }
  return true;
}

template double grad_norm(const std::vector<Parameter<float>>&);
template double grad_norm(const std::vector<Parameter<double>>&);
template double clip_grad_norm(std::vector<Parameter<float>>&, double);
template double clip_grad_norm(std::vector<Parameter<double>>&, double);
template bool adam_step(std::vector<Parameter<float>>&, AdamState<float>&, const AdamConfig&);
template bool adam_step(std::vector<Parameter<double>>&, AdamState<double>&, const AdamConfig&);

}  // namespace cholec::nn
