#pragma once

#include <cstdint>
#include <vector>

#include "cholec/nn/tensor.hpp"

namespace cholec::nn {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Matrix<T>> m;
  std::vector<Matrix<T>> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const std::vector<Parameter<T>>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
      s.v.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    }
    return s;
  }
};

// Global L2 norm over all gradients, accumulated in double.
template <typename T>
double grad_norm(const std::vector<Parameter<T>>& params);

// Rescales gradients so their global norm is at most max_norm. Returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::vector<Parameter<T>>& params, double max_norm);

// One Adam update from the current gradients. When every gradient is exactly zero the step is
// skipped entirely (moments, counter and parameters untouched) and false is returned.
template <typename T>
bool adam_step(std::vector<Parameter<T>>& params, AdamState<T>& state, const AdamConfig& config);

}  // namespace cholec::nn
