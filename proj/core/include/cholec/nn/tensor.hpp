#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cholec::nn {

// Row-major so that one row is one sample of a batch.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A trainable tensor. Values are held as a 2-D matrix; `shape` is the logical shape and its
// product always equals values.size().
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  Matrix<T> value;
  Matrix<T> grad;

  Parameter() = default;
  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)),
        shape{rows, cols},
        value(Matrix<T>::Zero(rows, cols)),
        grad(Matrix<T>::Zero(rows, cols)) {}

  std::int64_t size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

inline std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

}  // namespace cholec::nn
