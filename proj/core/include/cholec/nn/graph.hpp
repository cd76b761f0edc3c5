#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cholec/nn/tensor.hpp"

namespace cholec::nn {

using NodeId = int;

// Geometry of a square-kernel 2-D convolution over CHW images stored one image per row.
struct ConvShape {
  int in_channels = 0;
  int height = 0;
  int width = 0;
  int out_channels = 0;
  int kernel = 4;
  int stride = 2;
  int pad = 1;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  int patch() const { return in_channels * kernel * kernel; }
};

// Tape-free convolution: rows of x are CHW images, result rows are CHW feature maps.
template <typename T>
Matrix<T> conv2d_forward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b,
                         const ConvShape& shape);

// Final recurrent state of an lstm_sequence call.
template <typename T>
struct LstmCarry {
  Matrix<T> h;
  Matrix<T> c;
};

// Tape of recorded operations for reverse-mode differentiation.
//
// Node values are matrices with one sample per row. Nodes are appended in evaluation order, so
// walking the tape backwards is a valid reverse topological order. With recording disabled the
// graph only evaluates (no backward closures are kept).
template <typename T>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId input(Matrix<T> value);
  NodeId param(Parameter<T>& p);

  const Matrix<T>& value(NodeId id) const { return nodes_[id].value; }
  const Matrix<T>& grad(NodeId id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // x [N, in] times w [in, out] plus b [1, out].
  NodeId dense(NodeId x, NodeId w, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, T factor);
  NodeId exp(NodeId x);
  NodeId log(NodeId x);
  NodeId square(NodeId x);
  NodeId clamp(NodeId x, T lo, T hi);
  NodeId minimum(NodeId a, NodeId b);
  // Scalar reductions, accumulated in double.
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId row_sum(NodeId x);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_cols(NodeId x, int start, int count);
  NodeId log_softmax(NodeId x);
  // out[r] = x[r, index[r]]
  NodeId gather_cols(NodeId x, const std::vector<int>& index);

  // x rows are CHW images; w is [out_channels, patch]; b is [1, out_channels].
  NodeId conv2d(NodeId x, NodeId w, NodeId b, const ConvShape& shape);

  // LSTM over a time-major sequence: row t*batch + i of x is step t of lane i. reset[row] != 0
  // zeroes the incoming state before that row. Gate order in wx / wh / b columns: i, f, g, o.
  // Returns the hidden outputs [steps*batch, hidden]; the final state is written to *carry.
  NodeId lstm_sequence(NodeId x, NodeId wx, NodeId wh, NodeId b, const Matrix<T>& h0,
                       const Matrix<T>& c0, const std::vector<std::uint8_t>& reset, int steps,
                       LstmCarry<T>* carry);

  // Reverse pass from a 1x1 node. Parameter gradients are accumulated (+=) into Parameter::grad.
  void backward(NodeId loss);

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool needs_grad = false;
    std::function<void()> backward;
  };

  NodeId push(Matrix<T> value, bool needs_grad);
  bool needs(NodeId id) const { return nodes_[id].needs_grad; }
  Matrix<T>& grad_of(NodeId id);
  void check(NodeId id) const;

  bool record_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace cholec::nn
