#include "cholec/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "cholec/common/errors.hpp"

namespace cholec::nn {

namespace {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Copies image patches into rows: cols[(oy*ow + ox), (c*k + ky)*k + kx].
template <typename T>
void im2col(const T* img, const ConvShape& s, Matrix<T>& cols) {
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = s.kernel;
  cols.resize(oh * ow, s.patch());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* row = cols.row(oy * ow + ox).data();
      for (int c = 0; c < s.in_channels; ++c) {
        const T* plane = img + static_cast<std::ptrdiff_t>(c) * s.height * s.width;
        for (int ky = 0; ky < k; ++ky) {
          const int y = oy * s.stride - s.pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int x = ox * s.stride - s.pad + kx;
            const bool inside = y >= 0 && y < s.height && x >= 0 && x < s.width;
            *row++ = inside ? plane[y * s.width + x] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const Matrix<T>& cols, const ConvShape& s, T* img) {
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = s.kernel;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const T* row = cols.row(oy * ow + ox).data();
      for (int c = 0; c < s.in_channels; ++c) {
        T* plane = img + static_cast<std::ptrdiff_t>(c) * s.height * s.width;
        for (int ky = 0; ky < k; ++ky) {
          const int y = oy * s.stride - s.pad + ky;
          for (int kx = 0; kx < k; ++kx, ++row) {
            const int x = ox * s.stride - s.pad + kx;
            if (y >= 0 && y < s.height && x >= 0 && x < s.width) plane[y * s.width + x] += *row;
          }
        }
      }
    }
  }
}

void require_same_shape(const char* op, Eigen::Index ar, Eigen::Index ac, Eigen::Index br,
                        Eigen::Index bc) {
  if (ar != br || ac != bc) {
    throw ContractError(std::string(op) + ": shape mismatch [" + std::to_string(ar) + "x" +
                        std::to_string(ac) + "] vs [" + std::to_string(br) + "x" +
                        std::to_string(bc) + "]");
  }
}

}  // namespace

template <typename T>
Matrix<T> conv2d_forward(const Matrix<T>& X, const Matrix<T>& W, const Matrix<T>& b,
                         const ConvShape& s) {
  const int spatial = s.out_height() * s.out_width();
  Matrix<T> out(X.rows(), static_cast<Eigen::Index>(s.out_channels) * spatial);
  Matrix<T> cols;
  Matrix<T> y;
  const Eigen::Matrix<T, Eigen::Dynamic, 1> bias = b.row(0).transpose();
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    im2col(X.row(n).data(), s, cols);
    y.noalias() = W * cols.transpose();  // [out_channels, spatial]
    y.colwise() += bias;
    out.row(n) = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(y.data(), y.size());
  }
  return out;
}

template Matrix<float> conv2d_forward(const Matrix<float>&, const Matrix<float>&,
                                      const Matrix<float>&, const ConvShape&);
template Matrix<double> conv2d_forward(const Matrix<double>&, const Matrix<double>&,
                                       const Matrix<double>&, const ConvShape&);

template <typename T>
void Graph<T>::check(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw ContractError("graph: unknown node " + std::to_string(id));
  }
}

template <typename T>
NodeId Graph<T>::push(Matrix<T> value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
Matrix<T>& Graph<T>::grad_of(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix<T>::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
NodeId Graph<T>::input(Matrix<T> value) {
  return push(std::move(value), false);
}

template <typename T>
NodeId Graph<T>::param(Parameter<T>& p) {
  const NodeId id = push(p.value, true);
  if (needs(id)) {
    nodes_[id].backward = [this, id, &p] {
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
      p.grad += nodes_[id].grad;
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::dense(NodeId x, NodeId w, NodeId b) {
  check(x);
  check(w);
  check(b);
  const auto& X = value(x);
  const auto& W = value(w);
  const auto& B = value(b);
  if (X.cols() != W.rows() || B.rows() != 1 || B.cols() != W.cols()) {
    throw ContractError("dense: shape mismatch, x has " + std::to_string(X.cols()) +
                        " columns, weight is " + std::to_string(W.rows()) + "x" +
                        std::to_string(W.cols()));
  }
  Matrix<T> out = X * W;
  out.rowwise() += B.row(0);
  const NodeId id = push(std::move(out), needs(x) || needs(w) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, w, b] {
      const Matrix<T>& g = nodes_[id].grad;
      if (needs(x)) grad_of(x).noalias() += g * value(w).transpose();
      if (needs(w)) grad_of(w).noalias() += value(x).transpose() * g;
      if (needs(b)) grad_of(b) += g.colwise().sum();
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::matmul(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (value(a).cols() != value(b).rows()) throw ContractError("matmul: inner dimension mismatch");
  const NodeId id = push(value(a) * value(b), needs(a) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, a, b] {
      const Matrix<T>& g = nodes_[id].grad;
      if (needs(a)) grad_of(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad_of(b).noalias() += value(a).transpose() * g;
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::relu(NodeId x) {
  check(x);
  const NodeId id = push(value(x).cwiseMax(T(0)), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x] {
      grad_of(x).array() +=
          nodes_[id].grad.array() * (value(x).array() > T(0)).template cast<T>();
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape("add", value(a).rows(), value(a).cols(), value(b).rows(), value(b).cols());
  const NodeId id = push(value(a) + value(b), needs(a) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, a, b] {
      if (needs(a)) grad_of(a) += nodes_[id].grad;
      if (needs(b)) grad_of(b) += nodes_[id].grad;
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::sub(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape("sub", value(a).rows(), value(a).cols(), value(b).rows(), value(b).cols());
  const NodeId id = push(value(a) - value(b), needs(a) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, a, b] {
      if (needs(a)) grad_of(a) += nodes_[id].grad;
      if (needs(b)) grad_of(b) -= nodes_[id].grad;
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape("mul", value(a).rows(), value(a).cols(), value(b).rows(), value(b).cols());
  const NodeId id = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, a, b] {
      const Matrix<T>& g = nodes_[id].grad;
      if (needs(a)) grad_of(a) += g.cwiseProduct(value(b));
      if (needs(b)) grad_of(b) += g.cwiseProduct(value(a));
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::scale(NodeId x, T factor) {
  check(x);
  const NodeId id = push(value(x) * factor, needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, factor] { grad_of(x) += nodes_[id].grad * factor; };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::exp(NodeId x) {
  check(x);
  const NodeId id = push(value(x).array().exp().matrix(), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x] {
      grad_of(x) += nodes_[id].grad.cwiseProduct(nodes_[id].value);
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::log(NodeId x) {
  check(x);
  const NodeId id = push(value(x).array().log().matrix(), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x] {
      grad_of(x).array() += nodes_[id].grad.array() / value(x).array();
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::square(NodeId x) {
  check(x);
  const NodeId id = push(value(x).array().square().matrix(), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x] {
      grad_of(x).array() += T(2) * nodes_[id].grad.array() * value(x).array();
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::clamp(NodeId x, T lo, T hi) {
  check(x);
  if (!(lo <= hi)) throw ContractError("clamp: lo must be <= hi");
  const NodeId id = push(value(x).cwiseMax(lo).cwiseMin(hi), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, lo, hi] {
      const auto inside = (value(x).array() >= lo && value(x).array() <= hi);
      grad_of(x).array() += nodes_[id].grad.array() * inside.template cast<T>();
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::minimum(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape("minimum", value(a).rows(), value(a).cols(), value(b).rows(),
                     value(b).cols());
  const NodeId id = push(value(a).cwiseMin(value(b)), needs(a) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, a, b] {
      // ties go to the first argument
      const auto take_a = (value(a).array() <= value(b).array()).template cast<T>();
      if (needs(a)) grad_of(a).array() += nodes_[id].grad.array() * take_a;
      if (needs(b)) grad_of(b).array() += nodes_[id].grad.array() * (T(1) - take_a);
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::sum(NodeId x) {
  check(x);
  double acc = 0.0;
  const Matrix<T>& v = value(x);
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += static_cast<double>(v.data()[i]);
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(acc);
  const NodeId id = push(std::move(out), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x] { grad_of(x).array() += nodes_[id].grad(0, 0); };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::mean(NodeId x) {
  check(x);
  const Eigen::Index n = value(x).size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  double acc = 0.0;
  const Matrix<T>& v = value(x);
  for (Eigen::Index i = 0; i < n; ++i) acc += static_cast<double>(v.data()[i]);
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(acc / static_cast<double>(n));
  const NodeId id = push(std::move(out), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, n] {
      grad_of(x).array() += nodes_[id].grad(0, 0) / static_cast<T>(n);
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::row_sum(NodeId x) {
  check(x);
  const NodeId id = push(value(x).rowwise().sum(), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x] {
      grad_of(x).colwise() += nodes_[id].grad.col(0);
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::concat_cols(NodeId a, NodeId b) {
  check(a);
  check(b);
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.rows() != B.rows()) throw ContractError("concat_cols: row count mismatch");
  Matrix<T> out(A.rows(), A.cols() + B.cols());
  out.leftCols(A.cols()) = A;
  out.rightCols(B.cols()) = B;
  const NodeId id = push(std::move(out), needs(a) || needs(b));
  if (needs(id)) {
    const Eigen::Index ac = A.cols();
    const Eigen::Index bc = B.cols();
    nodes_[id].backward = [this, id, a, b, ac, bc] {
      if (needs(a)) grad_of(a) += nodes_[id].grad.leftCols(ac);
      if (needs(b)) grad_of(b) += nodes_[id].grad.rightCols(bc);
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::slice_cols(NodeId x, int start, int count) {
  check(x);
  if (start < 0 || count < 0 || start + count > value(x).cols()) {
    throw ContractError("slice_cols: range out of bounds");
  }
  const NodeId id = push(value(x).middleCols(start, count), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, start, count] {
      grad_of(x).middleCols(start, count) += nodes_[id].grad;
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::log_softmax(NodeId x) {
  check(x);
  const Matrix<T>& v = value(x);
  Matrix<T> out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const T m = v.row(r).maxCoeff();
    const T lse = m + std::log((v.row(r).array() - m).exp().sum());
    out.row(r) = v.row(r).array() - lse;
  }
  const NodeId id = push(std::move(out), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x] {
      const Matrix<T>& g = nodes_[id].grad;
      const Matrix<T> p = nodes_[id].value.array().exp().matrix();
      Matrix<T>& gx = grad_of(x);
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        gx.row(r) += g.row(r) - p.row(r) * g.row(r).sum();
      }
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::gather_cols(NodeId x, const std::vector<int>& index) {
  check(x);
  const Matrix<T>& v = value(x);
  if (static_cast<Eigen::Index>(index.size()) != v.rows()) {
    throw ContractError("gather_cols: one index per row required");
  }
  Matrix<T> out(v.rows(), 1);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const int c = index[r];
    if (c < 0 || c >= v.cols()) throw ContractError("gather_cols: index out of range");
    out(r, 0) = v(r, c);
  }
  const NodeId id = push(std::move(out), needs(x));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, index] {
      Matrix<T>& gx = grad_of(x);
      for (Eigen::Index r = 0; r < gx.rows(); ++r) gx(r, index[r]) += nodes_[id].grad(r, 0);
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::conv2d(NodeId x, NodeId w, NodeId b, const ConvShape& s) {
  check(x);
  check(w);
  check(b);
  const Matrix<T>& X = value(x);
  const Matrix<T>& W = value(w);
  if (X.cols() != static_cast<Eigen::Index>(s.in_channels) * s.height * s.width) {
    throw ContractError("conv2d: input row length does not match C*H*W");
  }
  if (W.rows() != s.out_channels || W.cols() != s.patch() || value(b).rows() != 1 ||
      value(b).cols() != s.out_channels) {
    throw ContractError("conv2d: weight or bias shape mismatch");
  }
  if (s.out_height() < 1 || s.out_width() < 1) throw ContractError("conv2d: empty output");
  const int spatial = s.out_height() * s.out_width();
  Matrix<T> out = conv2d_forward(X, W, value(b), s);
  const NodeId id = push(std::move(out), needs(x) || needs(w) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, w, b, s, spatial] {
      const Matrix<T>& G = nodes_[id].grad;
      const Matrix<T>& Xv = value(x);
      const Matrix<T>& Wv = value(w);
      Matrix<T> cols;
      Matrix<T> dcols;
      for (Eigen::Index n = 0; n < G.rows(); ++n) {
        const Eigen::Map<const Matrix<T>> g(G.row(n).data(), s.out_channels, spatial);
        if (needs(w) || needs(x)) im2col(Xv.row(n).data(), s, cols);
        if (needs(w)) grad_of(w).noalias() += g * cols;
        if (needs(b)) grad_of(b) += g.rowwise().sum().transpose();
        if (needs(x)) {
          dcols.noalias() = g.transpose() * Wv;  // [spatial, patch]
          col2im_add(dcols, s, grad_of(x).row(n).data());
        }
      }
    };
  }
  return id;
}

template <typename T>
NodeId Graph<T>::lstm_sequence(NodeId x, NodeId wx, NodeId wh, NodeId b, const Matrix<T>& h0,
                               const Matrix<T>& c0, const std::vector<std::uint8_t>& reset,
                               int steps, LstmCarry<T>* carry) {
  check(x);
  check(wx);
  check(wh);
  check(b);
  const Matrix<T>& X = value(x);
  const Eigen::Index H = value(wh).rows();
  if (steps < 1 || X.rows() % steps != 0) {
    throw ContractError("lstm_sequence: rows must be a multiple of steps");
  }
  const Eigen::Index B = X.rows() / steps;
  if (value(wx).rows() != X.cols() || value(wx).cols() != 4 * H || value(wh).cols() != 4 * H ||
      value(b).rows() != 1 || value(b).cols() != 4 * H) {
    throw ContractError("lstm_sequence: weight shapes do not match input " +
                        std::to_string(X.cols()) + " and hidden " + std::to_string(H));
  }
  if (h0.rows() != B || h0.cols() != H || c0.rows() != B || c0.cols() != H) {
    throw ContractError("lstm_sequence: initial state must be [batch, hidden]");
  }
  if (static_cast<Eigen::Index>(reset.size()) != X.rows()) {
    throw ContractError("lstm_sequence: one reset flag per row required");
  }

  // Activated gates (i, f, g, o), cell states and the state entering each row.
  auto gates = std::make_shared<Matrix<T>>(X * value(wx));
  gates->rowwise() += value(b).row(0);
  auto cells = std::make_shared<Matrix<T>>(X.rows(), H);
  auto h_in = std::make_shared<Matrix<T>>(X.rows(), H);
  auto c_in = std::make_shared<Matrix<T>>(X.rows(), H);
  Matrix<T> out(X.rows(), H);

  Matrix<T> h = h0;
  Matrix<T> c = c0;
  const Matrix<T>& Wh = value(wh);
  for (int t = 0; t < steps; ++t) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(t) * B;
    for (Eigen::Index i = 0; i < B; ++i) {
      if (reset[r0 + i]) {
        h.row(i).setZero();
        c.row(i).setZero();
      }
    }
    h_in->middleRows(r0, B) = h;
    c_in->middleRows(r0, B) = c;
    auto g = gates->middleRows(r0, B);
    g.noalias() += h * Wh;
    for (Eigen::Index i = 0; i < B; ++i) {
      for (Eigen::Index k = 0; k < H; ++k) {
        const T ig = sigmoid(g(i, k));
        const T fg = sigmoid(g(i, H + k));
        const T gg = std::tanh(g(i, 2 * H + k));
        const T og = sigmoid(g(i, 3 * H + k));
        g(i, k) = ig;
        g(i, H + k) = fg;
        g(i, 2 * H + k) = gg;
        g(i, 3 * H + k) = og;
        const T cn = fg * c(i, k) + ig * gg;
        c(i, k) = cn;
        h(i, k) = og * std::tanh(cn);
      }
    }
    cells->middleRows(r0, B) = c;
    out.middleRows(r0, B) = h;
  }
  if (carry) {
    carry->h = h;
    carry->c = c;
  }

  const NodeId id = push(std::move(out), needs(x) || needs(wx) || needs(wh) || needs(b));
  if (needs(id)) {
    nodes_[id].backward = [this, id, x, wx, wh, b, gates, cells, h_in, c_in, reset, steps, B, H] {
      const Matrix<T>& dout = nodes_[id].grad;
      const Matrix<T>& Whv = value(wh);
      Matrix<T> dpre(dout.rows(), 4 * H);
      Matrix<T> dh_next = Matrix<T>::Zero(B, H);
      Matrix<T> dc_next = Matrix<T>::Zero(B, H);
      for (int t = steps - 1; t >= 0; --t) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(t) * B;
        for (Eigen::Index i = 0; i < B; ++i) {
          const Eigen::Index r = r0 + i;
          for (Eigen::Index k = 0; k < H; ++k) {
            const T ig = (*gates)(r, k);
            const T fg = (*gates)(r, H + k);
            const T gg = (*gates)(r, 2 * H + k);
            const T og = (*gates)(r, 3 * H + k);
            const T tc = std::tanh((*cells)(r, k));
            const T dh = dout(r, k) + dh_next(i, k);
            const T dc = dh * og * (T(1) - tc * tc) + dc_next(i, k);
            dpre(r, k) = dc * gg * ig * (T(1) - ig);
            dpre(r, H + k) = dc * (*c_in)(r, k) * fg * (T(1) - fg);
            dpre(r, 2 * H + k) = dc * ig * (T(1) - gg * gg);
            dpre(r, 3 * H + k) = dh * tc * og * (T(1) - og);
            dc_next(i, k) = dc * fg;
          }
        }
        dh_next.noalias() = dpre.middleRows(r0, B) * Whv.transpose();
        for (Eigen::Index i = 0; i < B; ++i) {
          if (reset[r0 + i]) {
            dh_next.row(i).setZero();
            dc_next.row(i).setZero();
          }
        }
      }
      if (needs(wh)) grad_of(wh).noalias() += h_in->transpose() * dpre;
      if (needs(wx)) grad_of(wx).noalias() += value(x).transpose() * dpre;
      if (needs(b)) grad_of(b) += dpre.colwise().sum();
      if (needs(x)) grad_of(x).noalias() += dpre * value(wx).transpose();
    };
  }
  return id;
}

template <typename T>
void Graph<T>::backward(NodeId loss) {
  check(loss);
  if (!record_) throw ContractError("backward on a graph built without recording");
  const Matrix<T>& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("backward requires a scalar loss, got [" + std::to_string(v.rows()) +
                        "x" + std::to_string(v.cols()) + "]");
  }
  if (!needs(loss)) return;
  grad_of(loss).setConstant(T(1));
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.needs_grad && n.backward && n.grad.size() != 0) n.backward();
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace cholec::nn
