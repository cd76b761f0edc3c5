#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cholec/nn/graph.hpp"
#include "cholec/nn/tensor.hpp"

namespace cholec::nn {

inline constexpr int kNumActions = 9;
inline constexpr int kNumOutputs = kNumActions + 1;  // logits then value

enum class InputKind { kFeatures, kImage };

// Layer list of a policy-value network.
//
//   image:    conv (ReLU) x N -> fc (encoder) -> LSTM(+prev action) -> fc + ReLU -> fc 10
//   features: fc + ReLU x N -> LSTM(+prev action) -> fc 10
//
// Parameter count:
//   conv layer      O*C*k*k + O
//   dense layer     in*out + out
//   LSTM            (in + 9 + H)*4H + 4H      (input concatenated with the previous-action one-hot)
//   output layer    last*10 + 10
struct ArchSpec {
  InputKind input = InputKind::kFeatures;
  int feature_dim = 25;
  int channels = 3;
  int height = 64;
  int width = 64;
  std::vector<int> conv_channels;
  int kernel = 4;
  int stride = 2;
  int pad = 1;
  std::vector<int> encoder_fc{128, 128};
  bool encoder_relu = true;
  int lstm_hidden = 64;
  std::vector<int> head_fc;  // each followed by ReLU

  static ArchSpec features(int feature_dim = 25, int width = 128, int hidden = 64);
  static ArchSpec image(int channels = 3, int height = 64, int width = 64);

  int observation_size() const;
  // Convolution stages in order; empty for feature inputs.
  std::vector<ConvShape> conv_shapes() const;
  std::int64_t parameter_count() const;
  void validate() const;

  bool operator==(const ArchSpec&) const = default;
};

nlohmann::json to_json(const ArchSpec& a);
ArchSpec arch_from_json(const nlohmann::json& j);

// Per-lane LSTM state, [batch, hidden] each.
template <typename T>
struct RecurrentState {
  Matrix<T> h;
  Matrix<T> c;

  static RecurrentState zeros(int batch, int hidden) {
    return {Matrix<T>::Zero(batch, hidden), Matrix<T>::Zero(batch, hidden)};
  }
};

// One-hot rows for previous actions; -1 gives an all-zero row (first step of an episode).
template <typename T>
Matrix<T> action_one_hot(const std::vector<int>& actions);

template <typename T>
class PolicyValueNet {
 public:
  PolicyValueNet() = default;
  PolicyValueNet(ArchSpec spec, std::string tag);

  // Orthogonal recurrent weights, uniform(+-1/sqrt(fan_in)) elsewhere, zero biases, logit
  // columns of the output layer scaled by 0.01.
  void initialize(std::uint64_t seed);

  const ArchSpec& spec() const { return spec_; }
  const std::string& tag() const { return tag_; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::int64_t parameter_count() const;
  void zero_grad();

  RecurrentState<T> initial_state(int batch) const {
    return RecurrentState<T>::zeros(batch, spec_.lstm_hidden);
  }

  struct Output {
    NodeId logits = -1;  // [rows, 9]
    NodeId value = -1;   // [rows, 1]
    NodeId raw = -1;     // [rows, 10]
  };

  // Sequence forward on a tape. Rows are time-major (row t*batch + i is step t of lane i).
  // reset[row] != 0 zeroes the recurrent state before that row.
  Output forward(Graph<T>& g, const Matrix<T>& observations, const std::vector<int>& prev_actions,
                 const std::vector<std::uint8_t>& reset, const RecurrentState<T>& initial,
                 int steps, RecurrentState<T>* final_state = nullptr);

  // Tape-free single step for a batch of lanes; returns [batch, 10] and advances `state`.
  Matrix<T> step(const Matrix<T>& observations, const std::vector<int>& prev_actions,
                 RecurrentState<T>& state) const;

  template <typename U>
  PolicyValueNet<U> cast() const {
    PolicyValueNet<U> out(spec_, tag_);
    auto& dst = out.parameters();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      dst[i].value = params_[i].value.template cast<U>();
    }
    return out;
  }

 private:
  const Parameter<T>& p(std::size_t i) const { return params_[i]; }

  ArchSpec spec_;
  std::string tag_;
  std::vector<Parameter<T>> params_;
};

extern template class PolicyValueNet<float>;
extern template class PolicyValueNet<double>;

}  // namespace cholec::nn
