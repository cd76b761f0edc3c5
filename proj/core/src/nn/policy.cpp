#include "cholec/nn/policy.hpp"

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "cholec/common/errors.hpp"

namespace cholec::nn {

ArchSpec ArchSpec::features(int feature_dim, int width, int hidden) {
  ArchSpec a;
  a.input = InputKind::kFeatures;
  a.feature_dim = feature_dim;
  a.encoder_fc = {width, width};
  a.encoder_relu = true;
  a.lstm_hidden = hidden;
  a.head_fc = {};
  return a;
}

ArchSpec ArchSpec::image(int channels, int height, int width) {
  ArchSpec a;
  a.input = InputKind::kImage;
  a.channels = channels;
  a.height = height;
  a.width = width;
  a.conv_channels = {32, 64, 128, 256, 512};
  a.encoder_fc = {1024};
  a.encoder_relu = false;
  a.lstm_hidden = 512;
  a.head_fc = {1024};
  return a;
}

int ArchSpec::observation_size() const {
  return input == InputKind::kFeatures ? feature_dim : channels * height * width;
}

std::vector<ConvShape> ArchSpec::conv_shapes() const {
  std::vector<ConvShape> out;
  if (input != InputKind::kImage) return out;
  int c = channels;
  int h = height;
  int w = width;
  for (int o : conv_channels) {
    ConvShape s{c, h, w, o, kernel, stride, pad};
    out.push_back(s);
    c = o;
    h = s.out_height();
    w = s.out_width();
  }
  return out;
}

void ArchSpec::validate() const {
  const auto positive = [](int v, const char* what) {
    if (v < 1) throw ConfigError(std::string("architecture: ") + what + " must be >= 1");
  };
  if (input == InputKind::kFeatures) {
    positive(feature_dim, "feature_dim");
    if (!conv_channels.empty()) throw ConfigError("architecture: feature input takes no convs");
  } else {
    positive(channels, "channels");
    positive(height, "height");
    positive(width, "width");
    positive(kernel, "kernel");
    positive(stride, "stride");
    if (pad < 0) throw ConfigError("architecture: pad must be >= 0");
    for (const auto& s : conv_shapes()) {
      positive(s.out_channels, "conv channels");
      if (s.out_height() < 1 || s.out_width() < 1) {
        throw ConfigError("architecture: convolution stack shrinks the image to nothing");
      }
    }
  }
  for (int v : encoder_fc) positive(v, "encoder width");
  for (int v : head_fc) positive(v, "head width");
  positive(lstm_hidden, "lstm_hidden");
}

std::int64_t ArchSpec::parameter_count() const {
  std::int64_t n = 0;
  std::int64_t width = feature_dim;
  if (input == InputKind::kImage) {
    width = std::int64_t{channels} * height * this->width;
    for (const auto& s : conv_shapes()) {
      n += std::int64_t{s.out_channels} * s.patch() + s.out_channels;
      width = std::int64_t{s.out_channels} * s.out_height() * s.out_width();
    }
  }
  for (int o : encoder_fc) {
    n += width * o + o;
    width = o;
  }
  const std::int64_t H = lstm_hidden;
  n += (width + kNumActions + H) * 4 * H + 4 * H;
  width = H;
  for (int o : head_fc) {
    n += width * o + o;
    width = o;
  }
  n += width * kNumOutputs + kNumOutputs;
  return n;
}

nlohmann::json to_json(const ArchSpec& a) {
  return {{"input", a.input == InputKind::kFeatures ? "features" : "image"},
          {"feature_dim", a.feature_dim},
          {"channels", a.channels},
          {"height", a.height},
          {"width", a.width},
          {"conv_channels", a.conv_channels},
          {"kernel", a.kernel},
          {"stride", a.stride},
          {"pad", a.pad},
          {"encoder_fc", a.encoder_fc},
          {"encoder_relu", a.encoder_relu},
          {"lstm_hidden", a.lstm_hidden},
          {"head_fc", a.head_fc}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  try {
    ArchSpec a;
    const std::string input = j.at("input").get<std::string>();
    if (input != "features" && input != "image") {
      throw ConfigError("architecture: unknown input kind '" + input + "'");
    }
    a.input = input == "features" ? InputKind::kFeatures : InputKind::kImage;
    a.feature_dim = j.at("feature_dim").get<int>();
    a.channels = j.at("channels").get<int>();
    a.height = j.at("height").get<int>();
    a.width = j.at("width").get<int>();
    a.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    a.kernel = j.at("kernel").get<int>();
    a.stride = j.at("stride").get<int>();
    a.pad = j.at("pad").get<int>();
    a.encoder_fc = j.at("encoder_fc").get<std::vector<int>>();
    a.encoder_relu = j.at("encoder_relu").get<bool>();
    a.lstm_hidden = j.at("lstm_hidden").get<int>();
    a.head_fc = j.at("head_fc").get<std::vector<int>>();
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture: malformed descriptor: ") + e.what());
  }
}

template <typename T>
Matrix<T> action_one_hot(const std::vector<int>& actions) {
  Matrix<T> m = Matrix<T>::Zero(static_cast<Eigen::Index>(actions.size()), kNumActions);
  for (std::size_t r = 0; r < actions.size(); ++r) {
    const int a = actions[r];
    if (a < -1 || a >= kNumActions) throw ContractError("previous action out of range");
    if (a >= 0) m(static_cast<Eigen::Index>(r), a) = T(1);
  }
  return m;
}

template Matrix<float> action_one_hot<float>(const std::vector<int>&);
template Matrix<double> action_one_hot<double>(const std::vector<int>&);

template <typename T>
PolicyValueNet<T>::PolicyValueNet(ArchSpec spec, std::string tag)
    : spec_(std::move(spec)), tag_(std::move(tag)) {
  spec_.validate();
  int width = spec_.feature_dim;
  if (spec_.input == InputKind::kImage) {
    const auto convs = spec_.conv_shapes();
    for (std::size_t i = 0; i < convs.size(); ++i) {
      const auto& s = convs[i];
      params_.emplace_back("conv" + std::to_string(i) + ".w", s.out_channels, s.patch());
      params_.emplace_back("conv" + std::to_string(i) + ".b", 1, s.out_channels);
    }
    width = convs.empty() ? spec_.observation_size()
                          : convs.back().out_channels * convs.back().out_height() *
                                convs.back().out_width();
  }
  for (std::size_t i = 0; i < spec_.encoder_fc.size(); ++i) {
    params_.emplace_back("enc" + std::to_string(i) + ".w", width, spec_.encoder_fc[i]);
    params_.emplace_back("enc" + std::to_string(i) + ".b", 1, spec_.encoder_fc[i]);
    width = spec_.encoder_fc[i];
  }
  const int H = spec_.lstm_hidden;
  params_.emplace_back("lstm.wx", width + kNumActions, 4 * H);
  params_.emplace_back("lstm.wh", H, 4 * H);
  params_.emplace_back("lstm.b", 1, 4 * H);
  width = H;
  for (std::size_t i = 0; i < spec_.head_fc.size(); ++i) {
    params_.emplace_back("head" + std::to_string(i) + ".w", width, spec_.head_fc[i]);
    params_.emplace_back("head" + std::to_string(i) + ".b", 1, spec_.head_fc[i]);
    width = spec_.head_fc[i];
  }
  params_.emplace_back("out.w", width, kNumOutputs);
  params_.emplace_back("out.b", 1, kNumOutputs);
}

template <typename T>
void PolicyValueNet<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng](double bound) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return bound * (2.0 * u - 1.0);
  };
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& prm : params_) {
    const auto& n = prm.name;
    const bool bias = n.size() >= 2 && n.compare(n.size() - 2, 2, ".b") == 0;
    if (bias) {
      prm.value.setZero();
    } else if (n == "lstm.wh") {
      // one orthogonal block per gate
      const Eigen::Index H = prm.value.rows();
      for (int gate = 0; gate < 4; ++gate) {
        Eigen::MatrixXd a(H, H);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(H, H);
        const Eigen::MatrixXd r = qr.matrixQR();
        for (Eigen::Index k = 0; k < H; ++k) {
          if (r(k, k) < 0.0) q.col(k) *= -1.0;
        }
        prm.value.middleCols(gate * H, H) = q.cast<T>();
      }
    } else {
      const double fan_in = n.rfind("conv", 0) == 0 ? static_cast<double>(prm.value.cols())
                                                     : static_cast<double>(prm.value.rows());
      const double bound = 1.0 / std::sqrt(fan_in);
      for (Eigen::Index i = 0; i < prm.value.size(); ++i) {
        prm.value.data()[i] = static_cast<T>(uniform(bound));
      }
      if (n == "out.w") prm.value.leftCols(kNumActions) *= T(0.01);
    }
    prm.zero_grad();
  }
}

template <typename T>
std::int64_t PolicyValueNet<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& prm : params_) n += prm.size();
  return n;
}

template <typename T>
void PolicyValueNet<T>::zero_grad() {
  for (auto& prm : params_) prm.zero_grad();
}

template <typename T>
typename PolicyValueNet<T>::Output PolicyValueNet<T>::forward(
    Graph<T>& g, const Matrix<T>& observations, const std::vector<int>& prev_actions,
    const std::vector<std::uint8_t>& reset, const RecurrentState<T>& initial, int steps,
    RecurrentState<T>* final_state) {
  if (observations.cols() != spec_.observation_size()) {
    throw ContractError("policy forward: observation has " + std::to_string(observations.cols()) +
                        " values, architecture expects " +
                        std::to_string(spec_.observation_size()));
  }
  if (static_cast<Eigen::Index>(prev_actions.size()) != observations.rows()) {
    throw ContractError("policy forward: one previous action per row required");
  }
  std::size_t k = 0;
  NodeId x = g.input(observations);
  for (const auto& s : spec_.conv_shapes()) {
    const NodeId w = g.param(params_[k++]);
    const NodeId b = g.param(params_[k++]);
    x = g.relu(g.conv2d(x, w, b, s));
  }
  for (std::size_t i = 0; i < spec_.encoder_fc.size(); ++i) {
    const NodeId w = g.param(params_[k++]);
    const NodeId b = g.param(params_[k++]);
    x = g.dense(x, w, b);
    if (spec_.encoder_relu) x = g.relu(x);
  }
  x = g.concat_cols(x, g.input(action_one_hot<T>(prev_actions)));
  const NodeId wx = g.param(params_[k++]);
  const NodeId wh = g.param(params_[k++]);
  const NodeId lb = g.param(params_[k++]);
  LstmCarry<T> carry;
  x = g.lstm_sequence(x, wx, wh, lb, initial.h, initial.c, reset, steps, &carry);
  if (final_state) {
    final_state->h = std::move(carry.h);
    final_state->c = std::move(carry.c);
  }
  for (std::size_t i = 0; i < spec_.head_fc.size(); ++i) {
    const NodeId w = g.param(params_[k++]);
    const NodeId b = g.param(params_[k++]);
    x = g.relu(g.dense(x, w, b));
  }
  const NodeId w = g.param(params_[k++]);
  const NodeId b = g.param(params_[k++]);
  Output out;
  out.raw = g.dense(x, w, b);
  out.logits = g.slice_cols(out.raw, 0, kNumActions);
  out.value = g.slice_cols(out.raw, kNumActions, 1);
  return out;
}

template <typename T>
Matrix<T> PolicyValueNet<T>::step(const Matrix<T>& observations,
                                  const std::vector<int>& prev_actions,
                                  RecurrentState<T>& state) const {
  if (observations.cols() != spec_.observation_size()) {
    throw ContractError("policy step: observation has " + std::to_string(observations.cols()) +
                        " values, architecture expects " +
                        std::to_string(spec_.observation_size()));
  }
  const Eigen::Index B = observations.rows();
  const int H = spec_.lstm_hidden;
  if (static_cast<Eigen::Index>(prev_actions.size()) != B || state.h.rows() != B ||
      state.h.cols() != H || state.c.rows() != B || state.c.cols() != H) {
    throw ContractError("policy step: batch size of actions or state does not match");
  }
  std::size_t k = 0;
  Matrix<T> x = observations;
  for (const auto& s : spec_.conv_shapes()) {
    x = conv2d_forward(x, p(k).value, p(k + 1).value, s).cwiseMax(T(0));
    k += 2;
  }
  Matrix<T> y;
  for (std::size_t i = 0; i < spec_.encoder_fc.size(); ++i) {
    y.noalias() = x * p(k).value;
    y.rowwise() += p(k + 1).value.row(0);
    if (spec_.encoder_relu) y = y.cwiseMax(T(0));
    x.swap(y);
    k += 2;
  }
  Matrix<T> in(B, x.cols() + kNumActions);
  in.leftCols(x.cols()) = x;
  in.rightCols(kNumActions) = action_one_hot<T>(prev_actions);
  Matrix<T> gates = in * p(k).value;
  gates.rowwise() += p(k + 2).value.row(0);
  gates.noalias() += state.h * p(k + 1).value;
  k += 3;
  for (Eigen::Index i = 0; i < B; ++i) {
    for (int j = 0; j < H; ++j) {
      const T ig = T(1) / (T(1) + std::exp(-gates(i, j)));
      const T fg = T(1) / (T(1) + std::exp(-gates(i, H + j)));
      const T gg = std::tanh(gates(i, 2 * H + j));
      const T og = T(1) / (T(1) + std::exp(-gates(i, 3 * H + j)));
      const T cn = fg * state.c(i, j) + ig * gg;
      state.c(i, j) = cn;
      state.h(i, j) = og * std::tanh(cn);
    }
  }
  x = state.h;
  for (std::size_t i = 0; i < spec_.head_fc.size(); ++i) {
    y.noalias() = x * p(k).value;
    y.rowwise() += p(k + 1).value.row(0);
    x = y.cwiseMax(T(0));
    k += 2;
  }
  Matrix<T> out = x * p(k).value;
  out.rowwise() += p(k + 1).value.row(0);
  return out;
}

template class PolicyValueNet<float>;
template class PolicyValueNet<double>;

}  // namespace cholec::nn
