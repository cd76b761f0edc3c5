#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cholec/common/errors.hpp"
#include "cholec/nn/gradcheck.hpp"
#include "cholec/nn/graph.hpp"
#include "cholec/nn/optim.hpp"
#include "cholec/nn/policy.hpp"
#include "cholec/nn/sampling.hpp"
#include "cholec/ppo/verify.hpp"

namespace cholec::nn {
namespace {

Matrix<double> random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// ---- architecture -----------------------------------------------------------------------------

std::int64_t dense(std::int64_t in, std::int64_t out) { return in * out + out; }

TEST(ArchSpec, FeatureParameterCountFollowsTheLayerFormula) {
  const ArchSpec a = ArchSpec::features(25, 128, 64);
  const std::int64_t expected = dense(25, 128) + dense(128, 128) +
                                (128 + 9 + 64) * 4 * 64 + 4 * 64 + dense(64, 10);
  EXPECT_EQ(a.parameter_count(), expected);
  PolicyValueNet<float> net(a, "t");
  EXPECT_EQ(net.parameter_count(), expected);
}

TEST(ArchSpec, ImageParameterCountFollowsTheLayerFormula) {
  const ArchSpec a = ArchSpec::image(3, 64, 64);
  std::int64_t expected = 0;
  int c = a.channels;
  for (const ConvShape& s : a.conv_shapes()) {
    EXPECT_EQ(s.in_channels, c);
    expected += static_cast<std::int64_t>(s.out_channels) * c * s.kernel * s.kernel + s.out_channels;
    c = s.out_channels;
  }
  const ConvShape last = a.conv_shapes().back();
  std::int64_t width = static_cast<std::int64_t>(last.out_channels) * last.out_height() * last.out_width();
  for (int f : a.encoder_fc) {
    expected += dense(width, f);
    width = f;
  }
  const std::int64_t H = a.lstm_hidden;
  expected += (width + 9 + H) * 4 * H + 4 * H;
  width = H;
  for (int f : a.head_fc) {
    expected += dense(width, f);
    width = f;
  }
  expected += dense(width, 10);
  EXPECT_EQ(a.parameter_count(), expected);
  EXPECT_EQ(PolicyValueNet<float>(a, "t").parameter_count(), expected);
}

TEST(ArchSpec, JsonRoundTripAndValidation) {
  const ArchSpec a = ArchSpec::image(3, 32, 32);
  EXPECT_EQ(arch_from_json(to_json(a)), a);
  ArchSpec bad = ArchSpec::features();
  bad.lstm_hidden = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ConvShape, OutputSize) {
  const ConvShape s{3, 64, 64, 16, 4, 2, 1};
  EXPECT_EQ(s.out_height(), 32);
  EXPECT_EQ(s.out_width(), 32);
  EXPECT_EQ(s.patch(), 48);
}

// ---- policy forward ----------------------------------------------------------------------------

TEST(PolicyNet, ZeroParametersGiveAUniformPolicy) {
  PolicyValueNet<double> net(ArchSpec::features(25, 16, 8), "t");
  std::mt19937_64 rng(1);
  const Matrix<double> obs = random_matrix(4, 25, rng);
  auto state = net.initial_state(4);
  const Matrix<double> out = net.step(obs, {-1, 0, 3, 8}, state);
  for (int r = 0; r < 4; ++r) {
    for (int a = 0; a < 9; ++a) EXPECT_EQ(out(r, a), out(r, 0));
    const auto lp = log_softmax(out.row(r).data(), 9);
    for (double v : lp) EXPECT_NEAR(std::exp(v), 1.0 / 9.0, 1e-15);
  }
}

TEST(PolicyNet, IdenticalInputsGiveIdenticalOutputs) {
  PolicyValueNet<float> net(ArchSpec::features(), "t");
  net.initialize(5);
  std::mt19937_64 rng(2);
  const Matrix<float> obs = random_matrix(3, 25, rng).cast<float>();
  auto s1 = net.initial_state(3), s2 = net.initial_state(3);
  const Matrix<float> a = net.step(obs, {1, 2, -1}, s1);
  const Matrix<float> b = net.step(obs, {1, 2, -1}, s2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(s1.h, s2.h);
  EXPECT_EQ(s1.c, s2.c);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar re-implementation of the feature network, one lane, one step.
struct ReferenceNet {
  const PolicyValueNet<double>& net;

  std::vector<double> step(const std::vector<double>& obs, int prev, std::vector<double>& h,
                           std::vector<double>& c) const {
    const auto& P = net.parameters();
    const ArchSpec& spec = net.spec();
    std::vector<double> x = obs;
    std::size_t k = 0;
    for (std::size_t l = 0; l < spec.encoder_fc.size(); ++l, k += 2) {
      const auto& W = P[k].value;
      const auto& b = P[k + 1].value;
      std::vector<double> y(W.cols());
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        double s = b(0, j);
        for (Eigen::Index i = 0; i < W.rows(); ++i) s += x[i] * W(i, j);
        y[j] = spec.encoder_relu ? std::max(0.0, s) : s;
      }
      x = y;
    }
    for (int a = 0; a < 9; ++a) x.push_back(a == prev ? 1.0 : 0.0);
    const auto& Wx = P[k].value;
    const auto& Wh = P[k + 1].value;
    const auto& Lb = P[k + 2].value;
    k += 3;
    const int H = spec.lstm_hidden;
    std::vector<double> gates(4 * H);
    for (int j = 0; j < 4 * H; ++j) {
      double s = Lb(0, j);
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * Wx(i, j);
      for (int i = 0; i < H; ++i) s += h[i] * Wh(i, j);
      gates[j] = s;
    }
    for (int j = 0; j < H; ++j) {
      const double ig = sigmoid(gates[j]);
      const double fg = sigmoid(gates[H + j]);
      const double gg = std::tanh(gates[2 * H + j]);
      const double og = sigmoid(gates[3 * H + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
    }
    const auto& Wo = P[k].value;
    const auto& bo = P[k + 1].value;
    std::vector<double> out(10);
    for (int j = 0; j < 10; ++j) {
      double s = bo(0, j);
      for (int i = 0; i < H; ++i) s += h[i] * Wo(i, j);
      out[j] = s;
    }
    return out;
  }
};

TEST(PolicyNet, SequenceForwardMatchesStepwiseReference) {
  PolicyValueNet<double> net(ArchSpec::features(25, 24, 12), "t");
  net.initialize(3);
  const int T = 5, B = 2;
  std::mt19937_64 rng(4);
  const Matrix<double> obs = random_matrix(T * B, 25, rng);
  std::vector<int> prev(T * B);
  for (int& p : prev) p = static_cast<int>(rng() % 10) - 1;
  std::vector<std::uint8_t> reset(T * B, 0);
  reset[0] = 1;
  reset[3 * B + 1] = 1;  // lane 1 starts a new episode at t = 3

  Graph<double> g(false);
  RecurrentState<double> final_state;
  const auto out = net.forward(g, obs, prev, reset, net.initial_state(B), T, &final_state);
  const Matrix<double>& raw = g.value(out.raw);

  const ReferenceNet ref{net};
  for (int lane = 0; lane < B; ++lane) {
    std::vector<double> h(12, 0.0), c(12, 0.0);
    for (int t = 0; t < T; ++t) {
      const int row = t * B + lane;
      if (reset[row]) {
        std::fill(h.begin(), h.end(), 0.0);
        std::fill(c.begin(), c.end(), 0.0);
      }
      const std::vector<double> o(obs.row(row).data(), obs.row(row).data() + 25);
      const auto expected = ref.step(o, prev[row], h, c);
      for (int j = 0; j < 10; ++j) EXPECT_NEAR(raw(row, j), expected[j], 1e-12);
    }
    for (int j = 0; j < 12; ++j) {
      EXPECT_NEAR(final_state.h(lane, j), h[j], 1e-12);
      EXPECT_NEAR(final_state.c(lane, j), c[j], 1e-12);
    }
  }
}

TEST(PolicyNet, StepCarryEqualsOnePassSequence) {
  PolicyValueNet<double> net(ArchSpec::features(25, 24, 12), "t");
  net.initialize(9);
  const int T = 5, B = 3;
  std::mt19937_64 rng(5);
  const Matrix<double> obs = random_matrix(T * B, 25, rng);
  std::vector<int> prev(T * B);
  for (int& p : prev) p = static_cast<int>(rng() % 9);
  const std::vector<std::uint8_t> reset(T * B, 0);

  Graph<double> g(false);
  const auto out = net.forward(g, obs, prev, reset, net.initial_state(B), T);
  auto state = net.initial_state(B);
  for (int t = 0; t < T; ++t) {
    const Matrix<double> o = obs.middleRows(t * B, B);
    const std::vector<int> p(prev.begin() + t * B, prev.begin() + (t + 1) * B);
    const Matrix<double> r = net.step(o, p, state);
    EXPECT_LT((r - g.value(out.raw).middleRows(t * B, B)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PolicyNet, ImageStepMatchesSequenceForward) {
  PolicyValueNet<double> net(ppo::small_image_arch(), "t");
  net.initialize(2);
  const int T = 3, B = 2;
  std::mt19937_64 rng(6);
  const Matrix<double> obs = random_matrix(T * B, net.spec().observation_size(), rng);
  const std::vector<int> prev{-1, -1, 2, 4, 8, 0};
  std::vector<std::uint8_t> reset(T * B, 0);
  reset[0] = reset[1] = 1;
  Graph<double> g(false);
  const auto out = net.forward(g, obs, prev, reset, net.initial_state(B), T);
  auto state = net.initial_state(B);
  for (int t = 0; t < T; ++t) {
    const Matrix<double> r = net.step(obs.middleRows(t * B, B), {prev[t * B], prev[t * B + 1]}, state);
    EXPECT_LT((r - g.value(out.raw).middleRows(t * B, B)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PolicyNet, WrongObservationSizeIsAContractError) {
  PolicyValueNet<float> net(ArchSpec::features(), "t");
  auto s = net.initial_state(1);
  EXPECT_THROW(net.step(Matrix<float>::Zero(1, 24), {-1}, s), ContractError);
}

TEST(PolicyNet, InitializationIsSeededAndScalesLogits) {
  PolicyValueNet<float> a(ArchSpec::features(), "t"), b(ArchSpec::features(), "t");
  a.initialize(11);
  b.initialize(11);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value);
  }
  b.initialize(12);
  EXPECT_NE(a.parameters()[0].value, b.parameters()[0].value);
  // recurrent gate blocks are orthogonal
  const auto find = [&a](const std::string& name) -> const Parameter<float>& {
    for (const auto& p : a.parameters()) {
      if (p.name == name) return p;
    }
    throw std::runtime_error("missing " + name);
  };
  const auto& wh = find("lstm.wh");
  const int H = a.spec().lstm_hidden;
  const Eigen::MatrixXd q = wh.value.middleCols(0, H).cast<double>();
  EXPECT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(H, H)).cwiseAbs().maxCoeff(), 1e-5);
  const auto& out = find("out.w");
  const double bound = 1.0 / std::sqrt(static_cast<double>(H));
  EXPECT_LE(out.value.leftCols(9).cwiseAbs().maxCoeff(), 0.01 * bound + 1e-9);
  EXPECT_GT(out.value.col(9).cwiseAbs().maxCoeff(), 0.01 * bound);
}

// ---- sampling ---------------------------------------------------------------------------------

TEST(Sampling, UniformLogitsHaveMaximumEntropy) {
  const ActionSample s = greedy_action(std::vector<double>(9, 0.3));
  EXPECT_NEAR(s.entropy, std::log(9.0), 1e-12);
  EXPECT_EQ(s.action, 0);
}

TEST(Sampling, SaturatedLogitIsAlwaysChosen) {
  std::vector<double> logits(9, 0.0);
  logits[4] = 1000.0;
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    const ActionSample s = sample_action(logits, rng);
    ASSERT_EQ(s.action, 4);
    EXPECT_NEAR(s.entropy, 0.0, 1e-12);
    EXPECT_NEAR(s.log_prob, 0.0, 1e-12);
  }
}

TEST(Sampling, EmpiricalFrequenciesMatchSoftmax) {
  const std::vector<double> logits{0.1, -0.7, 1.3, 0.0, 0.4, -2.0, 0.9, 0.2, -0.3};
  const auto logp = log_softmax(logits.data(), 9);
  std::mt19937_64 rng(99);
  std::vector<int> counts(9, 0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const ActionSample s = sample_action(logits, rng);
    ++counts[s.action];
    ASSERT_DOUBLE_EQ(s.log_prob, logp[s.action]);
  }
  for (int a = 0; a < 9; ++a) EXPECT_NEAR(counts[a] / static_cast<double>(n), std::exp(logp[a]), 0.01);
}

TEST(Sampling, LogSoftmaxIsShiftInvariant) {
  const std::vector<double> a{1.0, 2.0, -3.0, 0.5};
  std::vector<double> b = a;
  for (double& v : b) v += 700.0;
  const auto la = log_softmax(a.data(), 4), lb = log_softmax(b.data(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(la[i], lb[i], 1e-12);
  EXPECT_THROW(sample_action({0.0, NAN}, *std::make_unique<std::mt19937_64>(1)), ContractError);
}

// ---- graph ------------------------------------------------------------------------------------

TEST(Graph, SumOfAParameterHasUnitGradient) {
  Parameter<double> p("p", 3, 4);
  std::mt19937_64 rng(1);
  p.value = random_matrix(3, 4, rng);
  Graph<double> g;
  g.backward(g.sum(g.param(p)));
  EXPECT_EQ(p.grad, Matrix<double>::Ones(3, 4));
}

TEST(Graph, ZeroScaledLossHasZeroGradient) {
  PolicyValueNet<double> net(ArchSpec::features(25, 16, 8), "t");
  net.initialize(1);
  std::mt19937_64 rng(2);
  const Matrix<double> obs = random_matrix(4, 25, rng);
  Graph<double> g;
  const auto out = net.forward(g, obs, {0, 1, 2, 3}, {1, 1, 0, 0}, net.initial_state(2), 2);
  g.backward(g.scale(g.sum(g.square(out.raw)), 0.0));
  for (const auto& p : net.parameters()) EXPECT_EQ(p.grad.cwiseAbs().maxCoeff(), 0.0) << p.name;
}

TEST(Graph, GradientsAccumulateAcrossBackwardCalls) {
  Parameter<double> p("p", 2, 2);
  p.value << 1, 2, 3, 4;
  for (int k = 0; k < 2; ++k) {
    Graph<double> g;
    g.backward(g.sum(g.square(g.param(p))));
  }
  EXPECT_EQ(p.grad, (4.0 * p.value).eval());
}

TEST(GradCheck, LinearLayerIsExact) {
  Parameter<double> w("w", 6, 3), b("b", 1, 3);
  std::mt19937_64 rng(3);
  w.value = random_matrix(6, 3, rng);
  b.value = random_matrix(1, 3, rng);
  const Matrix<double> x = random_matrix(5, 6, rng);
  const Matrix<double> c = random_matrix(5, 3, rng);
  const auto r = grad_check({&w, &b}, [&](Graph<double>& g) {
    return g.sum(g.mul(g.dense(g.input(x), g.param(w), g.param(b)), g.input(c)));
  });
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.checked, 21);
}

TEST(GradCheck, ComposedLossOnASmallNet) {
  PolicyValueNet<double> net(ArchSpec::features(25, 32, 8), "t");
  ASSERT_LE(net.parameter_count(), 5000);
  net.initialize(4);
  std::mt19937_64 rng(5);
  const int T = 4, B = 2;
  const Matrix<double> obs = random_matrix(T * B, 25, rng);
  const std::vector<int> prev{-1, -1, 3, 5, 8, 0, 2, 2};
  const std::vector<std::uint8_t> reset{1, 1, 0, 0, 0, 1, 0, 0};
  const std::vector<int> act{0, 1, 2, 3, 4, 5, 6, 7};
  const auto r = grad_check(net, [&](Graph<double>& g, PolicyValueNet<double>& n) {
    const auto o = n.forward(g, obs, prev, reset, n.initial_state(B), T);
    const NodeId lp = g.gather_cols(g.log_softmax(o.logits), act);
    const NodeId v = g.exp(g.clamp(o.value, -3.0, 3.0));
    return g.add(g.mean(g.mul(lp, v)), g.scale(g.sum(g.square(o.raw)), 0.1));
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(GradCheck, FeatureNetPpoSurrogate) {
  ppo::SurrogateCheckOptions opt;
  const auto r = ppo::check_surrogate_gradients(opt);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
  EXPECT_EQ(r.checked, opt.arch.parameter_count());
}

TEST(GradCheck, ConvStageOnEightByEightInput) {
  ppo::SurrogateCheckOptions opt;
  opt.arch = ppo::small_image_arch();
  ASSERT_EQ(opt.arch.conv_shapes().front().height, 8);
  ASSERT_EQ(opt.arch.conv_shapes().front().kernel, 4);
  const auto r = ppo::check_surrogate_gradients(opt);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(Conv, ForwardMatchesDirectConvolution) {
  const ConvShape s{2, 6, 5, 3, 4, 2, 1};
  std::mt19937_64 rng(8);
  const Matrix<double> x = random_matrix(2, 2 * 6 * 5, rng);
  const Matrix<double> w = random_matrix(3, s.patch(), rng);
  const Matrix<double> b = random_matrix(1, 3, rng);
  const Matrix<double> y = conv2d_forward(x, w, b, s);
  ASSERT_EQ(y.cols(), 3 * s.out_height() * s.out_width());
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 3; ++o) {
      for (int oy = 0; oy < s.out_height(); ++oy) {
        for (int ox = 0; ox < s.out_width(); ++ox) {
          double acc = b(0, o);
          for (int c = 0; c < 2; ++c) {
            for (int ky = 0; ky < 4; ++ky) {
              for (int kx = 0; kx < 4; ++kx) {
                const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 5) continue;
                acc += w(o, (c * 4 + ky) * 4 + kx) * x(n, (c * 6 + iy) * 5 + ix);
              }
            }
          }
          EXPECT_NEAR(y(n, (o * s.out_height() + oy) * s.out_width() + ox), acc, 1e-12);
        }
      }
    }
  }
}

// ---- optimizer --------------------------------------------------------------------------------

std::vector<Parameter<float>> toy_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Parameter<float>> ps;
  ps.emplace_back("a", 3, 4);
  ps.emplace_back("b", 1, 4);
  for (auto& p : ps) {
    p.value = random_matrix(p.value.rows(), p.value.cols(), rng).cast<float>();
    p.grad = random_matrix(p.value.rows(), p.value.cols(), rng, 5.0).cast<float>();
  }
  return ps;
}

TEST(Adam, ZeroLearningRateKeepsParametersBitIdentical) {
  auto ps = toy_params(1);
  const auto before = ps;
  auto st = AdamState<float>::zeros_like(ps);
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  for (int k = 0; k < 5; ++k) EXPECT_TRUE(adam_step(ps, st, cfg));
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].value, before[i].value);
  EXPECT_EQ(st.step, 5);
}

TEST(Adam, AllZeroGradientsSkipTheStep) {
  auto ps = toy_params(2);
  for (auto& p : ps) p.zero_grad();
  auto st = AdamState<float>::zeros_like(ps);
  const auto before = ps;
  EXPECT_FALSE(adam_step(ps, st, {}));
  EXPECT_EQ(st.step, 0);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(ps[i].value, before[i].value);
    EXPECT_EQ(st.m[i].cwiseAbs().maxCoeff(), 0.0f);
  }
}

TEST(Adam, FirstStepMatchesClosedForm) {
  std::vector<Parameter<double>> ps;
  ps.emplace_back("x", 1, 3);
  ps[0].value << 1.0, -2.0, 0.5;
  ps[0].grad << 0.3, -4.0, 1e-3;
  auto st = AdamState<double>::zeros_like(ps);
  AdamConfig cfg;
  const Matrix<double> x0 = ps[0].value, g = ps[0].grad;
  adam_step(ps, st, cfg);
  for (int i = 0; i < 3; ++i) {
    // bias-corrected moments after one step are g and g^2
    const double expected = x0(0, i) - cfg.learning_rate * g(0, i) / (std::abs(g(0, i)) + cfg.eps);
    EXPECT_NEAR(ps[0].value(0, i), expected, 1e-15);
  }
}

TEST(ClipGradNorm, RescalesOnlyAboveTheThreshold) {
  auto ps = toy_params(3);
  const double before = grad_norm(ps);
  ASSERT_GT(before, 1.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), before);
  EXPECT_LE(grad_norm(ps), 1.0 + 1e-6);
  EXPECT_NEAR(grad_norm(ps), 1.0, 1e-6);
  const auto small = ps;
  clip_grad_norm(ps, 10.0);
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].grad, small[i].grad);
}

TEST(ClipGradNorm, GlobalNormIsTheL2NormOverAllTensors) {
  auto ps = toy_params(4);
  double sq = 0.0;
  for (const auto& p : ps) {
    for (Eigen::Index i = 0; i < p.grad.size(); ++i) sq += double(p.grad.data()[i]) * p.grad.data()[i];
  }
  EXPECT_NEAR(grad_norm(ps), std::sqrt(sq), 1e-9);
}

}  // namespace
}  // namespace cholec::nn
