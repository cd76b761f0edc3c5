#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "cholec/common/errors.hpp"
#include "cholec/ppo/checkpoint.hpp"
#include "cholec/ppo/config.hpp"
#include "cholec/ppo/gae.hpp"
#include "cholec/ppo/losses.hpp"
#include "cholec/ppo/trainer.hpp"
#include "test_util.hpp"

namespace cholec::ppo {
namespace {

const std::vector<std::uint8_t> none(std::size_t n) { return std::vector<std::uint8_t>(n, 0); }

// Sum over k of (gamma lambda)^k delta_{t+k}, stopping after the first terminal step.
std::vector<double> brute_force_gae(const std::vector<double>& r, const std::vector<double>& v,
                                    const std::vector<std::uint8_t>& done, double last_value,
                                    double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = done[t] ? 0.0 : (t + 1 < n ? v[t + 1] : last_value);
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += weight * delta[k];
      if (done[k]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

TEST(Gae, LambdaZeroIsTheTdResidual) {
  const std::vector<double> r{1.0, -0.5, 2.0, 0.25}, v{0.3, 0.1, -0.2, 0.7};
  std::vector<double> boot(4, 0.0);
  boot[3] = 0.9;
  const auto a = compute_gae(r, v, none(4), none(4), boot, 0.99, 0.0);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(a[t], r[t] + 0.99 * v[t + 1] - v[t]);
  EXPECT_EQ(a[3], r[3] + 0.99 * 0.9 - v[3]);
}

TEST(Gae, LambdaOneIsTheMonteCarloAdvantage) {
  const std::vector<double> r{1.0, -0.5, 2.0, 0.25, 3.0}, v{0.3, 0.1, -0.2, 0.7, 1.1};
  std::vector<std::uint8_t> done = none(5);
  done[4] = 1;
  const double g = 0.99;
  const auto a = compute_gae(r, v, done, none(5), std::vector<double>(5, 0.0), g, 1.0);
  for (int t = 0; t < 5; ++t) {
    double ret = 0.0, w = 1.0;
    for (int j = t; j < 5; ++j, w *= g) ret += w * r[j];
    EXPECT_NEAR(a[t], ret - v[t], 1e-12);
  }
  // targets equal the discounted empirical returns
  const auto targets = value_targets(a, v);
  double ret0 = 0.0, w = 1.0;
  for (int j = 0; j < 5; ++j, w *= g) ret0 += w * r[j];
  EXPECT_NEAR(targets[0], ret0, 1e-12);
}

TEST(Gae, RandomSequenceMatchesNestedSum) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> r(8), v(8);
  for (int t = 0; t < 8; ++t) {
    r[t] = u(rng);
    v[t] = u(rng);
  }
  std::vector<std::uint8_t> done = none(8);
  done[3] = 1;
  std::vector<double> boot(8, 0.0);
  boot[7] = u(rng);
  const auto a = compute_gae(r, v, done, none(8), boot, 0.99, 0.8);
  const auto oracle = brute_force_gae(r, v, done, boot[7], 0.99, 0.8);
  for (int t = 0; t < 8; ++t) EXPECT_NEAR(a[t], oracle[t], 1e-12);
}

TEST(Gae, TruncationBootstrapsAndStopsCredit) {
  const std::vector<double> r{1.0, 2.0, 3.0}, v{0.5, 0.25, 0.125};
  std::vector<std::uint8_t> trunc = none(3);
  trunc[1] = 1;
  const std::vector<double> boot{0.0, 4.0, 8.0};
  const auto a = compute_gae(r, v, none(3), trunc, boot, 0.9, 0.7);
  EXPECT_DOUBLE_EQ(a[2], 3.0 + 0.9 * 8.0 - 0.125);
  EXPECT_DOUBLE_EQ(a[1], 2.0 + 0.9 * 4.0 - 0.25);
  EXPECT_DOUBLE_EQ(a[0], 1.0 + 0.9 * 0.25 - 0.5 + 0.9 * 0.7 * a[1]);
}

TEST(Gae, LengthMismatchIsAContractError) {
  EXPECT_THROW(compute_gae({1.0}, {1.0, 2.0}, none(1), none(1), {0.0}, 0.99, 0.8), ContractError);
}

TEST(ValueTargets, ZeroAdvantagesGiveTheValues) {
  const std::vector<double> v{0.1, -2.0, 3.5};
  EXPECT_EQ(value_targets({0.0, 0.0, 0.0}, v), v);
}

TEST(ValueTargets, DifferenceIsTheAdvantageBitwise) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  // dyadic values with short mantissas, so that a + v is exact
  const auto dyadic = [&] { return std::round(std::ldexp(u(rng), 20)) / 1048576.0; };
  std::vector<double> a(64), v(64);
  for (int i = 0; i < 64; ++i) {
    a[i] = dyadic();
    v[i] = dyadic();
  }
  const auto t = value_targets(a, v);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(t[i] - v[i], a[i]);
}

TEST(Normalize, ProducesZeroMeanUnitStd) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(3.0, 7.0);
  std::vector<double> x(500);
  for (double& v : x) v = n(rng);
  const Moments before = normalize(x);
  EXPECT_GT(before.std, 1.0);
  const Moments after = moments(x);
  EXPECT_LT(std::abs(after.mean), 1e-12);
  EXPECT_LT(std::abs(after.std - 1.0), 1e-6);
}

// ---- losses -----------------------------------------------------------------------------------

struct LossFixture {
  nn::Graph<double> g;
  nn::NodeId logits, value;

  LossFixture(const nn::Matrix<double>& l, const nn::Matrix<double>& v)
      : logits(g.input(l)), value(g.input(v)) {}
};

TEST(PpoLoss, RatioOneGivesMinusMeanAdvantage) {
  nn::Matrix<double> l(3, 9);
  l.setRandom();
  const std::vector<int> act{0, 4, 8};
  LossFixture f(l, nn::Matrix<double>::Zero(3, 1));
  nn::Matrix<double> old(3, 1), adv(3, 1);
  for (int i = 0; i < 3; ++i) {
    const auto lp = nn::Matrix<double>(l.row(i));
    double m = lp.maxCoeff(), z = 0.0;
    for (int a = 0; a < 9; ++a) z += std::exp(lp(0, a) - m);
    old(i, 0) = lp(0, act[i]) - m - std::log(z);
  }
  adv << 1.0, -2.0, 0.5;
  const PpoLoss out = ppo_loss(f.g, f.logits, f.value, act, old, adv, nn::Matrix<double>(nn::Matrix<double>::Zero(3, 1)), LossCoefficients{});
  EXPECT_NEAR(out.policy_loss, -(1.0 - 2.0 + 0.5) / 3.0, 1e-12);
  EXPECT_EQ(out.clip_fraction, 0.0);
}

TEST(PpoLoss, UpperClipBindsForPositiveAdvantage) {
  const nn::Matrix<double> l = nn::Matrix<double>::Zero(1, 9);
  LossFixture f(l, nn::Matrix<double>::Zero(1, 1));
  nn::Matrix<double> old(1, 1), adv(1, 1);
  old(0, 0) = std::log(1.0 / 9.0) - std::log(2.0);  // rho = 2
  adv(0, 0) = 3.0;
  LossCoefficients c;
  c.clip_ratio = 0.1;
  const PpoLoss out = ppo_loss(f.g, f.logits, f.value, std::vector<int>{2}, old, adv, nn::Matrix<double>(nn::Matrix<double>::Zero(1, 1)), c);
  EXPECT_NEAR(out.policy_loss, -1.1 * 3.0, 1e-12);
  EXPECT_EQ(out.clip_fraction, 1.0);
}

TEST(PpoLoss, SyntheticBatchMatchesScalarFormula) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 16;
  nn::Matrix<double> l(n, 9), v(n, 1), old(n, 1), adv(n, 1), tgt(n, 1);
  std::vector<int> act(n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 9; ++a) l(i, a) = 2.0 * u(rng);
    v(i, 0) = u(rng);
    old(i, 0) = -2.2 + 0.4 * u(rng);
    adv(i, 0) = u(rng);
    tgt(i, 0) = u(rng);
    act[i] = static_cast<int>(rng() % 9);
  }
  const LossCoefficients c{0.2, 0.5, 0.01};
  LossFixture f(l, v);
  const PpoLoss out = ppo_loss(f.g, f.logits, f.value, act, old, adv, tgt, c);

  double pi = 0.0, vl = 0.0, ent = 0.0;
  for (int i = 0; i < n; ++i) {
    double m = l(i, 0);
    for (int a = 1; a < 9; ++a) m = std::max(m, l(i, a));
    double z = 0.0;
    for (int a = 0; a < 9; ++a) z += std::exp(l(i, a) - m);
    const double lse = m + std::log(z);
    const double rho = std::exp(l(i, act[i]) - lse - old(i, 0));
    const double clipped = std::min(std::max(rho, 1.0 - c.clip_ratio), 1.0 + c.clip_ratio);
    pi += std::min(rho * adv(i, 0), clipped * adv(i, 0));
    vl += (v(i, 0) - tgt(i, 0)) * (v(i, 0) - tgt(i, 0));
    for (int a = 0; a < 9; ++a) {
      const double lp = l(i, a) - lse;
      ent -= std::exp(lp) * lp;
    }
  }
  const double total = -pi / n + c.value_coef * vl / n - c.entropy_coef * ent / n;
  EXPECT_NEAR(f.g.value(out.total)(0, 0), total, 1e-10);
  EXPECT_NEAR(out.value_loss, vl / n, 1e-12);
  EXPECT_NEAR(out.entropy, ent / n, 1e-12);
}

// ---- config -----------------------------------------------------------------------------------

TEST(PpoConfig, DefaultsAndDerivedSizes) {
  const PpoConfig c;
  EXPECT_EQ(c.batch_steps, 2560);
  EXPECT_EQ(c.n_parallel_envs, 16);
  EXPECT_EQ(c.unroll_length(), 160);
  EXPECT_EQ(c.lanes_per_minibatch(), 4);
  EXPECT_DOUBLE_EQ(c.clip_ratio, 0.1);
  EXPECT_DOUBLE_EQ(c.gae_lambda, 0.8);
  EXPECT_DOUBLE_EQ(c.gamma, 0.99);
  EXPECT_DOUBLE_EQ(c.learning_rate, 3e-4);
  EXPECT_DOUBLE_EQ(c.grad_clip_norm, 1.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(PpoConfig, JsonRoundTripAndValidation) {
  PpoConfig c;
  c.seed = 77;
  c.shared_reward = true;
  EXPECT_EQ(to_json(ppo_config_from_json(to_json(c))), to_json(c));
  c.batch_steps = 2561;
  EXPECT_THROW(c.validate(), ConfigError);
  nlohmann::json j = to_json(PpoConfig{});
  j["gamma"] = 1.5;
  EXPECT_THROW(ppo_config_from_json(j), ConfigError);
  j = to_json(PpoConfig{});
  j["lerning_rate"] = 0.1;
  EXPECT_THROW(ppo_config_from_json(j), ConfigError);
}

// ---- trainer ----------------------------------------------------------------------------------

PpoConfig small_config(std::uint64_t seed = 0) {
  PpoConfig c;
  c.seed = seed;
  c.batch_steps = 320;  // 16 lanes x 20 steps
  c.feature_width = 32;
  c.feature_lstm = 16;
  return c;
}

void expect_same_stats(const TrainStats& a, const TrainStats& b) {
  EXPECT_EQ(a.iteration, b.iteration);
  EXPECT_EQ(a.env_steps, b.env_steps);
  EXPECT_EQ(a.iteration_steps, b.iteration_steps);
  EXPECT_EQ(a.episodes, b.episodes);
  EXPECT_EQ(a.reached_goal, b.reached_goal);
  EXPECT_EQ(a.lost_grasp, b.lost_grasp);
  EXPECT_EQ(a.ran_out_of_time, b.ran_out_of_time);
  for (int k = 0; k < kNumAgents; ++k) {
    const AgentStats &x = a.agents[k], &y = b.agents[k];
    EXPECT_EQ(x.policy_loss, y.policy_loss);
    EXPECT_EQ(x.value_loss, y.value_loss);
    EXPECT_EQ(x.entropy, y.entropy);
    EXPECT_EQ(x.clip_fraction, y.clip_fraction);
    EXPECT_EQ(x.grad_norm, y.grad_norm);
    EXPECT_EQ(x.max_clipped_grad_norm, y.max_clipped_grad_norm);
    EXPECT_EQ(x.advantage_mean, y.advantage_mean);
    EXPECT_EQ(x.advantage_std, y.advantage_std);
    EXPECT_EQ(x.mean_return, y.mean_return);
    EXPECT_EQ(x.optimizer_steps, y.optimizer_steps);
  }
}

void expect_same_params(const nn::PolicyValueNet<float>& a, const nn::PolicyValueNet<float>& b) {
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value) << a.parameters()[i].name;
  }
}

TEST(Trainer, ZeroLearningRateKeepsParametersBitIdentical) {
  PpoConfig c = small_config();
  c.learning_rate = 0.0;
  Trainer t({}, c);
  const auto g0 = t.net(0), c0 = t.net(1);
  t.iteration();
  expect_same_params(t.net(0), g0);
  expect_same_params(t.net(1), c0);
}

TEST(Trainer, SameSeedsGiveBitIdenticalStats) {
  Trainer a({}, small_config(3)), b({}, small_config(3));
  for (int k = 0; k < 3; ++k) expect_same_stats(a.iteration(), b.iteration());
  expect_same_params(a.net(0), b.net(0));
  expect_same_params(a.net(1), b.net(1));
  Trainer other({}, small_config(4));
  EXPECT_NE(other.net(0).parameters()[0].value, a.net(0).parameters()[0].value);
}

TEST(Trainer, IterationConsumesTheConfiguredBatch) {
  Trainer t({}, PpoConfig{});
  const TrainStats s = t.iteration();
  EXPECT_EQ(s.iteration_steps, 2560);
  EXPECT_EQ(t.env_steps(), 2560);
  EXPECT_EQ(s.agents[0].optimizer_steps, 16);
  EXPECT_EQ(t.iterations(), 1);
}

TEST(Trainer, ZeroLossScaleFreezesOnlyThatAgent) {
  Trainer t({}, small_config(5));
  t.set_loss_scale(1, 0.0);
  const auto g0 = t.net(0), c0 = t.net(1);
  t.iteration();
  t.iteration();
  expect_same_params(t.net(1), c0);
  EXPECT_EQ(t.optimizer(1).step, 0);
  EXPECT_NE(t.net(0).parameters()[0].value, g0.parameters()[0].value);
}

TEST(Trainer, AdvantagesAreNormalizedAndGradientsClipped) {
  Trainer t({}, small_config(6));
  for (int k = 0; k < 2; ++k) {
    const TrainStats s = t.iteration();
    for (const AgentStats& a : s.agents) {
      EXPECT_LT(std::abs(a.advantage_mean), 1e-6);
      EXPECT_LT(std::abs(a.advantage_std - 1.0), 1e-6);
      EXPECT_LE(a.max_clipped_grad_norm, 1.0 + 1e-6);
      EXPECT_GT(a.grad_norm, 0.0);
    }
  }
}

TEST(Trainer, CollectedBatchIsConsistent) {
  Trainer t({}, small_config(7));
  const RolloutBatch b = t.collect();
  const PpoConfig& c = t.config();
  EXPECT_EQ(b.steps, c.unroll_length());
  EXPECT_EQ(b.lanes, c.n_parallel_envs);
  EXPECT_EQ(b.observations.rows(), b.rows());
  for (int i = 0; i < b.lanes; ++i) EXPECT_EQ(b.resets[i], 1);
  for (const AgentRollout& a : b.agents) {
    ASSERT_EQ(static_cast<int>(a.actions.size()), b.rows());
    for (int row = 0; row < b.rows(); ++row) {
      EXPECT_GE(a.actions[row], 0);
      EXPECT_LT(a.actions[row], 9);
      EXPECT_LE(a.log_probs[row], 0.0);
      if (b.resets[row]) {
        EXPECT_EQ(a.prev_actions[row], -1);
      } else {
        EXPECT_EQ(a.prev_actions[row], a.actions[row - b.lanes]);
      }
    }
  }
  // The recomputed, per-agent normalized advantages have zero mean and unit std.
  for (const AgentRollout& a : b.agents) {
    std::vector<double> all;
    for (int lane = 0; lane < b.lanes; ++lane) {
      std::vector<double> r, v, boot;
      std::vector<std::uint8_t> d, tr;
      for (int s = 0; s < b.steps; ++s) {
        const int row = s * b.lanes + lane;
        r.push_back(a.rewards[row]);
        v.push_back(a.values[row]);
        boot.push_back(a.bootstrap_values[row]);
        d.push_back(b.dones[row]);
        tr.push_back(b.truncations[row]);
      }
      const auto adv = compute_gae(r, v, d, tr, boot, c.gamma, c.gae_lambda);
      all.insert(all.end(), adv.begin(), adv.end());
    }
    normalize(all);
    const Moments m = moments(all);
    EXPECT_LT(std::abs(m.mean), 1e-6);
    EXPECT_LT(std::abs(m.std - 1.0), 1e-6);
  }
}

TEST(Trainer, TelemetryRowMatchesHeader) {
  Trainer t({}, small_config());
  const std::string row = telemetry_row(t.iteration());
  const std::string head = telemetry_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(head.begin(), head.end(), ','));
  EXPECT_EQ(row.rfind("1,320,", 0), 0u);
}

// ---- checkpoints ------------------------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitIdentical) {
  Trainer t({}, small_config(9));
  t.iteration();
  test::TempDir dir;
  save_checkpoint(t.net(0), t.optimizer(0), 320, 1, 0xabcdef, dir / "g.ckpt");
  const AgentCheckpoint ck = load_checkpoint(dir / "g.ckpt");
  expect_same_params(ck.net, t.net(0));
  EXPECT_EQ(ck.net.spec(), t.net(0).spec());
  EXPECT_EQ(ck.net.tag(), t.net(0).tag());
  EXPECT_EQ(ck.env_steps, 320);
  EXPECT_EQ(ck.iteration, 1);
  EXPECT_EQ(ck.config_hash, 0xabcdefu);
  EXPECT_EQ(ck.adam.step, t.optimizer(0).step);
  for (std::size_t i = 0; i < ck.adam.m.size(); ++i) {
    EXPECT_EQ(ck.adam.m[i], t.optimizer(0).m[i]);
    EXPECT_EQ(ck.adam.v[i], t.optimizer(0).v[i]);
  }
}

TEST(Checkpoint, ArchitectureMismatchLeavesTheTargetUntouched) {
  test::TempDir dir;
  nn::PolicyValueNet<float> small(nn::ArchSpec::features(25, 32, 16), "gripper");
  small.initialize(1);
  save_checkpoint(small, nn::AdamState<float>::zeros_like(small.parameters()), 0, 0, 0,
                  dir / "s.ckpt");
  nn::PolicyValueNet<float> big(nn::ArchSpec::features(25, 64, 16), "gripper");
  big.initialize(2);
  const auto before = big;
  auto adam = nn::AdamState<float>::zeros_like(big.parameters());
  adam.step = 42;
  EXPECT_THROW(load_checkpoint_into(dir / "s.ckpt", big, &adam), CheckpointError);
  expect_same_params(big, before);
  EXPECT_EQ(adam.step, 42);
}

TEST(Checkpoint, CorruptionAndTruncationAreDetected) {
  test::TempDir dir;
  nn::PolicyValueNet<float> net(nn::ArchSpec::features(25, 16, 8), "cauter");
  net.initialize(3);
  save_checkpoint(net, nn::AdamState<float>::zeros_like(net.parameters()), 0, 0, 0, dir / "c.ckpt");
  std::string bytes = test::read_file(dir / "c.ckpt");
  ASSERT_GT(bytes.size(), 200u);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  std::ofstream(dir / "flip.ckpt", std::ios::binary) << flipped;
  EXPECT_THROW(load_checkpoint(dir / "flip.ckpt"), CheckpointError);

  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), CheckpointError);

  std::string magic = bytes;
  magic[0] = 'X';
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << magic;
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), CheckpointError);

  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST(Checkpoint, ResumeReproducesAnUninterruptedRun) {
  test::TempDir dir;
  Trainer full({}, small_config(11));
  std::vector<TrainStats> reference;
  for (int k = 0; k < 2; ++k) full.iteration();
  full.save_checkpoints(dir / "g.ckpt", dir / "c.ckpt");
  full.save_state(dir / "trainer.state");
  for (int k = 0; k < 2; ++k) reference.push_back(full.iteration());

  Trainer resumed({}, small_config(11));
  resumed.load_checkpoints(dir / "g.ckpt", dir / "c.ckpt");
  resumed.load_state(dir / "trainer.state");
  EXPECT_EQ(resumed.env_steps(), 640);
  EXPECT_EQ(resumed.iterations(), 2);
  for (const TrainStats& expected : reference) expect_same_stats(resumed.iteration(), expected);
  expect_same_params(resumed.net(0), full.net(0));
  expect_same_params(resumed.net(1), full.net(1));
}

TEST(Checkpoint, StateFromAnotherConfigIsRejected) {
  test::TempDir dir;
  Trainer a({}, small_config(1));
  a.save_state(dir / "trainer.state");
  PpoConfig other = small_config(1);
  other.learning_rate = 1e-3;
  Trainer b({}, other);
  EXPECT_THROW(b.load_state(dir / "trainer.state"), ConfigError);
}

}  // namespace
}  // namespace cholec::ppo
