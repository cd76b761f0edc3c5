#include "cholec/ppo/verify.hpp"

#include <random>

#include "cholec/ppo/losses.hpp"

namespace cholec::ppo {

nn::ArchSpec small_image_arch() {
  nn::ArchSpec a;
  a.input = nn::InputKind::kImage;
  a.channels = 2;
  a.height = 8;
  a.width = 8;
  a.conv_channels = {3, 4};
  a.encoder_fc = {8};
  a.encoder_relu = false;
  a.lstm_hidden = 6;
  a.head_fc = {8};
  return a;
}

nn::GradCheckResult check_surrogate_gradients(const SurrogateCheckOptions& o) {
  nn::PolicyValueNet<double> net(o.arch, "check");
  net.initialize(o.seed);
  const int T = o.steps;
  const int B = o.batch;
  const int N = T * B;
  const int D = o.arch.observation_size();

  std::mt19937_64 rng(o.seed + 7);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  nn::Matrix<double> obs(N, D);
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = uniform(rng);
  std::vector<int> prev(N), actions(N);
  std::vector<std::uint8_t> reset(N, 0);
  for (int i = 0; i < N; ++i) {
    prev[i] = static_cast<int>(rng() % (nn::kNumActions + 1)) - 1;
    actions[i] = static_cast<int>(rng() % nn::kNumActions);
  }
  for (int i = 0; i < B; ++i) reset[i] = 1;
  const auto init = net.initial_state(B);

  // Behaviour log-probs offset from the current policy so that some ratios leave the clip band.
  nn::Graph<double> probe(false);
  const auto out = net.forward(probe, obs, prev, reset, init, T);
  const auto logp = probe.value(probe.gather_cols(probe.log_softmax(out.logits), actions));
  nn::Matrix<double> old(N, 1), adv(N, 1), targets(N, 1);
  for (int i = 0; i < N; ++i) {
    const double offset = i % 3 == 0 ? 0.3 : (i % 3 == 1 ? -0.25 : 0.03);
    old(i, 0) = logp(i, 0) - offset;
    adv(i, 0) = uniform(rng);
    targets(i, 0) = probe.value(out.value)(i, 0) + 0.2 * uniform(rng);
  }
  const LossCoefficients coeffs;
  return nn::grad_check(
      net,
      [&](nn::Graph<double>& g, nn::PolicyValueNet<double>& n) {
        const auto f = n.forward(g, obs, prev, reset, init, T);
        return ppo_loss(g, f.logits, f.value, actions, old, adv, targets, coeffs).total;
      },
      o.eps);
}

}  // namespace cholec::ppo
