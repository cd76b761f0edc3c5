#include "cholec/ppo/losses.hpp"

#include <cmath>

#include "cholec/common/errors.hpp"

namespace cholec::ppo {

template <typename T>
PpoLoss ppo_loss(nn::Graph<T>& g, nn::NodeId logits, nn::NodeId value,
                 const std::vector<int>& actions, const nn::Matrix<T>& old_log_probs,
                 const nn::Matrix<T>& advantages, const nn::Matrix<T>& targets,
                 const LossCoefficients& c) {
  const Eigen::Index n = g.value(logits).rows();
  if (static_cast<Eigen::Index>(actions.size()) != n || old_log_probs.rows() != n ||
      advantages.rows() != n || targets.rows() != n || g.value(value).rows() != n) {
    throw ContractError("ppo_loss: batch arrays must all have one row per sample");
  }
  const T eps = static_cast<T>(c.clip_ratio);
  const nn::NodeId logp_all = g.log_softmax(logits);
  const nn::NodeId logp = g.gather_cols(logp_all, actions);
  const nn::NodeId ratio = g.exp(g.sub(logp, g.input(old_log_probs)));
  const nn::NodeId adv = g.input(advantages);
  const nn::NodeId surr1 = g.mul(ratio, adv);
  const nn::NodeId surr2 = g.mul(g.clamp(ratio, T(1) - eps, T(1) + eps), adv);
  const nn::NodeId policy_loss = g.scale(g.mean(g.minimum(surr1, surr2)), T(-1));
  const nn::NodeId value_loss = g.mean(g.square(g.sub(value, g.input(targets))));
  const nn::NodeId entropy =
      g.scale(g.mean(g.row_sum(g.mul(g.exp(logp_all), logp_all))), T(-1));
  const nn::NodeId total = g.sub(
      g.add(policy_loss, g.scale(value_loss, static_cast<T>(c.value_coef))),
      g.scale(entropy, static_cast<T>(c.entropy_coef)));

  PpoLoss out;
  out.total = total;
  out.policy_loss = static_cast<double>(g.value(policy_loss)(0, 0));
  out.value_loss = static_cast<double>(g.value(value_loss)(0, 0));
  out.entropy = static_cast<double>(g.value(entropy)(0, 0));
  const auto& r = g.value(ratio);
  Eigen::Index clipped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(static_cast<double>(r(i, 0)) - 1.0) > c.clip_ratio) ++clipped;
  }
  out.clip_fraction = n > 0 ? static_cast<double>(clipped) / static_cast<double>(n) : 0.0;
  return out;
}

template PpoLoss ppo_loss<float>(nn::Graph<float>&, nn::NodeId, nn::NodeId,
                                 const std::vector<int>&, const nn::Matrix<float>&,
                                 const nn::Matrix<float>&, const nn::Matrix<float>&,
                                 const LossCoefficients&);
template PpoLoss ppo_loss<double>(nn::Graph<double>&, nn::NodeId, nn::NodeId,
                                  const std::vector<int>&, const nn::Matrix<double>&,
                                  const nn::Matrix<double>&, const nn::Matrix<double>&,
                                  const LossCoefficients&);

}  // namespace cholec::ppo
