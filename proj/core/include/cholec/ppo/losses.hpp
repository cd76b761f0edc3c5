#pragma once

#include <vector>

#include "cholec/nn/graph.hpp"

namespace cholec::ppo {

struct LossCoefficients {
  double clip_ratio = 0.1;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

struct PpoLoss {
  nn::NodeId total = -1;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped surrogate, value MSE and entropy bonus for one agent:
//   rho   = exp(logp_new - logp_old)
//   L_pi  = -mean(min(rho * A, clamp(rho, 1 - eps, 1 + eps) * A))
//   L_v   = mean((V - target)^2)
//   total = L_pi + value_coef * L_v - entropy_coef * mean(H)
// clip_fraction is the share of samples with |rho - 1| > eps.
template <typename T>
PpoLoss ppo_loss(nn::Graph<T>& g, nn::NodeId logits, nn::NodeId value,
                 const std::vector<int>& actions, const nn::Matrix<T>& old_log_probs,
                 const nn::Matrix<T>& advantages, const nn::Matrix<T>& targets,
                 const LossCoefficients& c);

extern template PpoLoss ppo_loss<float>(nn::Graph<float>&, nn::NodeId, nn::NodeId,
                                        const std::vector<int>&, const nn::Matrix<float>&,
                                        const nn::Matrix<float>&, const nn::Matrix<float>&,
                                        const LossCoefficients&);
extern template PpoLoss ppo_loss<double>(nn::Graph<double>&, nn::NodeId, nn::NodeId,
                                         const std::vector<int>&, const nn::Matrix<double>&,
                                         const nn::Matrix<double>&, const nn::Matrix<double>&,
                                         const LossCoefficients&);

}  // namespace cholec::ppo
