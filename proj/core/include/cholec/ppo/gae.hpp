#pragma once

#include <cstdint>
#include <vector>

namespace cholec::ppo {

// Generalized advantage estimation over one environment lane, oldest step first.
//
//   delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
//   A_t     = delta_t + gamma * lambda * (1 - done_t) * (1 - trunc_t) * A_{t+1}
//
// V(s_{t+1}) is values[t+1] inside the segment. After a truncated step, and after the last step
// of the segment, it is read from bootstrap_values[t] instead (entries elsewhere are ignored).
// A truncated step bootstraps but stops credit, like a segment end.
std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values,
                                const std::vector<std::uint8_t>& dones,
                                const std::vector<std::uint8_t>& truncations,
                                const std::vector<double>& bootstrap_values, double gamma,
                                double lambda);

// TD(lambda) regression targets: A_t + V(s_t).
std::vector<double> value_targets(const std::vector<double>& advantages,
                                  const std::vector<double>& values);

struct Moments {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

Moments moments(const std::vector<double>& x);

// In-place (x - mean) / (std + 1e-8). Returns the moments before normalization.
Moments normalize(std::vector<double>& x);

}  // namespace cholec::ppo
