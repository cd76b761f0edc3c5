#pragma once

#include <cstdint>

#include "cholec/nn/gradcheck.hpp"
#include "cholec/nn/policy.hpp"

namespace cholec::ppo {

struct SurrogateCheckOptions {
  nn::ArchSpec arch = nn::ArchSpec::features(25, 32, 16);  // 5,770 parameters
  std::uint64_t seed = 0;
  int steps = 6;
  int batch = 3;
  double eps = 1e-5;
};

// Gradient check of the full PPO loss (surrogate, value, entropy) through a double-precision
// policy-value net on a synthetic recurrent batch. The batch mixes ratios inside and outside
// the clip band, random previous actions and an episode start on the first row.
nn::GradCheckResult check_surrogate_gradients(const SurrogateCheckOptions& options);

// Tiny convolutional architecture (two kernel-4 stages on an 8x8 input) for checking conv.
nn::ArchSpec small_image_arch();

}  // namespace cholec::ppo
