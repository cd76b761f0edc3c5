#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cholec/nn/graph.hpp"
#include "cholec/nn/policy.hpp"

namespace cholec::nn {

struct GradCheckResult {
  // max over parameter tensors of |a - n| / max(|a|, |n|, 1e-8), with |.| the L2 norm over the
  // tensor's entries
  double max_relative_error = 0.0;
  std::string worst_parameter;
  // the same ratio taken entry by entry; sensitive to entries whose gradient is near zero
  double max_entry_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::int64_t checked = 0;
};

// Records a scalar loss on the graph and returns its node.
using LossBuilder = std::function<NodeId(Graph<double>&)>;

// Compares reverse-mode gradients against central differences for every entry of `params`.
GradCheckResult grad_check(const std::vector<Parameter<double>*>& params, const LossBuilder& build,
                           double eps = 1e-5);

GradCheckResult grad_check(PolicyValueNet<double>& net,
                           const std::function<NodeId(Graph<double>&, PolicyValueNet<double>&)>& build,
                           double eps = 1e-5);

}  // namespace cholec::nn
