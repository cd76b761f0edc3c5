#pragma once

#include <random>
#include <vector>

namespace cholec::nn {

struct ActionSample {
  int action = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
};

// Log-softmax of a logit row, computed in double.
std::vector<double> log_softmax(const double* logits, int n);

// Categorical draw from softmax(logits). Consumes exactly one value from `rng`.
ActionSample sample_action(const std::vector<double>& logits, std::mt19937_64& rng);
// Most probable action (lowest id on ties), with its log-probability and the entropy.
ActionSample greedy_action(const std::vector<double>& logits);

}  // namespace cholec::nn
