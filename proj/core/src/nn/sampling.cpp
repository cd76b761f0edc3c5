#include "cholec/nn/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "cholec/common/errors.hpp"

namespace cholec::nn {

std::vector<double> log_softmax(const double* logits, int n) {
  if (n < 1) throw ContractError("log_softmax of an empty row");
  double m = logits[0];
  for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(logits[i] - m);
  const double lse = m + std::log(z);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = logits[i] - lse;
  return out;
}

namespace {

double entropy_of(const std::vector<double>& logp) {
  double h = 0.0;
  for (double lp : logp) {
    const double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return std::max(0.0, h);
}

void require_finite(const std::vector<double>& logits) {
  for (double v : logits) {
    if (!std::isfinite(v)) throw ContractError("sample_action: non-finite logit");
  }
}

}  // namespace

ActionSample sample_action(const std::vector<double>& logits, std::mt19937_64& rng) {
  require_finite(logits);
  const auto logp = log_softmax(logits.data(), static_cast<int>(logits.size()));
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const int n = static_cast<int>(logp.size());
  int chosen = n - 1;
  double cdf = 0.0;
  for (int i = 0; i < n; ++i) {
    cdf += std::exp(logp[i]);
    if (u < cdf) {
      chosen = i;
      break;
    }
  }
  // never return an action with zero probability because of rounding in the tail
  while (chosen > 0 && std::exp(logp[chosen]) == 0.0) --chosen;
  return {chosen, logp[chosen], entropy_of(logp)};
}

ActionSample greedy_action(const std::vector<double>& logits) {
  require_finite(logits);
  const auto logp = log_softmax(logits.data(), static_cast<int>(logits.size()));
  const int best = static_cast<int>(std::max_element(logp.begin(), logp.end()) - logp.begin());
  return {best, logp[best], entropy_of(logp)};
}

}  // namespace cholec::nn
