#include "cholec/ppo/gae.hpp"

#include <cmath>

#include "cholec/common/errors.hpp"

namespace cholec::ppo {

std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values,
                                const std::vector<std::uint8_t>& dones,
                                const std::vector<std::uint8_t>& truncations,
                                const std::vector<double>& bootstrap_values, double gamma,
                                double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n || truncations.size() != n ||
      bootstrap_values.size() != n) {
    throw ContractError("compute_gae: rewards, values, dones, truncations and bootstrap values "
                        "must have equal length");
  }
  std::vector<double> adv(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const bool last = k + 1 == n;
    double next_value;
    bool carry;
    if (dones[k]) {
      next_value = 0.0;
      carry = false;
    } else if (truncations[k] || last) {
      next_value = bootstrap_values[k];
      carry = false;
    } else {
      next_value = values[k + 1];
      carry = true;
    }
    const double delta = rewards[k] + gamma * next_value - values[k];
    adv[k] = delta + (carry ? gamma * lambda * next_adv : 0.0);
    next_adv = adv[k];
  }
  return adv;
}

std::vector<double> value_targets(const std::vector<double>& advantages,
                                  const std::vector<double>& values) {
  if (advantages.size() != values.size()) {
    throw ContractError("value_targets: advantages and values must have equal length");
  }
  std::vector<double> t(values.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = advantages[i] + values[i];
  return t;
}

Moments moments(const std::vector<double>& x) {
  Moments m;
  if (x.empty()) return m;
  double s = 0.0;
  for (double v : x) s += v;
  m.mean = s / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(x.size()));
  return m;
}

Moments normalize(std::vector<double>& x) {
  const Moments m = moments(x);
  const double denom = m.std + 1e-8;
  for (double& v : x) v = (v - m.mean) / denom;
  return m;
}

}  // namespace cholec::ppo
