#include "cholec/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cholec/common/errors.hpp"

namespace cholec::nn {

GradCheckResult grad_check(const std::vector<Parameter<double>*>& params, const LossBuilder& build,
                           double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be > 0");
  for (auto* p : params) p->zero_grad();
  {
    Graph<double> g;
    g.backward(build(g));
  }
  const auto evaluate = [&build] {
    Graph<double> g(false);
    return g.value(build(g))(0, 0);
  };

  GradCheckResult r;
  for (auto* p : params) {
    double diff_sq = 0.0;
    double analytic_sq = 0.0;
    double numeric_sq = 0.0;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate();
      x = saved - eps;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.data()[i];
      const double abs_err = std::abs(analytic - numeric);
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      r.max_entry_relative_error =
          std::max(r.max_entry_relative_error,
                   abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
      diff_sq += abs_err * abs_err;
      analytic_sq += analytic * analytic;
      numeric_sq += numeric * numeric;
      ++r.checked;
    }
    const double rel = std::sqrt(diff_sq) /
                       std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), 1e-8});
    if (rel > r.max_relative_error || r.worst_parameter.empty()) {
      r.max_relative_error = rel;
      r.worst_parameter = p->name;
    }
  }
  return r;
}

GradCheckResult grad_check(
    PolicyValueNet<double>& net,
    const std::function<NodeId(Graph<double>&, PolicyValueNet<double>&)>& build, double eps) {
  std::vector<Parameter<double>*> params;
  for (auto& p : net.parameters()) params.push_back(&p);
  return grad_check(params, [&](Graph<double>& g) { return build(g, net); }, eps);
}

}  // namespace cholec::nn
