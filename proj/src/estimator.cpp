#include "rse/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rse/decoder.hpp"

namespace rse::estimator {

EstimateResult estimate(const powerflow::PowerNetwork& net,
                        const powerflow::MeasurementPlan& plan,
                        const Eigen::VectorXd& y, const EstimatorConfig& cfg) {
  powerflow::validate(net);
  powerflow::validate(plan, net);
  if (y.size() != plan.size())
    throw std::invalid_argument("estimate: y length must match plan length");
  if (cfg.lambda < 0.0 || cfg.inner_tol <= 0.0 || cfg.outer_tol <= 0.0 ||
      cfg.max_outer_iter < 1)
    throw std::invalid_argument("estimate: invalid configuration");

  const int n = plan.size();
  const int m = 2 * net.bus_count - 1;

  EstimateResult result;
  powerflow::StateVector x = powerflow::flat_start(net);

  // The subproblem's split residual and dual variables carry over between
  // linearizations; the update itself restarts at zero.
  decoder::WarmStart warm;
  warm.x = Eigen::VectorXd::Zero(m);
  warm.z = Eigen::VectorXd::Zero(n);
  warm.dual = Eigen::VectorXd::Zero(n);

  double last_step = 1.0;
  Eigen::VectorXd z_last = Eigen::VectorXd::Zero(n);
  for (int k = 1; k <= cfg.max_outer_iter; ++k) {
    const Eigen::VectorXd dy = y - powerflow::evaluate_h(net, plan, x);
    const Eigen::MatrixXd h = powerflow::jacobian(net, plan, x);
    const double tol = std::max(cfg.inner_tol_floor,
                                cfg.inner_tol * std::min(1.0, last_step));
    auto sub = decoder::DecodeProblem::lagrangian(dy, h, cfg.lambda);
    warm.x.setZero();
    const auto sol = decoder::solve(sub, tol, cfg.inner_max_iter, &warm);
    warm.z = sol.z_hat;
    warm.dual = sol.dual;
    z_last = sol.z_hat;

    x.magnitudes += sol.x_hat.head(net.bus_count);
    int col = net.bus_count;
    for (int b = 0, a = 0; b < net.bus_count; ++b) {
      if (b == net.reference_bus) continue;
      x.angles[a++] += sol.x_hat[col++];
    }

    last_step = sol.x_hat.norm();
    result.per_iteration_step_norms.push_back(last_step);
    result.outer_iterations = k;
    if (last_step <= cfg.outer_tol) {
      result.converged = true;
      break;
    }
  }

  result.x_hat = x;
  const Eigen::VectorXd t = y - powerflow::evaluate_h(net, plan, x) - z_last;
  result.final_objective = t.lpNorm<1>() + cfg.lambda * z_last.norm();
  return result;
}

}  // namespace rse::estimator
