#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rse/powerflow.hpp"

// Iterative linearized estimation for the nonlinear measurement model:
// at each outer step the model is linearized at the current state and the
// mixed l1/l2 decoding problem
//
//   min |dy - H dx - z|_1 + lambda |z|_2
//
// is solved for the state update dx. Iteration stops when |dx|_2 falls
// below outer_tol.

namespace rse::estimator {

struct EstimatorConfig {
  double lambda = 1.0;
  double inner_tol = 1e-6;   // base tolerance for the decoding subproblem
  double outer_tol = 1e-8;   // threshold on |dx|_2
  int max_outer_iter = 50;
  int inner_max_iter = 100000;
  double inner_tol_floor = 1e-11;  // subproblem tolerance never tightens past this
};

struct EstimateResult {
  powerflow::StateVector x_hat;
  int outer_iterations = 0;
  bool converged = false;
  std::vector<double> per_iteration_step_norms;
  double final_objective = 0.0;  // mixed objective at the final state
};

/// Runs the linearize-and-decode iteration from a flat start. Returns the
/// best iterate with converged=false when max_outer_iter is exhausted;
/// propagates decoder::RankDeficientError when a linearization loses
/// column rank.
EstimateResult estimate(const powerflow::PowerNetwork& net,
                        const powerflow::MeasurementPlan& plan,
                        const Eigen::VectorXd& y, const EstimatorConfig& cfg);

}  // namespace rse::estimator
