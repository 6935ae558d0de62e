#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rse/estimator.hpp"
#include "rse/powerflow.hpp"
#include "rse/rng.hpp"

// Seeded, reproducible experiment harness. Every trial derives its own
// random stream from (seed, global trial ordinal), so results are
// byte-identical for a fixed seed and configuration regardless of
// execution order, and trials are statistically independent across sweep
// points. Records are emitted as CSV rows, one per (trial, lambda).

namespace rse::experiments {

enum class ErrorModel { sign_flip, gaussian };

struct Exp1Config {
  int n = 150;
  int m = 60;
  int bad_count = 12;         // corrupted measurement count for the lambda sweep
  ErrorModel error_model = ErrorModel::sign_flip;
  double error_std = 5.0;     // gaussian error model standard deviation
  std::vector<double> sigma_grid;  // lambda sweep: noise levels
  double sigma = 0.5;              // rho sweep: fixed noise level
  std::vector<double> rho_grid;    // rho sweep: corrupted fractions of n
  std::vector<double> lambda_grid;
  int runs = 50;
  double solver_tol = 1e-4;
  int solver_max_iter = 60000;

  static Exp1Config lambda_sweep_defaults();
  static Exp1Config rho_sweep_defaults();
};

struct Exp2Config {
  powerflow::PowerNetwork net;
  powerflow::MeasurementPlan plan;
  // Sigma sweep: these measurements get their signs inverted every trial.
  std::vector<powerflow::Measurement> fixed_flips;
  std::vector<double> sigma_grid;
  // Rho sweep: random measurement subsets get additive gaussian errors.
  std::vector<double> rho_grid;
  double sigma = 0.05;      // fixed noise level for the rho sweep
  double error_std = 0.7;
  std::vector<double> lambda_grid;  // default 0.5..12 step 0.5
  int runs = 50;
  double mag_perturb = 0.05;  // ground-truth magnitudes in 1 +- mag_perturb
  double ang_perturb = 0.2;   // ground-truth angles in +- ang_perturb rad
  estimator::EstimatorConfig estimator;  // lambda is set per grid point

  static std::vector<double> default_lambda_grid();
};

struct TrialRecord {
  std::string experiment;
  std::uint64_t seed = 0;
  int trial = 0;
  int n = 0;
  int m = 0;
  double sigma = 0.0;
  double rho = 0.0;
  double lambda = 0.0;
  double error = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct SweepSummary {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string sweep_var;
  double sweep_value = 0.0;
  double lambda_star = 0.0;
  double mean_error = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  std::vector<SweepSummary> summary;
};

/// Gaussian-measurement recovery, sweeping noise level: per sigma and run,
/// draws a fresh instance, solves over the lambda grid, and summarizes the
/// per-run error-minimizing lambda averaged over runs.
ExperimentResult run_exp1_lambda_sweep(const Exp1Config& cfg,
                                       std::uint64_t seed);

/// Gaussian-measurement recovery, sweeping the corrupted fraction at fixed
/// noise; the summary reports the grid lambda with the lowest mean error
/// per rho.
ExperimentResult run_exp1_rho_sweep(const Exp1Config& cfg, std::uint64_t seed);

/// Power-network estimation sweep. Exactly one of sigma_grid (fixed sign
/// flips, noise sweep) or rho_grid (random corruption sweep at fixed
/// noise) must be set.
ExperimentResult run_exp2(const Exp2Config& cfg, std::uint64_t seed);

std::string to_csv(const std::vector<TrialRecord>& records);
std::string to_csv(const std::vector<SweepSummary>& summary);

}  // namespace rse::experiments
