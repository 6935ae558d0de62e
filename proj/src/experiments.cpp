#include "rse/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rse/decoder.hpp"
#include "rse/text.hpp"

namespace rse::experiments {

namespace {

std::vector<double> range_grid(double lo, double hi, double step) {
  std::vector<double> out;
  for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(v);
  return out;
}

struct RunOutcome {
  double best_error = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  bool any_converged = false;
};

// Mean of per-run best lambda and per-run best error over runs that
// produced at least one converged solve.
SweepSummary summarize_lambda_star(const std::string& experiment,
                                   std::uint64_t seed,
                                   const std::string& sweep_var,
                                   double sweep_value,
                                   const std::vector<RunOutcome>& outcomes) {
  SweepSummary s;
  s.experiment = experiment;
  s.seed = seed;
  s.sweep_var = sweep_var;
  s.sweep_value = sweep_value;
  double lam = 0.0, err = 0.0;
  int count = 0;
  for (const auto& o : outcomes) {
    if (!o.any_converged) continue;
    lam += o.best_lambda;
    err += o.best_error;
    ++count;
  }
  s.lambda_star = count ? lam / count : std::numeric_limits<double>::quiet_NaN();
  s.mean_error = count ? err / count : std::numeric_limits<double>::quiet_NaN();
  return s;
}

// Grid lambda with the smallest mean converged error.
SweepSummary summarize_best_grid_lambda(
    const std::string& experiment, std::uint64_t seed,
    const std::string& sweep_var, double sweep_value,
    const std::vector<double>& lambda_grid,
    const std::vector<std::vector<TrialRecord>>& rows_per_lambda) {
  SweepSummary s;
  s.experiment = experiment;
  s.seed = seed;
  s.sweep_var = sweep_var;
  s.sweep_value = sweep_value;
  s.lambda_star = std::numeric_limits<double>::quiet_NaN();
  s.mean_error = std::numeric_limits<double>::infinity();
  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    double acc = 0.0;
    int count = 0;
    for (const auto& r : rows_per_lambda[li]) {
      if (!r.converged) continue;
      acc += r.error;
      ++count;
    }
    if (!count) continue;
    const double mean = acc / count;
    if (mean < s.mean_error) {
      s.mean_error = mean;
      s.lambda_star = lambda_grid[li];
    }
  }
  if (std::isnan(s.lambda_star))
    s.mean_error = std::numeric_limits<double>::quiet_NaN();
  return s;
}

struct Exp1Instance {
  Eigen::MatrixXd h;
  Eigen::VectorXd x_true;
  Eigen::VectorXd y;
};

// Per-trial draw order: H entries (row major), raw signal, corrupted
// support, gaussian error values (gaussian model only), then noise.
Exp1Instance make_exp1_instance(const Exp1Config& cfg, std::uint64_t seed,
                                std::uint64_t ordinal, int bad, double sigma) {
  rng::Generator g({seed, ordinal});
  Exp1Instance inst;
  inst.h.resize(cfg.n, cfg.m);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.m; ++j) inst.h(i, j) = g.next_normal();
  Eigen::VectorXd raw(cfg.m);
  for (int j = 0; j < cfg.m; ++j) raw[j] = g.next_normal();
  inst.x_true = raw / raw.norm();
  const Eigen::VectorXd clean = inst.h * inst.x_true;
  const std::vector<int> support = rng::sample_without_replacement(g, cfg.n, bad);

  decoder::SparseErrorSpec errors;
  errors.support = support;
  errors.values.resize(support.size());
  if (cfg.error_model == ErrorModel::sign_flip) {
    for (std::size_t i = 0; i < support.size(); ++i)
      errors.values[i] = -2.0 * clean[support[i]];
  } else {
    for (std::size_t i = 0; i < support.size(); ++i)
      errors.values[i] = cfg.error_std * g.next_normal();
  }
  inst.y = clean;
  errors.apply_to(inst.y);
  for (int i = 0; i < cfg.n; ++i) inst.y[i] += sigma * g.next_normal();
  return inst;
}

void check_lambda_grid(const std::vector<double>& grid) {
  if (grid.empty())
    throw std::invalid_argument("experiments: lambda grid must be nonempty");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("experiments: lambda grid must be ascending");
}

}  // namespace

Exp1Config Exp1Config::lambda_sweep_defaults() {
  Exp1Config cfg;
  cfg.sigma_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  cfg.lambda_grid = range_grid(0.0, 13.0, 0.5);
  return cfg;
}

Exp1Config Exp1Config::rho_sweep_defaults() {
  Exp1Config cfg;
  cfg.error_model = ErrorModel::gaussian;
  cfg.error_std = 5.0;
  cfg.sigma = 0.5;
  cfg.rho_grid = {0.0, 0.04, 0.08, 0.12, 0.16, 0.2};
  cfg.lambda_grid = {0.05, 8.0, 15.0};
  return cfg;
}

std::vector<double> Exp2Config::default_lambda_grid() {
  return range_grid(0.5, 12.0, 0.5);
}

ExperimentResult run_exp1_lambda_sweep(const Exp1Config& cfg,
                                       std::uint64_t seed) {
  if (cfg.sigma_grid.empty())
    throw std::invalid_argument("exp1 lambda sweep: sigma_grid is empty");
  check_lambda_grid(cfg.lambda_grid);
  ExperimentResult result;
  const double rho = static_cast<double>(cfg.bad_count) / cfg.n;
  for (std::size_t si = 0; si < cfg.sigma_grid.size(); ++si) {
    const double sigma = cfg.sigma_grid[si];
    std::vector<RunOutcome> outcomes(cfg.runs);
    for (int run = 0; run < cfg.runs; ++run) {
      const std::uint64_t ordinal = si * cfg.runs + run;
      const auto inst =
          make_exp1_instance(cfg, seed, ordinal, cfg.bad_count, sigma);
      decoder::WarmStart warm;
      warm.x = Eigen::VectorXd::Zero(cfg.m);
      warm.z = Eigen::VectorXd::Zero(cfg.n);
      warm.dual = Eigen::VectorXd::Zero(cfg.n);
      for (double lambda : cfg.lambda_grid) {
        const auto problem =
            decoder::DecodeProblem::lagrangian(inst.y, inst.h, lambda);
        const auto sol =
            decoder::solve(problem, cfg.solver_tol, cfg.solver_max_iter, &warm);
        warm.x = sol.x_hat;
        warm.z = sol.z_hat;
        warm.dual = sol.dual;
        TrialRecord r;
        r.experiment = "exp1-lambda";
        r.seed = seed;
        r.trial = run;
        r.n = cfg.n;
        r.m = cfg.m;
        r.sigma = sigma;
        r.rho = rho;
        r.lambda = lambda;
        r.error = (sol.x_hat - inst.x_true).norm();
        r.converged = sol.converged;
        r.iterations = sol.iterations;
        result.records.push_back(r);
        if (sol.converged && r.error < outcomes[run].best_error) {
          outcomes[run].best_error = r.error;
          outcomes[run].best_lambda = lambda;
          outcomes[run].any_converged = true;
        }
      }
    }
    result.summary.push_back(summarize_lambda_star(
        "exp1-lambda", seed, "sigma", sigma, outcomes));
  }
  return result;
}

ExperimentResult run_exp1_rho_sweep(const Exp1Config& cfg,
                                    std::uint64_t seed) {
  if (cfg.rho_grid.empty())
    throw std::invalid_argument("exp1 rho sweep: rho_grid is empty");
  check_lambda_grid(cfg.lambda_grid);
  ExperimentResult result;
  for (std::size_t ri = 0; ri < cfg.rho_grid.size(); ++ri) {
    const double rho = cfg.rho_grid[ri];
    const int bad = static_cast<int>(std::lround(rho * cfg.n));
    std::vector<std::vector<TrialRecord>> rows_per_lambda(
        cfg.lambda_grid.size());
    for (int run = 0; run < cfg.runs; ++run) {
      const std::uint64_t ordinal = ri * cfg.runs + run;
      const auto inst = make_exp1_instance(cfg, seed, ordinal, bad, cfg.sigma);
      decoder::WarmStart warm;
      warm.x = Eigen::VectorXd::Zero(cfg.m);
      warm.z = Eigen::VectorXd::Zero(cfg.n);
      warm.dual = Eigen::VectorXd::Zero(cfg.n);
      for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
        const double lambda = cfg.lambda_grid[li];
        const auto problem =
            decoder::DecodeProblem::lagrangian(inst.y, inst.h, lambda);
        const auto sol =
            decoder::solve(problem, cfg.solver_tol, cfg.solver_max_iter, &warm);
        warm.x = sol.x_hat;
        warm.z = sol.z_hat;
        warm.dual = sol.dual;
        TrialRecord r;
        r.experiment = "exp1-rho";
        r.seed = seed;
        r.trial = run;
        r.n = cfg.n;
        r.m = cfg.m;
        r.sigma = cfg.sigma;
        r.rho = rho;
        r.lambda = lambda;
        r.error = (sol.x_hat - inst.x_true).norm();
        r.converged = sol.converged;
        r.iterations = sol.iterations;
        rows_per_lambda[li].push_back(r);
        result.records.push_back(r);
      }
    }
    result.summary.push_back(summarize_best_grid_lambda(
        "exp1-rho", seed, "rho", rho, cfg.lambda_grid, rows_per_lambda));
  }
  return result;
}

ExperimentResult run_exp2(const Exp2Config& cfg, std::uint64_t seed) {
  powerflow::validate(cfg.net);
  powerflow::validate(cfg.plan, cfg.net);
  const bool sigma_sweep = !cfg.sigma_grid.empty();
  const bool rho_sweep = !cfg.rho_grid.empty();
  if (sigma_sweep == rho_sweep)
    throw std::invalid_argument(
        "exp2: exactly one of sigma_grid or rho_grid must be set");
  check_lambda_grid(cfg.lambda_grid);
  const int n = cfg.plan.size();
  const int kp = cfg.net.bus_count;
  const int m = 2 * kp - 1;

  // Resolve fixed sign flips to plan rows up front.
  std::vector<int> flip_rows;
  if (sigma_sweep) {
    for (const auto& f : cfg.fixed_flips) {
      auto it = std::find(cfg.plan.entries.begin(), cfg.plan.entries.end(), f);
      if (it == cfg.plan.entries.end())
        throw std::invalid_argument("exp2: flip target not in the plan: " +
                                    powerflow::describe(f));
      flip_rows.push_back(
          static_cast<int>(it - cfg.plan.entries.begin()));
    }
  }

  const std::vector<double>& grid =
      sigma_sweep ? cfg.sigma_grid : cfg.rho_grid;
  const std::string name = sigma_sweep ? "exp2-sigma" : "exp2-rho";
  const std::string var = sigma_sweep ? "sigma" : "rho";

  ExperimentResult result;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const double point = grid[gi];
    const double sigma = sigma_sweep ? point : cfg.sigma;
    const double rho =
        sigma_sweep ? static_cast<double>(flip_rows.size()) / n : point;
    const int bad = sigma_sweep
                        ? 0
                        : static_cast<int>(std::lround(point * n));
    std::vector<RunOutcome> outcomes(cfg.runs);
    std::vector<std::vector<TrialRecord>> rows_per_lambda(
        cfg.lambda_grid.size());
    for (int run = 0; run < cfg.runs; ++run) {
      const std::uint64_t ordinal = gi * cfg.runs + run;
      // Per-trial draw order: magnitudes, angles, corrupted support and
      // error values (rho sweep only), then noise.
      rng::Generator g({seed, ordinal});
      powerflow::StateVector x_true = powerflow::flat_start(cfg.net);
      for (int b = 0; b < kp; ++b)
        x_true.magnitudes[b] =
            g.next_uniform(1.0 - cfg.mag_perturb, 1.0 + cfg.mag_perturb);
      for (int a = 0; a < kp - 1; ++a)
        x_true.angles[a] = g.next_uniform(-cfg.ang_perturb, cfg.ang_perturb);
      const Eigen::VectorXd clean =
          powerflow::evaluate_h(cfg.net, cfg.plan, x_true);
      Eigen::VectorXd y = clean;
      if (sigma_sweep) {
        for (int row : flip_rows) y[row] = -y[row];
      } else {
        rng::Generator& gg = g;
        const auto support = rng::sample_without_replacement(gg, n, bad);
        decoder::SparseErrorSpec errors;
        errors.support = support;
        errors.values.resize(support.size());
        for (std::size_t i = 0; i < support.size(); ++i)
          errors.values[i] = cfg.error_std * g.next_normal();
        errors.apply_to(y);
      }
      for (int i = 0; i < n; ++i) y[i] += sigma * g.next_normal();

      const Eigen::VectorXd x_true_vec = powerflow::state_to_vector(x_true);
      for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
        const double lambda = cfg.lambda_grid[li];
        estimator::EstimatorConfig ecfg = cfg.estimator;
        ecfg.lambda = lambda;
        // Subproblems only need enough accuracy to certify the outer stop.
        ecfg.inner_tol_floor =
            std::max(ecfg.inner_tol_floor, 0.02 * ecfg.outer_tol);
        const auto est = estimator::estimate(cfg.net, cfg.plan, y, ecfg);
        TrialRecord r;
        r.experiment = name;
        r.seed = seed;
        r.trial = run;
        r.n = n;
        r.m = m;
        r.sigma = sigma;
        r.rho = rho;
        r.lambda = lambda;
        r.error =
            (powerflow::state_to_vector(est.x_hat) - x_true_vec).norm();
        r.converged = est.converged;
        r.iterations = est.outer_iterations;
        rows_per_lambda[li].push_back(r);
        result.records.push_back(r);
        if (est.converged && r.error < outcomes[run].best_error) {
          outcomes[run].best_error = r.error;
          outcomes[run].best_lambda = lambda;
          outcomes[run].any_converged = true;
        }
      }
    }
    if (sigma_sweep) {
      result.summary.push_back(
          summarize_lambda_star(name, seed, var, point, outcomes));
    } else {
      result.summary.push_back(summarize_best_grid_lambda(
          name, seed, var, point, cfg.lambda_grid, rows_per_lambda));
    }
  }
  return result;
}

std::string to_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  out << "experiment,seed,trial,n,m,sigma,rho,lambda,error,converged,"
         "iterations\n";
  for (const auto& r : records) {
    out << r.experiment << ',' << r.seed << ',' << r.trial << ',' << r.n
        << ',' << r.m << ',' << text::format_double(r.sigma) << ','
        << text::format_double(r.rho) << ','
        << text::format_double(r.lambda) << ','
        << text::format_double(r.error) << ',' << (r.converged ? 1 : 0)
        << ',' << r.iterations << '\n';
  }
  return out.str();
}

std::string to_csv(const std::vector<SweepSummary>& summary) {
  std::ostringstream out;
  out << "experiment,seed,sweep_var,sweep_value,lambda_star,mean_error\n";
  for (const auto& s : summary) {
    out << s.experiment << ',' << s.seed << ',' << s.sweep_var << ','
        << text::format_double(s.sweep_value) << ','
        << text::format_double(s.lambda_star) << ','
        << text::format_double(s.mean_error) << '\n';
  }
  return out.str();
}

}  // namespace rse::experiments
