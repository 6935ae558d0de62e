#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rse/bounds.hpp"
#include "rse/decoder.hpp"
#include "rse/errors.hpp"
#include "rse/estimator.hpp"
#include "rse/experiments.hpp"
#include "rse/powerflow.hpp"
#include "rse/text.hpp"

namespace {

using rse::text::format_double;

// "a:b:step" inclusive of both endpoints (within 1e-12), or a single value.
std::vector<double> parse_range(const std::string& spec) {
  const auto parts = rse::text::split(spec, ':');
  if (parts.size() == 1) {
    double v;
    if (!rse::text::parse_double(rse::text::trim(parts[0]), v))
      throw CLI::ValidationError("range", "bad value '" + spec + "'");
    return {v};
  }
  if (parts.size() != 3)
    throw CLI::ValidationError("range", "expected value or a:b:step");
  double lo, hi, step;
  if (!rse::text::parse_double(rse::text::trim(parts[0]), lo) ||
      !rse::text::parse_double(rse::text::trim(parts[1]), hi) ||
      !rse::text::parse_double(rse::text::trim(parts[2]), step) ||
      step <= 0.0)
    throw CLI::ValidationError("range", "bad range '" + spec + "'");
  std::vector<double> out;
  const double slack = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
  for (double v = lo; v <= hi + slack; v += step) out.push_back(v);
  return out;
}

rse::powerflow::StateVector read_state_file(
    const std::string& path, const rse::powerflow::PowerNetwork& net) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open state file: " + path);
  std::string line;
  int lineno = 0;
  bool have_header = false;
  const int k = net.bus_count;
  std::vector<bool> seen(k, false);
  Eigen::VectorXd mags(k);
  Eigen::VectorXd full(k);
  while (std::getline(in, line)) {
    ++lineno;
    auto sv = rse::text::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    if (!have_header) {
      if (sv != "bus,magnitude,angle")
        throw rse::ParseError(lineno, "expected header bus,magnitude,angle");
      have_header = true;
      continue;
    }
    const auto f = rse::text::split(sv, ',');
    int bus;
    double mag, ang;
    if (f.size() != 3 || !rse::text::parse_int(rse::text::trim(f[0]), bus) ||
        !rse::text::parse_double(rse::text::trim(f[1]), mag) ||
        !rse::text::parse_double(rse::text::trim(f[2]), ang))
      throw rse::ParseError(lineno, "expected 'bus,magnitude,angle'");
    if (bus < 0 || bus >= k)
      throw rse::ValidationError("state bus index out of range");
    if (seen[bus]) throw rse::ValidationError("duplicate state bus");
    seen[bus] = true;
    mags[bus] = mag;
    full[bus] = ang;
  }
  for (int b = 0; b < k; ++b)
    if (!seen[b]) throw rse::ValidationError("state file is missing a bus");
  if (std::abs(full[net.reference_bus]) > 1e-12)
    throw rse::ValidationError("reference bus angle must be zero");
  rse::powerflow::StateVector x;
  x.magnitudes = mags;
  x.angles.resize(k - 1);
  int a = 0;
  for (int b = 0; b < k; ++b) {
    if (b == net.reference_bus) continue;
    x.angles[a++] = full[b];
  }
  return x;
}

Eigen::VectorXd read_measurements_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open measurements file: " + path);
  std::vector<double> vals;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto sv = rse::text::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    double v;
    if (!rse::text::parse_double(sv, v))
      throw rse::ParseError(lineno, "bad measurement value");
    vals.push_back(v);
  }
  Eigen::VectorXd y(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) y[i] = vals[i];
  return y;
}

rse::powerflow::Measurement parse_flip(const std::string& spec) {
  const auto toks = rse::text::tokens(spec);
  rse::powerflow::Measurement m;
  if (toks.size() == 2 && (toks[0] == "PI" || toks[0] == "QI")) {
    m.kind = toks[0] == "PI" ? rse::powerflow::MeasurementKind::p_injection
                             : rse::powerflow::MeasurementKind::q_injection;
    if (rse::text::parse_int(toks[1], m.i)) return m;
  } else if (toks.size() == 3 && (toks[0] == "PF" || toks[0] == "QF")) {
    m.kind = toks[0] == "PF" ? rse::powerflow::MeasurementKind::p_flow
                             : rse::powerflow::MeasurementKind::q_flow;
    if (rse::text::parse_int(toks[1], m.i) &&
        rse::text::parse_int(toks[2], m.j))
      return m;
  }
  throw CLI::ValidationError("flip", "expected 'PI i', 'QI i', 'PF i j' or 'QF i j'");
}

void write_summary_if_requested(const std::string& path,
                                const rse::experiments::ExperimentResult& r) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open summary file: " + path);
  out << rse::experiments::to_csv(r.summary);
}

int fail_computation(const std::string& type, const std::string& reason) {
  std::cerr << "error=" << type << " reason=\"" << reason << "\"\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust state estimation toolkit"};
  app.require_subcommand(1);

  // bounds
  double delta = 0.5, rho = 0.01;
  auto* cmd_bounds = app.add_subcommand("bounds", "recovery bound report");
  cmd_bounds->add_option("--delta", delta, "dimension ratio m/n")->required();
  cmd_bounds->add_option("--rho", rho, "corrupted fraction k/n")->required();

  // alpha-curve
  std::string deltas_spec;
  auto* cmd_alpha = app.add_subcommand("alpha-curve",
                                       "alpha* over a delta grid");
  cmd_alpha->add_option("--deltas", deltas_spec, "delta grid a:b:step")
      ->required();

  // varpi-curve
  double vc_delta = 0.5;
  std::string rhos_spec;
  auto* cmd_varpi = app.add_subcommand("varpi-curve",
                                       "amplification over a rho grid");
  cmd_varpi->add_option("--delta", vc_delta, "dimension ratio m/n")
      ->required();
  cmd_varpi->add_option("--rhos", rhos_spec, "rho grid a:b:step")->required();

  // decode
  std::string problem_path;
  double opt_epsilon = -1.0, opt_lambda = -1.0, decode_tol = 1e-7;
  int decode_max_iter = 100000;
  auto* cmd_decode = app.add_subcommand("decode", "solve a decoding problem");
  cmd_decode->add_option("--problem", problem_path, "problem CSV file")
      ->required();
  auto* eps_opt = cmd_decode->add_option("--epsilon", opt_epsilon,
                                         "override: constrained mode radius");
  auto* lam_opt = cmd_decode->add_option("--lambda", opt_lambda,
                                         "override: lagrangian mode weight");
  eps_opt->excludes(lam_opt);
  cmd_decode->add_option("--tol", decode_tol, "solver tolerance");
  cmd_decode->add_option("--max-iter", decode_max_iter, "iteration cap");

  // estimate
  std::string case_path, meas_path;
  rse::estimator::EstimatorConfig ecfg;
  auto* cmd_estimate = app.add_subcommand("estimate",
                                          "nonlinear state estimation");
  cmd_estimate->add_option("--case", case_path, "network case file")
      ->required();
  cmd_estimate->add_option("--measurements", meas_path,
                           "measurement vector file")
      ->required();
  cmd_estimate->add_option("--lambda", ecfg.lambda, "l2 penalty weight")
      ->required();
  cmd_estimate->add_option("--inner-tol", ecfg.inner_tol,
                           "decoder tolerance");
  cmd_estimate->add_option("--outer-tol", ecfg.outer_tol,
                           "step norm threshold");
  cmd_estimate->add_option("--max-outer", ecfg.max_outer_iter,
                           "outer iteration cap");

  // exp1
  std::string exp1_sweep = "lambda", exp1_sigmas, exp1_rhos, exp1_lambdas;
  std::string exp1_summary;
  std::uint64_t exp1_seed = 1;
  int exp1_runs = -1, exp1_n = -1, exp1_m = -1, exp1_bad = -1;
  double exp1_sigma = -1.0, exp1_error_std = -1.0, exp1_tol = -1.0;
  std::string exp1_error_model;
  auto* cmd_exp1 = app.add_subcommand("exp1",
                                      "gaussian measurement experiments");
  cmd_exp1->add_option("--sweep", exp1_sweep, "lambda or rho")
      ->check(CLI::IsMember({"lambda", "rho"}));
  cmd_exp1->add_option("--seed", exp1_seed, "experiment seed")->required();
  cmd_exp1->add_option("--runs", exp1_runs, "trials per grid point");
  cmd_exp1->add_option("--sigmas", exp1_sigmas, "noise grid a:b:step");
  cmd_exp1->add_option("--rhos", exp1_rhos, "corruption grid a:b:step");
  cmd_exp1->add_option("--lambdas", exp1_lambdas, "lambda grid a:b:step");
  cmd_exp1->add_option("--n", exp1_n, "measurement count");
  cmd_exp1->add_option("--m", exp1_m, "state dimension");
  cmd_exp1->add_option("--bad-count", exp1_bad, "sign flips (lambda sweep)");
  cmd_exp1->add_option("--sigma", exp1_sigma, "fixed noise (rho sweep)");
  cmd_exp1->add_option("--error-std", exp1_error_std,
                       "gaussian error model std");
  cmd_exp1->add_option("--error-model", exp1_error_model,
                       "sign_flip or gaussian")
      ->check(CLI::IsMember({"sign_flip", "gaussian"}));
  cmd_exp1->add_option("--tol", exp1_tol, "solver tolerance");
  cmd_exp1->add_option("--summary", exp1_summary, "summary CSV output path");

  // exp2
  std::string exp2_case, exp2_sigmas, exp2_rhos, exp2_lambdas, exp2_summary;
  std::vector<std::string> exp2_flips;
  std::uint64_t exp2_seed = 1;
  int exp2_runs = -1;
  double exp2_sigma = -1.0, exp2_error_std = -1.0;
  auto* cmd_exp2 = app.add_subcommand("exp2", "power network experiments");
  cmd_exp2->add_option("--case", exp2_case, "network case file")->required();
  cmd_exp2->add_option("--seed", exp2_seed, "experiment seed")->required();
  cmd_exp2->add_option("--sigmas", exp2_sigmas, "noise grid a:b:step");
  cmd_exp2->add_option("--rhos", exp2_rhos, "corruption grid a:b:step");
  cmd_exp2->add_option("--lambdas", exp2_lambdas, "lambda grid a:b:step");
  cmd_exp2->add_option("--flip", exp2_flips,
                       "measurement to sign-invert, e.g. 'PI 2' (repeatable)");
  cmd_exp2->add_option("--runs", exp2_runs, "trials per grid point");
  cmd_exp2->add_option("--sigma", exp2_sigma, "fixed noise (rho sweep)");
  cmd_exp2->add_option("--error-std", exp2_error_std, "error std (rho sweep)");
  cmd_exp2->add_option("--summary", exp2_summary, "summary CSV output path");

  // powerflow-eval
  std::string pf_case, pf_state;
  auto* cmd_pf = app.add_subcommand("powerflow-eval",
                                    "evaluate measurement functions");
  cmd_pf->add_option("--case", pf_case, "network case file")->required();
  cmd_pf->add_option("--state", pf_state, "state CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  }

  try {
    if (*cmd_bounds) {
      const auto r = rse::bounds::bound_report(delta, rho);
      std::cout << "delta,rho,alpha_star,c_constant,sigma_min_normalized,"
                   "varpi,feasible\n"
                << format_double(r.delta) << ',' << format_double(r.rho)
                << ',' << format_double(r.alpha_star) << ','
                << format_double(r.c_constant) << ','
                << format_double(r.sigma_min_normalized) << ','
                << format_double(r.varpi) << ',' << (r.feasible ? 1 : 0)
                << '\n';
      return 0;
    }
    if (*cmd_alpha) {
      std::cout << "delta,alpha_star\n";
      for (double d : parse_range(deltas_spec))
        std::cout << format_double(d) << ','
                  << format_double(rse::bounds::alpha_star(d)) << '\n';
      return 0;
    }
    if (*cmd_varpi) {
      std::cout << "rho,varpi,feasible\n";
      for (double r : parse_range(rhos_spec)) {
        const auto w = rse::bounds::varpi(vc_delta, r);
        std::cout << format_double(r) << ','
                  << format_double(w ? *w : std::nan("")) << ','
                  << (w ? 1 : 0) << '\n';
      }
      return 0;
    }
    if (*cmd_decode) {
      std::ifstream in(problem_path);
      if (!in)
        return fail_computation("FileError",
                                "cannot open " + problem_path);
      auto problem = rse::decoder::read_problem(in);
      if (eps_opt->count()) {
        problem.mode = rse::decoder::Mode::constrained;
        problem.epsilon = opt_epsilon;
      } else if (lam_opt->count()) {
        problem.mode = rse::decoder::Mode::lagrangian;
        problem.lambda = opt_lambda;
      }
      const auto sol = rse::decoder::solve(problem, decode_tol,
                                           decode_max_iter);
      rse::decoder::write_solution(std::cout, sol);
      std::cerr << "objective=" << format_double(sol.objective)
                << " iterations=" << sol.iterations
                << " converged=" << (sol.converged ? 1 : 0)
                << " certificate=" << format_double(sol.certificate_gap)
                << '\n';
      if (!sol.converged)
        return fail_computation("NotConverged",
                                "iteration cap reached before tolerance");
      return 0;
    }
    if (*cmd_estimate) {
      const auto [net, plan] = rse::powerflow::load_case_file(case_path);
      const auto y = read_measurements_file(meas_path);
      const auto r = rse::estimator::estimate(net, plan, y, ecfg);
      std::cout << "bus,magnitude\n";
      for (int b = 0; b < net.bus_count; ++b)
        std::cout << b << ',' << format_double(r.x_hat.magnitudes[b]) << '\n';
      const auto angles = rse::powerflow::full_angles(net, r.x_hat);
      std::cout << "bus,angle\n";
      for (int b = 0; b < net.bus_count; ++b)
        std::cout << b << ',' << format_double(angles[b]) << '\n';
      std::cerr << "outer_iterations=" << r.outer_iterations
                << " converged=" << (r.converged ? 1 : 0)
                << " objective=" << format_double(r.final_objective) << '\n';
      if (!r.converged)
        return fail_computation("NotConverged",
                                "outer iteration cap reached");
      return 0;
    }
    if (*cmd_exp1) {
      rse::experiments::Exp1Config cfg =
          exp1_sweep == "lambda"
              ? rse::experiments::Exp1Config::lambda_sweep_defaults()
              : rse::experiments::Exp1Config::rho_sweep_defaults();
      if (!exp1_sigmas.empty()) {
        if (exp1_sweep == "lambda")
          cfg.sigma_grid = parse_range(exp1_sigmas);
        else
          cfg.sigma = parse_range(exp1_sigmas).front();
      }
      if (!exp1_rhos.empty()) cfg.rho_grid = parse_range(exp1_rhos);
      if (!exp1_lambdas.empty()) cfg.lambda_grid = parse_range(exp1_lambdas);
      if (exp1_runs > 0) cfg.runs = exp1_runs;
      if (exp1_n > 0) cfg.n = exp1_n;
      if (exp1_m > 0) cfg.m = exp1_m;
      if (exp1_bad >= 0) cfg.bad_count = exp1_bad;
      if (exp1_sigma >= 0.0) cfg.sigma = exp1_sigma;
      if (exp1_error_std >= 0.0) cfg.error_std = exp1_error_std;
      if (exp1_tol > 0.0) cfg.solver_tol = exp1_tol;
      if (!exp1_error_model.empty())
        cfg.error_model = exp1_error_model == "sign_flip"
                              ? rse::experiments::ErrorModel::sign_flip
                              : rse::experiments::ErrorModel::gaussian;
      const auto result =
          exp1_sweep == "lambda"
              ? rse::experiments::run_exp1_lambda_sweep(cfg, exp1_seed)
              : rse::experiments::run_exp1_rho_sweep(cfg, exp1_seed);
      std::cout << rse::experiments::to_csv(result.records);
      write_summary_if_requested(exp1_summary, result);
      return 0;
    }
    if (*cmd_exp2) {
      rse::experiments::Exp2Config cfg;
      std::tie(cfg.net, cfg.plan) = rse::powerflow::load_case_file(exp2_case);
      cfg.lambda_grid = rse::experiments::Exp2Config::default_lambda_grid();
      if (!exp2_sigmas.empty()) cfg.sigma_grid = parse_range(exp2_sigmas);
      if (!exp2_rhos.empty()) cfg.rho_grid = parse_range(exp2_rhos);
      if (!exp2_lambdas.empty()) cfg.lambda_grid = parse_range(exp2_lambdas);
      for (const auto& f : exp2_flips)
        cfg.fixed_flips.push_back(parse_flip(f));
      if (exp2_runs > 0) cfg.runs = exp2_runs;
      if (exp2_sigma >= 0.0) cfg.sigma = exp2_sigma;
      if (exp2_error_std >= 0.0) cfg.error_std = exp2_error_std;
      cfg.estimator.inner_tol = 1e-4;
      cfg.estimator.outer_tol = 1e-6;
      cfg.estimator.max_outer_iter = 25;
      const auto result = rse::experiments::run_exp2(cfg, exp2_seed);
      std::cout << rse::experiments::to_csv(result.records);
      write_summary_if_requested(exp2_summary, result);
      return 0;
    }
    if (*cmd_pf) {
      const auto [net, plan] = rse::powerflow::load_case_file(pf_case);
      const auto x = read_state_file(pf_state, net);
      const auto h = rse::powerflow::evaluate_h(net, plan, x);
      std::cout << "index,kind,i,j,value\n";
      for (int r = 0; r < plan.size(); ++r) {
        const auto& m = plan.entries[r];
        const char* kind = m.kind == rse::powerflow::MeasurementKind::p_injection
                               ? "PI"
                           : m.kind == rse::powerflow::MeasurementKind::q_injection
                               ? "QI"
                           : m.kind == rse::powerflow::MeasurementKind::p_flow
                               ? "PF"
                               : "QF";
        std::cout << r << ',' << kind << ',' << m.i << ',' << m.j << ','
                  << format_double(h[r]) << '\n';
      }
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "error=Usage reason=\"" << e.what() << "\"\n";
    return 1;
  } catch (const rse::ParseError& e) {
    return fail_computation("ParseError", e.what());
  } catch (const rse::ValidationError& e) {
    return fail_computation("ValidationError", e.what());
  } catch (const rse::decoder::RankDeficientError& e) {
    return fail_computation("RankDeficient", e.what());
  } catch (const std::exception& e) {
    return fail_computation("Error", e.what());
  }
  return 1;
}
