#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rse/bounds.hpp"
#include "rse/decoder.hpp"
#include "rse/errors.hpp"
#include "rse/rng.hpp"
#include "fixtures/decode_reference_cases.h"

using namespace rse::decoder;

namespace {

Eigen::MatrixXd random_matrix(rse::rng::Generator& g, int n, int m) {
  Eigen::MatrixXd h(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) h(i, j) = g.next_normal();
  return h;
}

DecodeProblem fixture_problem(const testref::DecodeReferenceCase& c) {
  Eigen::MatrixXd h(c.n, c.m);
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.m; ++j) h(i, j) = c.h_rowmajor[i * c.m + j];
  Eigen::VectorXd y(c.n);
  for (int i = 0; i < c.n; ++i) y[i] = c.y[i];
  return c.lagrangian ? DecodeProblem::lagrangian(y, h, c.param)
                      : DecodeProblem::constrained(y, h, c.param);
}

}  // namespace

TEST_CASE("single-column instance reduces to a weighted median") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Ones(3, 1);
  Eigen::VectorXd y(3);
  y << 5.0, 5.0, 15.0;
  const auto sol = solve(DecodeProblem::lagrangian(y, h, 10.0), 1e-9);
  REQUIRE(sol.converged);

  // independent 1-d oracle: at lambda = 10 > sqrt(3) the z block is
  // provably zero, so scan the remaining scalar objective
  double best_x = 0.0, best_v = 1e300;
  for (double x = 0.0; x <= 20.0; x += 1e-3) {
    const double v = (y.array() - x).abs().sum();
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  CHECK(best_x == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(sol.x_hat[0] == doctest::Approx(5.0).epsilon(1e-5));
  CHECK(sol.z_hat.norm() <= 1e-7);
  CHECK(sol.objective == doctest::Approx(10.0).epsilon(1e-7));
  // the gross-error estimate lives in the third residual entry
  const Eigen::VectorXd t = y - h * sol.x_hat - sol.z_hat;
  CHECK(t[2] == doctest::Approx(10.0).epsilon(1e-5));
}

TEST_CASE("exact data recovers exactly in both modes") {
  rse::rng::Generator g({77, 0});
  const auto h = random_matrix(g, 9, 3);
  Eigen::VectorXd x(3);
  x << 0.4, -1.2, 2.0;
  const Eigen::VectorXd y = h * x;

  for (double lambda : {0.5, 4.0}) {
    const auto sol = solve(DecodeProblem::lagrangian(y, h, lambda), 1e-9);
    REQUIRE(sol.converged);
    CHECK((sol.x_hat - x).norm() <= 1e-6);
    CHECK(sol.objective <= 1e-7);
    CHECK(sol.z_hat.norm() <= 1e-6);
  }
  // constrained with eps = 0 has the unique optimum x
  const auto sol0 = solve(DecodeProblem::constrained(y, h, 0.0), 1e-9);
  REQUIRE(sol0.converged);
  CHECK((sol0.x_hat - x).norm() <= 1e-6);
  CHECK(sol0.z_hat.norm() == 0.0);
  // wider ball: the objective still reaches zero
  const auto sol1 = solve(DecodeProblem::constrained(y, h, 0.5), 1e-9);
  REQUIRE(sol1.converged);
  CHECK(sol1.objective <= 1e-7);
  CHECK(sol1.z_hat.norm() <= 0.5 * (1.0 + 1e-9));
}

TEST_CASE("objectives match the interior-point reference") {
  for (const auto& c : testref::decode_reference_cases()) {
    CAPTURE(c.name);
    const auto problem = fixture_problem(c);
    const auto sol = solve(problem, 1e-8, 400000);
    CHECK(sol.converged);
    CHECK(std::abs(sol.objective - c.objective) <=
          1e-5 * (1.0 + std::abs(c.objective)));
    if (c.l1_objective >= 0.0) {
      // eps = 0 is plain l1 decoding; the LP reference value agrees
      CHECK(std::abs(sol.objective - c.l1_objective) <=
            1e-5 * (1.0 + std::abs(c.l1_objective)));
    }
    if (problem.mode == Mode::constrained)
      CHECK(sol.z_hat.norm() <= problem.epsilon * (1.0 + 1e-9));
  }
}

TEST_CASE("lagrangian limits: large lambda is l1, small lambda is least squares") {
  rse::rng::Generator g({78, 0});
  const int n = 25, m = 6;
  const auto h = random_matrix(g, n, m);
  Eigen::VectorXd y = random_matrix(g, n, 1).col(0) * 2.0;

  // beyond sqrt(n), z vanishes and the solution no longer depends on lambda
  const auto a = solve(DecodeProblem::lagrangian(y, h, 6.0), 1e-8);
  const auto b = solve(DecodeProblem::lagrangian(y, h, 60.0), 1e-8);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(a.z_hat.norm() <= 1e-9);
  CHECK(b.z_hat.norm() <= 1e-9);
  CHECK(std::abs(a.objective - b.objective) <= 1e-6 * (1.0 + a.objective));

  // tiny lambda: x approaches the least-squares solution
  const auto c = solve(DecodeProblem::lagrangian(y, h, 1e-3), 1e-9, 400000);
  REQUIRE(c.converged);
  const Eigen::VectorXd xls = h.colPivHouseholderQr().solve(y);
  CHECK((c.x_hat - xls).norm() <= 1e-4 * (1.0 + xls.norm()));
}

TEST_CASE("z norm is nonincreasing along the lambda path") {
  rse::rng::Generator g({79, 0});
  const int n = 40, m = 12;
  const auto h = random_matrix(g, n, m);
  Eigen::VectorXd x(m);
  for (int j = 0; j < m; ++j) x[j] = g.next_normal();
  Eigen::VectorXd y = h * x;
  for (int i = 0; i < 4; ++i) y[i] = -y[i];
  for (int i = 0; i < n; ++i) y[i] += 0.3 * g.next_normal();

  double prev = 1e300;
  for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto sol = solve(DecodeProblem::lagrangian(y, h, lambda), 1e-8);
    REQUIRE(sol.converged);
    CHECK(sol.z_hat.norm() <= prev + 1e-6 * (1.0 + prev));
    prev = sol.z_hat.norm();
  }
}

TEST_CASE("solver objective never exceeds the ground-truth feasible point") {
  rse::rng::Generator g({80, 0});
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 30, m = 8, k = 3;
    const auto h = random_matrix(g, n, m);
    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x[j] = g.next_normal();
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = 0.2 * g.next_normal();
    Eigen::VectorXd y = h * x + v;
    double e_l1 = 0.0;
    for (int i = 0; i < k; ++i) {
      y[i] += 10.0 * g.next_normal();
      e_l1 += std::abs(y[i] - (h.row(i) * x)(0) - v[i]);
    }
    const auto sol =
        solve(DecodeProblem::constrained(y, h, v.norm()), 1e-8);
    REQUIRE(sol.converged);
    // (x, v) is feasible with objective |e|_1
    CHECK(sol.objective <= e_l1 * (1.0 + 1e-6) + 1e-6);
  }
}

TEST_CASE("kkt certificate separates optima from non-optima") {
  rse::rng::Generator g({81, 0});
  const auto h = random_matrix(g, 12, 4);
  Eigen::VectorXd x(4);
  x << 1.0, -2.0, 0.5, 3.0;
  const Eigen::VectorXd y = h * x;
  const auto problem = DecodeProblem::lagrangian(y, h, 5.0);
  auto sol = solve(problem, 1e-10);
  REQUIRE(sol.converged);
  CHECK(kkt_certificate(problem, sol) <= 1e-9);

  auto perturbed = sol;
  perturbed.x_hat[1] += 0.1;
  CHECK(kkt_certificate(problem, perturbed) > 1e-4);
}

TEST_CASE("kkt certificate stays small across random instances") {
  rse::rng::Generator g({82, 0});
  const double tol = 1e-6;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 20, m = 8;
    const auto h = random_matrix(g, n, m);
    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x[j] = g.next_normal();
    Eigen::VectorXd y = h * x;
    for (int i = 0; i < 2; ++i) y[i] = -y[i];
    for (int i = 0; i < n; ++i) y[i] += 0.3 * g.next_normal();
    const bool lag = rep % 2 == 0;
    const auto problem =
        lag ? DecodeProblem::lagrangian(y, h, 0.5 + (rep % 7))
            : DecodeProblem::constrained(y, h, 0.2 + 0.1 * (rep % 5));
    const auto sol = solve(problem, tol, 400000);
    REQUIRE(sol.converged);
    const double cert = kkt_certificate(problem, sol);
    CHECK(cert <= 10.0 * tol);
    CHECK(sol.certificate_gap <= tol);
  }
}

TEST_CASE("error bound from the recovery theory holds on feasible instances") {
  // n = 150, m = 60 puts delta = 0.4; k = 5 keeps the balancedness
  // constant feasible (the k = 12 configuration is already above the
  // sparsity threshold and certifies nothing)
  const double alpha = rse::bounds::alpha_star(0.4);
  const auto c = rse::bounds::c_from_sparsity(alpha, 5.0 / 150.0);
  REQUIRE(c.has_value());
  rse::rng::Generator g({83, 0});
  for (int rep = 0; rep < 3; ++rep) {
    const int n = 150, m = 60, k = 5;
    const auto h = random_matrix(g, n, m);
    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x[j] = g.next_normal();
    x.normalize();
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = 0.3 * g.next_normal();
    Eigen::VectorXd y = h * x + v;
    const auto support = rse::rng::sample_without_replacement(g, n, k);
    for (int idx : support) y[idx] += 20.0 * g.next_normal();
    const double eps = v.norm();
    const auto sol = solve(DecodeProblem::constrained(y, h, eps), 1e-6);
    REQUIRE(sol.converged);
    const double bound =
        theorem1_bound(min_singular_value(h), alpha, *c, eps);
    CHECK((sol.x_hat - x).norm() <= bound);
  }
}

TEST_CASE("solver reports non-convergence at a tiny iteration cap") {
  rse::rng::Generator g({84, 0});
  const auto h = random_matrix(g, 20, 6);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) y[i] = g.next_normal() * 3.0;
  const auto sol = solve(DecodeProblem::lagrangian(y, h, 2.0), 1e-12, 5);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 5);
  CHECK(std::isfinite(sol.objective));
  CHECK(std::isfinite(sol.certificate_gap));
}

TEST_CASE("rank-deficient and malformed problems are rejected") {
  Eigen::MatrixXd h(4, 2);
  h << 1, 2, 1, 2, 1, 2, 1, 2;  // second column is twice the first
  Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_AS(solve(DecodeProblem::lagrangian(y, h, 1.0)),
                  RankDeficientError);

  Eigen::MatrixXd square = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(
      solve(DecodeProblem::lagrangian(Eigen::VectorXd::Ones(3), square, 1.0)),
      std::invalid_argument);
  Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(4, 2);
  CHECK_THROWS_AS(
      solve(DecodeProblem::lagrangian(Eigen::VectorXd::Ones(4), ok, -1.0)),
      std::invalid_argument);
}

TEST_CASE("sparse error spec validation") {
  SparseErrorSpec e;
  e.support = {0, 3};
  e.values = {1.0, -2.0};
  Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
  e.apply_to(y);
  CHECK(y[0] == 1.0);
  CHECK(y[3] == -2.0);

  SparseErrorSpec dup;
  dup.support = {1, 1};
  dup.values = {1.0, 1.0};
  CHECK_THROWS_AS(dup.validate(5), std::invalid_argument);
  SparseErrorSpec oob;
  oob.support = {7};
  oob.values = {1.0};
  CHECK_THROWS_AS(oob.validate(5), std::invalid_argument);
}

TEST_CASE("min singular value") {
  CHECK(min_singular_value(Eigen::MatrixXd::Identity(3, 3)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  Eigen::MatrixXd d(3, 2);
  d << 3, 0, 0, 4, 0, 0;
  CHECK(min_singular_value(d) == doctest::Approx(3.0).epsilon(1e-12));

  rse::rng::Generator g({85, 0});
  const auto h = random_matrix(g, 400, 200);
  const double ratio = min_singular_value(h) / std::sqrt(400.0);
  CHECK(std::abs(ratio - (1.0 - std::sqrt(0.5))) <= 0.05);
}

TEST_CASE("theorem1_bound values") {
  CHECK(theorem1_bound(1.0, 1.0, 3.0, 0.0) == 0.0);
  CHECK(theorem1_bound(1.0, 1.0, 3.0, 1.0) == doctest::Approx(4.0));
  // consistency with the normalized amplification factor
  const double n = 150.0;
  const double delta = 0.5, rho = 0.01;
  const double a = rse::bounds::alpha_star(delta);
  const auto c = rse::bounds::c_from_sparsity(a, rho);
  REQUIRE(c.has_value());
  const auto w = rse::bounds::varpi(delta, rho);
  const double sigma_min = (1.0 - std::sqrt(delta)) * std::sqrt(n);
  CHECK(theorem1_bound(sigma_min, a, *c, 2.0) ==
        doctest::Approx(*w * 2.0 / std::sqrt(n)).epsilon(1e-12));
}

TEST_CASE("problem csv round trip and solution sections") {
  rse::rng::Generator g({86, 0});
  const auto h = random_matrix(g, 5, 2);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) y[i] = g.next_normal();
  const auto problem = DecodeProblem::constrained(y, h, 0.75);

  std::ostringstream out;
  write_problem(out, problem);
  std::istringstream in(out.str());
  const auto back = read_problem(in);
  CHECK(back.mode == Mode::constrained);
  CHECK(back.epsilon == 0.75);
  CHECK((back.h - h).norm() == 0.0);
  CHECK((back.y - y).norm() == 0.0);

  std::ostringstream sol_out;
  DecodeSolution s;
  s.x_hat = Eigen::VectorXd::Constant(2, 1.5);
  s.z_hat = Eigen::VectorXd::Zero(5);
  write_solution(sol_out, s);
  const std::string text = sol_out.str();
  CHECK(text.find("index,x_hat\n0,1.5\n1,1.5\nindex,z_hat\n0,0\n") !=
        std::string::npos);

  std::istringstream bad("# 2,1,weird,0\n1\n2\n3\n4\n");
  CHECK_THROWS_AS(read_problem(bad), rse::ParseError);
  std::istringstream trunc("# 3,1,lagrangian,2\n1\n2\n3\n");
  CHECK_THROWS_AS(read_problem(trunc), rse::ParseError);
}
