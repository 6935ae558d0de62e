#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

// Robust linear decoding: recover x from y = Hx + e + v where e is sparse
// with arbitrary magnitudes and v is small in l2 norm. Two convex programs
// are supported,
//
//   constrained:  min |y - Hx - z|_1   subject to |z|_2 <= epsilon
//   lagrangian:   min |y - Hx - z|_1 + lambda |z|_2
//
// solved by a first-order primal-dual splitting with closed-form proximal
// steps and a duality-gap stopping rule, so a reported converged solution
// carries a certified objective accuracy.

namespace rse::decoder {

enum class Mode { constrained, lagrangian };

struct DecodeProblem {
  Eigen::VectorXd y;   // n observations
  Eigen::MatrixXd h;   // n x m measurement matrix, full column rank, n > m
  Mode mode = Mode::lagrangian;
  double epsilon = 0.0;  // constrained mode: l2 ball radius for z
  double lambda = 0.0;   // lagrangian mode: weight on |z|_2

  static DecodeProblem constrained(Eigen::VectorXd y, Eigen::MatrixXd h,
                                   double epsilon);
  static DecodeProblem lagrangian(Eigen::VectorXd y, Eigen::MatrixXd h,
                                  double lambda);
  double param() const {
    return mode == Mode::constrained ? epsilon : lambda;
  }
};

struct DecodeSolution {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd z_hat;
  Eigen::VectorXd dual;  // final dual iterate; reusable as a warm start
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
  double certificate_gap = 0.0;  // max KKT violation at the returned point
};

// Sparse gross-error specification: values added at distinct support
// indices.
struct SparseErrorSpec {
  std::vector<int> support;
  std::vector<double> values;

  void validate(int n) const;  // throws std::invalid_argument on violation
  void apply_to(Eigen::VectorXd& y) const;
};

class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  Eigen::VectorXd dual;
};

/// Solves the decoding problem. Stops when the projected-dual optimality
/// gap falls below tol * (1 + |objective|) and the KKT certificate of the
/// iterate falls below tol; otherwise returns the last iterate with
/// converged = false after max_iter iterations. Throws RankDeficientError
/// when H fails the relative rank check.
DecodeSolution solve(const DecodeProblem& problem, double tol = 1e-7,
                     int max_iter = 100000, const WarmStart* warm = nullptr);

/// Max violation of the subgradient optimality conditions at (x_hat,
/// z_hat): the residual-sign vector s must lie in [-1,1]^n with s' t =
/// |t|_1 for t = y - H x_hat - z_hat, H' s must vanish, and s must match
/// the subdifferential of the z term. All violations are normalized by
/// natural problem scales so the result is comparable to solver
/// tolerances.
double kkt_certificate(const DecodeProblem& problem,
                       const DecodeSolution& solution);

/// Smallest singular value of a dense matrix.
double min_singular_value(const Eigen::MatrixXd& h);

/// Decoding error bound 2 (C+1) epsilon / (sigma_min * alpha * (C-1)).
double theorem1_bound(double sigma_min, double alpha, double c,
                      double epsilon);

// CSV problem format: header "# n,m,mode,param", then n rows of H (m
// comma-separated values), then n rows of y (single column). The solution
// format is two sections with headers "index,x_hat" and "index,z_hat".
void write_problem(std::ostream& out, const DecodeProblem& problem);
DecodeProblem read_problem(std::istream& in);
void write_solution(std::ostream& out, const DecodeSolution& solution);

}  // namespace rse::decoder
