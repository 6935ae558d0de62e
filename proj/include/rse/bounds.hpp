#pragma once

#include <optional>

// Recovery guarantees for mixed l1/l2 decoding over random Gaussian
// measurement subspaces: the almost-Euclidean constant of the subspace,
// the balancedness constant driving the decoding error bound, the
// recoverable-sparsity threshold, and the resulting error-amplification
// factor. All quantities are deterministic functions of the dimension
// ratio delta = m/n and the corruption fraction rho = k/n.

namespace rse::bounds {

struct SubspaceRatio {
  double delta;  // m/n, in (0,1)

  static SubspaceRatio checked(double delta);  // throws outside (0,1)
};

struct BoundReport {
  double delta = 0.0;
  double rho = 0.0;
  double alpha_star = 0.0;
  double c_constant = 0.0;            // balancedness constant, > 1 when feasible
  double sigma_min_normalized = 0.0;  // limiting sigma_min / sqrt(n) = 1 - sqrt(delta)
  double varpi = 0.0;                 // error amplification factor
  bool feasible = false;
};

/// Complementary error function.
double erfc(double x);

/// Objective whose minimum over u2 >= 0 defines g(alpha):
///   sqrt((u2^2+1) erfc(u2/sqrt 2) - sqrt(2/pi) u2 exp(-u2^2/2)) + alpha u2.
/// The radicand equals E[(h-u2)^2; h>u2] for half-normal h and is clamped
/// at zero where floating-point cancellation drives it negative.
double g_objective(double alpha, double u2);

/// min over u2 >= 0 of g_objective(alpha, .), accurate to about 1e-6.
double g_of_alpha(double alpha);

/// Largest alpha with g_of_alpha(alpha) < sqrt(1 - delta), by bisection.
double alpha_star(double delta);

/// Largest C > 1 with 1/rho + C^2/(1-rho) = (C+1)^2/alpha^2, or nullopt
/// when the corruption fraction rho is above the recoverable threshold.
std::optional<double> c_from_sparsity(double alpha, double rho);

/// The rho at which c_from_sparsity becomes infeasible: the smaller root
/// of 1/rho + 1/(1-rho) = 4/alpha^2.
double max_recoverable_sparsity(double alpha);

/// Error amplification factor 2(C+1) / ((1-sqrt(delta)) alpha* (C-1)),
/// with alpha* = alpha_star(delta) and C = c_from_sparsity(alpha*, rho).
std::optional<double> varpi(double delta, double rho);

/// Lower bound on the probability that a uniformly random m-dimensional
/// subspace of R^n misses a sphere subset of mean width w_s:
///   1 - 3.5 exp(-((sqrt(n-m) - 1/(2 sqrt(n-m))) - w_s) / 18).
/// May be negative (vacuous) for large w_s.
double escape_probability_lower_bound(int n, int m, double w_s);

/// Full report for a (delta, rho) pair. c_constant and varpi are NaN when
/// infeasible.
BoundReport bound_report(double delta, double rho);

}  // namespace rse::bounds
