#include "rse/bounds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rse::bounds {

namespace {

constexpr double kSqrt2OverPi = 0.7978845608028654;

// g_objective is provably increasing beyond u2 = 10 for every alpha >= 0
// (the radicand is below 1e-20 there), so the search interval is [0, 10].
constexpr double kU2High = 10.0;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

SubspaceRatio SubspaceRatio::checked(double delta) {
  require(delta > 0.0 && delta < 1.0, "delta must be in (0,1)");
  return {delta};
}

double erfc(double x) { return std::erfc(x); }

double g_objective(double alpha, double u2) {
  require(alpha >= 0.0, "g_objective: alpha must be >= 0");
  require(u2 >= 0.0, "g_objective: u2 must be >= 0");
  const double radicand = (u2 * u2 + 1.0) * std::erfc(u2 / std::sqrt(2.0)) -
                          kSqrt2OverPi * u2 * std::exp(-0.5 * u2 * u2);
  return std::sqrt(std::max(radicand, 0.0)) + alpha * u2;
}

double g_of_alpha(double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "g_of_alpha: alpha must be in [0,1]");
  // Golden-section search; the objective is convex in u2.
  const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0;
  double b = kU2High;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = g_objective(alpha, c);
  double fd = g_objective(alpha, d);
  for (int it = 0; it < 90; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = g_objective(alpha, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = g_objective(alpha, d);
    }
  }
  const double interior = g_objective(alpha, 0.5 * (a + b));
  // The left endpoint value is exactly 1; for alpha >= sqrt(2/pi) it is the
  // minimizer.
  return std::min(interior, 1.0);
}

double alpha_star(double delta) {
  const double target = std::sqrt(1.0 - SubspaceRatio::checked(delta).delta);
  // g is nondecreasing in alpha: g(0) = 0 < target and g(sqrt(2/pi)) = 1 >
  // target, so bisection brackets the crossing.
  double lo = 0.0;
  double hi = kSqrt2OverPi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g_of_alpha(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::optional<double> c_from_sparsity(double alpha, double rho) {
  require(alpha > 0.0 && alpha <= 1.0, "c_from_sparsity: alpha must be in (0,1]");
  require(rho > 0.0 && rho < 1.0, "c_from_sparsity: rho must be in (0,1)");
  const double inv_a2 = 1.0 / (alpha * alpha);
  const double qa = 1.0 / (1.0 - rho) - inv_a2;
  const double qb = -2.0 * inv_a2;
  const double qc = 1.0 / rho - inv_a2;
  double root;
  if (std::abs(qa) <= 1e-14 * (1.0 / (1.0 - rho) + inv_a2)) {
    // Degenerate leading coefficient: the equation is linear in C.
    root = -qc / qb;
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    root = std::max((-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa));
  }
  if (!(root > 1.0)) return std::nullopt;
  return root;
}

double max_recoverable_sparsity(double alpha) {
  require(alpha > 0.0 && alpha <= 1.0,
          "max_recoverable_sparsity: alpha must be in (0,1]");
  // Smaller root of rho(1-rho) = alpha^2/4.
  return 0.5 * (1.0 - std::sqrt(1.0 - alpha * alpha));
}

std::optional<double> varpi(double delta, double rho) {
  SubspaceRatio::checked(delta);
  require(rho > 0.0 && rho < 1.0, "varpi: rho must be in (0,1)");
  const double a = alpha_star(delta);
  const auto c = c_from_sparsity(a, rho);
  if (!c) return std::nullopt;
  const double sigma_bar = 1.0 - std::sqrt(delta);
  return 2.0 * (*c + 1.0) / (sigma_bar * a * (*c - 1.0));
}

double escape_probability_lower_bound(int n, int m, double w_s) {
  require(n > m && m >= 1, "escape_probability_lower_bound: need n > m >= 1");
  require(w_s >= 0.0, "escape_probability_lower_bound: w_s must be >= 0");
  const double root = std::sqrt(static_cast<double>(n - m));
  const double threshold = root - 0.5 / root;
  return 1.0 - 3.5 * std::exp(-(threshold - w_s) / 18.0);
}

BoundReport bound_report(double delta, double rho) {
  BoundReport r;
  r.delta = delta;
  r.rho = rho;
  r.alpha_star = alpha_star(delta);
  r.sigma_min_normalized = 1.0 - std::sqrt(delta);
  const auto c = c_from_sparsity(r.alpha_star, rho);
  if (c) {
    r.c_constant = *c;
    r.varpi = 2.0 * (*c + 1.0) /
              (r.sigma_min_normalized * r.alpha_star * (*c - 1.0));
    r.feasible = true;
  } else {
    r.c_constant = std::numeric_limits<double>::quiet_NaN();
    r.varpi = std::numeric_limits<double>::quiet_NaN();
    r.feasible = false;
  }
  return r;
}

}  // namespace rse::bounds
