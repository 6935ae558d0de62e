#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>

#include "rse/powerflow.hpp"
#include "rse/rng.hpp"

// Shared helpers for the test suites. Everything here is an independent
// computation path: the quadrature, finite differences, and the
// full-angle measurement evaluator deliberately do not reuse the library
// implementations they are used to check.

namespace testsupport {

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double fa, double fm, double fb, double tol,
                      int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-13) {
  const double m = 0.5 * (a + b);
  return simpson(f, a, b, f(a), f(m), f(b), tol, 48);
}

// Central finite differences of a vector-valued function.
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x0);
  Eigen::MatrixXd jac(f0.size(), x0.size());
  for (Eigen::Index c = 0; c < x0.size(); ++c) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp[c] += h;
    xm[c] -= h;
    jac.col(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

// Measurement evaluation with an explicit angle for every bus (reference
// included). Written directly from the defining formulas as an oracle for
// evaluate_h and for gauge-invariance checks.
inline Eigen::VectorXd eval_full_angles(const rse::powerflow::PowerNetwork& net,
                                        const rse::powerflow::MeasurementPlan& plan,
                                        const Eigen::VectorXd& e,
                                        const Eigen::VectorXd& d) {
  using rse::powerflow::MeasurementKind;
  const int k = net.bus_count;
  Eigen::VectorXd out(plan.size());
  for (int r = 0; r < plan.size(); ++r) {
    const auto& m = plan.entries[r];
    const int i = m.i, j = m.j;
    double v = 0.0;
    switch (m.kind) {
      case MeasurementKind::p_injection:
        for (int q = 0; q < k; ++q)
          v += e[i] * e[q] * net.y_mag(i, q) *
               std::cos(net.y_ang(i, q) + d[i] - d[q]);
        break;
      case MeasurementKind::q_injection:
        for (int q = 0; q < k; ++q)
          v += e[i] * e[q] * net.y_mag(i, q) *
               std::sin(net.y_ang(i, q) + d[i] - d[q]);
        break;
      case MeasurementKind::p_flow:
        v = e[i] * e[j] * net.y_mag(i, j) *
                std::cos(net.y_ang(i, j) + d[i] - d[j]) -
            e[i] * e[i] * net.y_mag(i, j) * std::cos(net.y_ang(i, j)) +
            e[i] * e[i] * net.shunt_mag[i] * std::cos(net.shunt_ang[i]);
        break;
      case MeasurementKind::q_flow:
        v = e[i] * e[j] * net.y_mag(i, j) *
                std::sin(net.y_ang(i, j) + d[i] - d[j]) -
            e[i] * e[i] * net.y_mag(i, j) * std::sin(net.y_ang(i, j)) +
            e[i] * e[i] * net.shunt_mag[i] * std::sin(net.shunt_ang[i]);
        break;
    }
    out[r] = v;
  }
  return out;
}

// Small random ring network with a chord, random polar admittances, and a
// full measurement plan (all injections, all flows both ways).
inline std::pair<rse::powerflow::PowerNetwork, rse::powerflow::MeasurementPlan>
random_net(rse::rng::Generator& g, int k) {
  using namespace rse::powerflow;
  PowerNetwork net = PowerNetwork::empty(k, 0);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k; ++i) pairs.emplace_back(i, (i + 1) % k);
  if (k > 3) pairs.emplace_back(0, k / 2);
  for (auto [i, j] : pairs) {
    const int a = std::min(i, j), b = std::max(i, j);
    if (net.y_mag(a, b) > 0.0) continue;
    const double y = 2.0 + 4.0 * g.next_unit();
    const double th = 1.5 + 0.5 * g.next_unit();
    net.y_mag(a, b) = net.y_mag(b, a) = y;
    net.y_ang(a, b) = net.y_ang(b, a) = th;
  }
  for (int i = 0; i < k; ++i) {
    net.y_mag(i, i) = 4.0 + 8.0 * g.next_unit();
    net.y_ang(i, i) = -1.4 + 0.3 * g.next_unit();
    net.shunt_mag[i] = 0.05 * g.next_unit();
    net.shunt_ang[i] = 1.5707963267948966;
  }
  MeasurementPlan plan;
  for (int i = 0; i < k; ++i)
    plan.entries.push_back({MeasurementKind::p_injection, i, -1});
  for (int i = 0; i < k; ++i)
    plan.entries.push_back({MeasurementKind::q_injection, i, -1});
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j || net.y_mag(i, j) <= 0.0) continue;
      plan.entries.push_back({MeasurementKind::p_flow, i, j});
      plan.entries.push_back({MeasurementKind::q_flow, i, j});
    }
  }
  return {net, plan};
}

inline rse::powerflow::StateVector random_state(rse::rng::Generator& g,
                                                const rse::powerflow::PowerNetwork& net,
                                                double mag_span = 0.05,
                                                double ang_span = 0.2) {
  auto x = rse::powerflow::flat_start(net);
  for (int b = 0; b < net.bus_count; ++b)
    x.magnitudes[b] = g.next_uniform(1.0 - mag_span, 1.0 + mag_span);
  for (int a = 0; a + 1 < net.bus_count; ++a)
    x.angles[a] = g.next_uniform(-ang_span, ang_span);
  return x;
}

}  // namespace testsupport
