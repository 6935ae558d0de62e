#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

// Nonlinear measurement model of an AC power network in polar admittance
// form. Real/reactive injections at a bus sum over all buses including the
// self term; real/reactive line flows carry the series term, the sending
// end term, and the sending bus shunt term:
//
//   P_i  = sum_j E_i E_j Y_ij cos(th_ij + d_i - d_j)
//   Q_i  = sum_j E_i E_j Y_ij sin(th_ij + d_i - d_j)
//   P_ij = E_i E_j Y_ij cos(th_ij + d_i - d_j) - E_i^2 Y_ij cos th_ij
//          + E_i^2 Y_si cos th_si
//   Q_ij = E_i E_j Y_ij sin(th_ij + d_i - d_j) - E_i^2 Y_ij sin th_ij
//          + E_i^2 Y_si sin th_si
//
// Angles are radians, magnitudes per-unit, and the reference bus angle is
// fixed at zero and excluded from the state.

namespace rse::powerflow {

struct PowerNetwork {
  int bus_count = 0;
  int reference_bus = 0;
  Eigen::MatrixXd y_mag;      // admittance magnitudes; diagonal = self terms
  Eigen::MatrixXd y_ang;      // admittance angles (radians)
  Eigen::VectorXd shunt_mag;  // per-bus shunt magnitude
  Eigen::VectorXd shunt_ang;  // per-bus shunt angle

  static PowerNetwork empty(int bus_count, int reference_bus = 0);
};

enum class MeasurementKind { p_injection, q_injection, p_flow, q_flow };

struct Measurement {
  MeasurementKind kind;
  int i = 0;
  int j = -1;  // second bus for flows, -1 for injections

  bool operator==(const Measurement&) const = default;
};

struct MeasurementPlan {
  std::vector<Measurement> entries;

  int size() const { return static_cast<int>(entries.size()); }
};

struct StateVector {
  Eigen::VectorXd magnitudes;  // length k'
  Eigen::VectorXd angles;      // length k'-1, buses in ascending order
                               // with the reference bus skipped

  int dimension() const {
    return static_cast<int>(magnitudes.size() + angles.size());
  }
};

/// Unit magnitudes, zero angles.
StateVector flat_start(const PowerNetwork& net);

/// Angles for every bus, reference included at zero.
Eigen::VectorXd full_angles(const PowerNetwork& net, const StateVector& x);

/// Stacks [magnitudes; angles] into one vector of length 2k'-1.
Eigen::VectorXd state_to_vector(const StateVector& x);
StateVector state_from_vector(const PowerNetwork& net,
                              const Eigen::VectorXd& v);

/// Throws ValidationError when network invariants are violated (negative
/// magnitudes, asymmetric sparsity, reference out of range).
void validate(const PowerNetwork& net);

/// Throws ValidationError when the plan references invalid buses or flows
/// on absent lines.
void validate(const MeasurementPlan& plan, const PowerNetwork& net);

/// Measurement values in plan order.
Eigen::VectorXd evaluate_h(const PowerNetwork& net, const MeasurementPlan& plan,
                           const StateVector& x);

/// Analytic Jacobian, n x (2k'-1); columns are all magnitudes then all
/// non-reference angles in bus order.
Eigen::MatrixXd jacobian(const PowerNetwork& net, const MeasurementPlan& plan,
                         const StateVector& x);

// Case file format (line oriented, '#' comments):
//   [BUS]   one bus id per line; the reference bus carries a "ref" flag
//   [LINE]  i j Y theta Ysi_i theta_si_i Ysi_j theta_si_j
//   [DIAG]  i Y_ii theta_ii            (optional self terms)
//   [MEAS]  PI i | QI i | PF i j | QF i j   (order = measurement order)
// Bus ids must form 0..k'-1. Per-end line shunts accumulate (as complex
// admittances) into the per-bus shunt. Canonical serialization sorts
// buses, lines, and diagonal entries, keeps measurement order, and
// attaches each bus's accumulated shunt to its first listed line.
std::pair<PowerNetwork, MeasurementPlan> parse_case(std::istream& in);
std::pair<PowerNetwork, MeasurementPlan> parse_case(const std::string& tx);
std::string serialize_case(const PowerNetwork& net,
                           const MeasurementPlan& plan);
std::pair<PowerNetwork, MeasurementPlan> load_case_file(
    const std::string& path);

std::string describe(const Measurement& m);

}  // namespace rse::powerflow
