#include "rse/powerflow.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <sstream>

#include "rse/errors.hpp"
#include "rse/text.hpp"

namespace rse::powerflow {

namespace {

int angle_column(const PowerNetwork& net, int bus) {
  // Angle columns follow the k' magnitude columns, buses ascending with
  // the reference bus skipped.
  return net.bus_count + bus - (bus > net.reference_bus ? 1 : 0);
}

struct LineRecord {
  int i, j;
  double y, theta;
  double ysi, thsi;  // shunt contribution at end i
  double ysj, thsj;  // shunt contribution at end j
};

}  // namespace

PowerNetwork PowerNetwork::empty(int bus_count, int reference_bus) {
  PowerNetwork net;
  net.bus_count = bus_count;
  net.reference_bus = reference_bus;
  net.y_mag = Eigen::MatrixXd::Zero(bus_count, bus_count);
  net.y_ang = Eigen::MatrixXd::Zero(bus_count, bus_count);
  net.shunt_mag = Eigen::VectorXd::Zero(bus_count);
  net.shunt_ang = Eigen::VectorXd::Zero(bus_count);
  return net;
}

StateVector flat_start(const PowerNetwork& net) {
  StateVector x;
  x.magnitudes = Eigen::VectorXd::Ones(net.bus_count);
  x.angles = Eigen::VectorXd::Zero(net.bus_count - 1);
  return x;
}

Eigen::VectorXd full_angles(const PowerNetwork& net, const StateVector& x) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(net.bus_count);
  int col = 0;
  for (int b = 0; b < net.bus_count; ++b) {
    if (b == net.reference_bus) continue;
    d[b] = x.angles[col++];
  }
  return d;
}

Eigen::VectorXd state_to_vector(const StateVector& x) {
  Eigen::VectorXd v(x.dimension());
  v.head(x.magnitudes.size()) = x.magnitudes;
  v.tail(x.angles.size()) = x.angles;
  return v;
}

StateVector state_from_vector(const PowerNetwork& net,
                              const Eigen::VectorXd& v) {
  if (v.size() != 2 * net.bus_count - 1)
    throw std::invalid_argument("state_from_vector: wrong length");
  StateVector x;
  x.magnitudes = v.head(net.bus_count);
  x.angles = v.tail(net.bus_count - 1);
  return x;
}

void validate(const PowerNetwork& net) {
  const int k = net.bus_count;
  if (k < 1) throw ValidationError("network must have at least one bus");
  if (net.reference_bus < 0 || net.reference_bus >= k)
    throw ValidationError("reference bus out of range");
  if (net.y_mag.rows() != k || net.y_mag.cols() != k ||
      net.y_ang.rows() != k || net.y_ang.cols() != k ||
      net.shunt_mag.size() != k || net.shunt_ang.size() != k)
    throw ValidationError("network array dimensions disagree with bus count");
  for (int i = 0; i < k; ++i) {
    if (net.shunt_mag[i] < 0.0)
      throw ValidationError("shunt magnitude must be nonnegative");
    for (int j = 0; j < k; ++j) {
      if (net.y_mag(i, j) < 0.0)
        throw ValidationError("admittance magnitude must be nonnegative");
      if ((net.y_mag(i, j) == 0.0) != (net.y_mag(j, i) == 0.0))
        throw ValidationError("admittance sparsity pattern must be symmetric");
    }
  }
}

void validate(const MeasurementPlan& plan, const PowerNetwork& net) {
  const int k = net.bus_count;
  for (const auto& m : plan.entries) {
    if (m.i < 0 || m.i >= k)
      throw ValidationError("measurement bus index out of range");
    const bool flow = m.kind == MeasurementKind::p_flow ||
                      m.kind == MeasurementKind::q_flow;
    if (flow) {
      if (m.j < 0 || m.j >= k)
        throw ValidationError("flow measurement bus index out of range");
      if (m.i == m.j) throw ValidationError("flow endpoints must differ");
      if (net.y_mag(m.i, m.j) <= 0.0)
        throw ValidationError("flow measurement on an absent line");
    }
  }
}

Eigen::VectorXd evaluate_h(const PowerNetwork& net, const MeasurementPlan& plan,
                           const StateVector& x) {
  const int k = net.bus_count;
  if (x.magnitudes.size() != k || x.angles.size() != k - 1)
    throw std::invalid_argument("evaluate_h: state dimension mismatch");
  const Eigen::VectorXd& e = x.magnitudes;
  const Eigen::VectorXd d = full_angles(net, x);
  Eigen::VectorXd out(plan.size());
  for (int r = 0; r < plan.size(); ++r) {
    const auto& m = plan.entries[r];
    const int i = m.i;
    switch (m.kind) {
      case MeasurementKind::p_injection: {
        double acc = 0.0;
        for (int j = 0; j < k; ++j)
          acc += e[i] * e[j] * net.y_mag(i, j) *
                 std::cos(net.y_ang(i, j) + d[i] - d[j]);
        out[r] = acc;
        break;
      }
      case MeasurementKind::q_injection: {
        double acc = 0.0;
        for (int j = 0; j < k; ++j)
          acc += e[i] * e[j] * net.y_mag(i, j) *
                 std::sin(net.y_ang(i, j) + d[i] - d[j]);
        out[r] = acc;
        break;
      }
      case MeasurementKind::p_flow: {
        const int j = m.j;
        out[r] = e[i] * e[j] * net.y_mag(i, j) *
                     std::cos(net.y_ang(i, j) + d[i] - d[j]) -
                 e[i] * e[i] * net.y_mag(i, j) * std::cos(net.y_ang(i, j)) +
                 e[i] * e[i] * net.shunt_mag[i] * std::cos(net.shunt_ang[i]);
        break;
      }
      case MeasurementKind::q_flow: {
        const int j = m.j;
        out[r] = e[i] * e[j] * net.y_mag(i, j) *
                     std::sin(net.y_ang(i, j) + d[i] - d[j]) -
                 e[i] * e[i] * net.y_mag(i, j) * std::sin(net.y_ang(i, j)) +
                 e[i] * e[i] * net.shunt_mag[i] * std::sin(net.shunt_ang[i]);
        break;
      }
    }
  }
  return out;
}

Eigen::MatrixXd jacobian(const PowerNetwork& net, const MeasurementPlan& plan,
                         const StateVector& x) {
  const int k = net.bus_count;
  if (x.magnitudes.size() != k || x.angles.size() != k - 1)
    throw std::invalid_argument("jacobian: state dimension mismatch");
  const Eigen::VectorXd& e = x.magnitudes;
  const Eigen::VectorXd d = full_angles(net, x);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(plan.size(), 2 * k - 1);
  const int ref = net.reference_bus;

  for (int r = 0; r < plan.size(); ++r) {
    const auto& m = plan.entries[r];
    const int i = m.i;
    const bool is_p = m.kind == MeasurementKind::p_injection ||
                      m.kind == MeasurementKind::p_flow;
    // trig of the coupled term and its angle derivative
    const auto fc = [&](int a, int b) {
      const double arg = net.y_ang(a, b) + d[a] - d[b];
      return is_p ? std::cos(arg) : std::sin(arg);
    };
    const auto fs = [&](int a, int b) {
      const double arg = net.y_ang(a, b) + d[a] - d[b];
      return is_p ? -std::sin(arg) : std::cos(arg);
    };
    switch (m.kind) {
      case MeasurementKind::p_injection:
      case MeasurementKind::q_injection: {
        double de_i = 2.0 * e[i] * net.y_mag(i, i) *
                      (is_p ? std::cos(net.y_ang(i, i))
                            : std::sin(net.y_ang(i, i)));
        double dd_i = 0.0;
        for (int j = 0; j < k; ++j) {
          if (j == i) continue;
          const double common = net.y_mag(i, j) * fc(i, j);
          de_i += e[j] * common;
          jac(r, j) = e[i] * common;
          const double dterm = e[i] * e[j] * net.y_mag(i, j) * fs(i, j);
          dd_i += dterm;
          if (j != ref) jac(r, angle_column(net, j)) = -dterm;
        }
        jac(r, i) = de_i;
        if (i != ref) jac(r, angle_column(net, i)) = dd_i;
        break;
      }
      case MeasurementKind::p_flow:
      case MeasurementKind::q_flow: {
        const int j = m.j;
        const double y = net.y_mag(i, j);
        const double line_trig =
            is_p ? std::cos(net.y_ang(i, j)) : std::sin(net.y_ang(i, j));
        const double shunt_trig = is_p ? std::cos(net.shunt_ang[i])
                                       : std::sin(net.shunt_ang[i]);
        jac(r, i) = e[j] * y * fc(i, j) - 2.0 * e[i] * y * line_trig +
                    2.0 * e[i] * net.shunt_mag[i] * shunt_trig;
        jac(r, j) = e[i] * y * fc(i, j);
        const double dterm = e[i] * e[j] * y * fs(i, j);
        if (i != ref) jac(r, angle_column(net, i)) = dterm;
        if (j != ref) jac(r, angle_column(net, j)) = -dterm;
        break;
      }
    }
  }
  return jac;
}

namespace {

enum class Section { none, bus, line, diag, meas };

struct ParsedCase {
  std::vector<std::pair<int, bool>> buses;  // (id, ref flag)
  std::vector<LineRecord> lines;
  std::vector<std::array<double, 3>> diags;  // i, Y_ii, theta_ii
  MeasurementPlan plan;
};

double parse_num(std::string_view tok, int lineno) {
  double v;
  if (!text::parse_double(tok, v))
    throw ParseError(lineno, "bad number '" + std::string(tok) + "'");
  return v;
}

int parse_index(std::string_view tok, int lineno) {
  int v;
  if (!text::parse_int(tok, v))
    throw ParseError(lineno, "bad index '" + std::string(tok) + "'");
  return v;
}

}  // namespace

std::pair<PowerNetwork, MeasurementPlan> parse_case(std::istream& in) {
  ParsedCase pc;
  Section section = Section::none;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line == "[BUS]")
        section = Section::bus;
      else if (line == "[LINE]")
        section = Section::line;
      else if (line == "[DIAG]")
        section = Section::diag;
      else if (line == "[MEAS]")
        section = Section::meas;
      else
        throw ParseError(lineno, "unknown section '" + std::string(line) + "'");
      continue;
    }
    const auto toks = text::tokens(line);
    switch (section) {
      case Section::none:
        throw ParseError(lineno, "content before any section header");
      case Section::bus: {
        if (toks.size() > 2 || (toks.size() == 2 && toks[1] != "ref"))
          throw ParseError(lineno, "bus line must be 'id' or 'id ref'");
        pc.buses.emplace_back(parse_index(toks[0], lineno), toks.size() == 2);
        break;
      }
      case Section::line: {
        if (toks.size() != 8)
          throw ParseError(lineno, "line entry must have 8 fields");
        LineRecord lr;
        lr.i = parse_index(toks[0], lineno);
        lr.j = parse_index(toks[1], lineno);
        lr.y = parse_num(toks[2], lineno);
        lr.theta = parse_num(toks[3], lineno);
        lr.ysi = parse_num(toks[4], lineno);
        lr.thsi = parse_num(toks[5], lineno);
        lr.ysj = parse_num(toks[6], lineno);
        lr.thsj = parse_num(toks[7], lineno);
        pc.lines.push_back(lr);
        break;
      }
      case Section::diag: {
        if (toks.size() != 3)
          throw ParseError(lineno, "diag entry must have 3 fields");
        pc.diags.push_back({static_cast<double>(parse_index(toks[0], lineno)),
                            parse_num(toks[1], lineno),
                            parse_num(toks[2], lineno)});
        break;
      }
      case Section::meas: {
        Measurement m;
        if (toks[0] == "PI" || toks[0] == "QI") {
          if (toks.size() != 2)
            throw ParseError(lineno, "injection entry must be 'PI i' or 'QI i'");
          m.kind = toks[0] == "PI" ? MeasurementKind::p_injection
                                   : MeasurementKind::q_injection;
          m.i = parse_index(toks[1], lineno);
        } else if (toks[0] == "PF" || toks[0] == "QF") {
          if (toks.size() != 3)
            throw ParseError(lineno, "flow entry must be 'PF i j' or 'QF i j'");
          m.kind = toks[0] == "PF" ? MeasurementKind::p_flow
                                   : MeasurementKind::q_flow;
          m.i = parse_index(toks[1], lineno);
          m.j = parse_index(toks[2], lineno);
        } else {
          throw ParseError(lineno,
                           "unknown measurement '" + std::string(toks[0]) + "'");
        }
        pc.plan.entries.push_back(m);
        break;
      }
    }
  }

  // Assemble and validate.
  const int k = static_cast<int>(pc.buses.size());
  if (k == 0) throw ValidationError("case has no buses");
  std::vector<bool> seen(k, false);
  int ref = -1;
  for (const auto& [id, is_ref] : pc.buses) {
    if (id < 0 || id >= k)
      throw ValidationError("bus ids must form 0..k-1");
    if (seen[id]) throw ValidationError("duplicate bus id");
    seen[id] = true;
    if (is_ref) {
      if (ref >= 0) throw ValidationError("multiple reference buses");
      ref = id;
    }
  }
  if (ref < 0) ref = pc.buses.front().first;

  PowerNetwork net = PowerNetwork::empty(k, ref);
  std::vector<std::vector<std::complex<double>>> shunt_terms(k);
  for (const auto& lr : pc.lines) {
    if (lr.i < 0 || lr.i >= k || lr.j < 0 || lr.j >= k)
      throw ValidationError("line bus index out of range");
    if (lr.i == lr.j)
      throw ValidationError("line endpoints must differ; use [DIAG]");
    if (lr.y < 0.0 || lr.ysi < 0.0 || lr.ysj < 0.0)
      throw ValidationError("admittance magnitude must be nonnegative");
    if (net.y_mag(lr.i, lr.j) != 0.0)
      throw ValidationError("duplicate line entry");
    net.y_mag(lr.i, lr.j) = net.y_mag(lr.j, lr.i) = lr.y;
    net.y_ang(lr.i, lr.j) = net.y_ang(lr.j, lr.i) = lr.theta;
    if (lr.ysi > 0.0)
      shunt_terms[lr.i].push_back(std::polar(lr.ysi, lr.thsi));
    if (lr.ysj > 0.0)
      shunt_terms[lr.j].push_back(std::polar(lr.ysj, lr.thsj));
  }
  for (const auto& dg : pc.diags) {
    const int i = static_cast<int>(dg[0]);
    if (i < 0 || i >= k) throw ValidationError("diag bus index out of range");
    if (dg[1] < 0.0)
      throw ValidationError("admittance magnitude must be nonnegative");
    net.y_mag(i, i) = dg[1];
    net.y_ang(i, i) = dg[2];
  }
  // Per-end shunts add as complex admittances. A single contribution keeps
  // its written polar form so canonical files round-trip exactly.
  {
    std::vector<std::pair<double, double>> first(k, {0.0, 0.0});
    for (const auto& lr : pc.lines) {
      if (lr.ysi > 0.0 && shunt_terms[lr.i].size() == 1)
        first[lr.i] = {lr.ysi, lr.thsi};
      if (lr.ysj > 0.0 && shunt_terms[lr.j].size() == 1)
        first[lr.j] = {lr.ysj, lr.thsj};
    }
    for (int i = 0; i < k; ++i) {
      if (shunt_terms[i].empty()) continue;
      if (shunt_terms[i].size() == 1) {
        net.shunt_mag[i] = first[i].first;
        net.shunt_ang[i] = first[i].second;
      } else {
        std::complex<double> acc(0.0, 0.0);
        for (const auto& c : shunt_terms[i]) acc += c;
        net.shunt_mag[i] = std::abs(acc);
        net.shunt_ang[i] = std::arg(acc);
      }
    }
  }

  validate(net);
  validate(pc.plan, net);
  return {std::move(net), std::move(pc.plan)};
}

std::pair<PowerNetwork, MeasurementPlan> parse_case(const std::string& tx) {
  std::istringstream in(tx);
  return parse_case(in);
}

std::string serialize_case(const PowerNetwork& net,
                           const MeasurementPlan& plan) {
  validate(net);
  validate(plan, net);
  const int k = net.bus_count;
  std::ostringstream out;
  out << "[BUS]\n";
  for (int i = 0; i < k; ++i) {
    out << i;
    if (i == net.reference_bus) out << " ref";
    out << '\n';
  }
  out << "[LINE]\n";
  std::vector<bool> shunt_written(k, false);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (net.y_mag(i, j) <= 0.0) continue;
      double ysi = 0.0, thsi = 0.0, ysj = 0.0, thsj = 0.0;
      if (!shunt_written[i] && net.shunt_mag[i] > 0.0) {
        ysi = net.shunt_mag[i];
        thsi = net.shunt_ang[i];
        shunt_written[i] = true;
      }
      if (!shunt_written[j] && net.shunt_mag[j] > 0.0) {
        ysj = net.shunt_mag[j];
        thsj = net.shunt_ang[j];
        shunt_written[j] = true;
      }
      out << i << ' ' << j << ' ' << text::format_double(net.y_mag(i, j))
          << ' ' << text::format_double(net.y_ang(i, j)) << ' '
          << text::format_double(ysi) << ' ' << text::format_double(thsi)
          << ' ' << text::format_double(ysj) << ' '
          << text::format_double(thsj) << '\n';
    }
  }
  for (int i = 0; i < k; ++i) {
    if (net.shunt_mag[i] > 0.0 && !shunt_written[i])
      throw ValidationError(
          "cannot serialize a shunt on a bus without incident lines");
  }
  bool any_diag = false;
  for (int i = 0; i < k; ++i) any_diag = any_diag || net.y_mag(i, i) > 0.0;
  if (any_diag) {
    out << "[DIAG]\n";
    for (int i = 0; i < k; ++i) {
      if (net.y_mag(i, i) <= 0.0) continue;
      out << i << ' ' << text::format_double(net.y_mag(i, i)) << ' '
          << text::format_double(net.y_ang(i, i)) << '\n';
    }
  }
  if (!plan.entries.empty()) {
    out << "[MEAS]\n";
    for (const auto& m : plan.entries) out << describe(m) << '\n';
  }
  return out.str();
}

std::pair<PowerNetwork, MeasurementPlan> load_case_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file: " + path);
  return parse_case(in);
}

std::string describe(const Measurement& m) {
  switch (m.kind) {
    case MeasurementKind::p_injection:
      return "PI " + std::to_string(m.i);
    case MeasurementKind::q_injection:
      return "QI " + std::to_string(m.i);
    case MeasurementKind::p_flow:
      return "PF " + std::to_string(m.i) + " " + std::to_string(m.j);
    case MeasurementKind::q_flow:
      return "QF " + std::to_string(m.i) + " " + std::to_string(m.j);
  }
  return {};
}

}  // namespace rse::powerflow
