#include "rse/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "rse/errors.hpp"
#include "rse/text.hpp"

namespace rse::decoder {

namespace {

constexpr double kRankThreshold = 1e-10;

void validate_problem(const DecodeProblem& p) {
  const auto n = p.h.rows();
  const auto m = p.h.cols();
  if (m < 1 || n <= m)
    throw std::invalid_argument("DecodeProblem: need n > m >= 1");
  if (p.y.size() != n)
    throw std::invalid_argument("DecodeProblem: y length must match rows of H");
  if (p.param() < 0.0)
    throw std::invalid_argument("DecodeProblem: epsilon/lambda must be >= 0");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Largest singular value by power iteration on H'H; cheap and accurate
// enough for step sizes and certificate scaling.
double sigma_max_estimate(const Eigen::MatrixXd& h) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(h.cols());
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd w = h.transpose() * (h * v);
    lam = w.norm();
    if (lam == 0.0) return 0.0;
    v = w / lam;
  }
  return std::sqrt(lam);
}

// Completes a subgradient s of |t|_1: coordinates on the support of t are
// pinned to sign(t_i); free coordinates are chosen in [-1,1] to minimize
// |H's|^2 (plus a hinge on |s|_2 <= cap when cap >= 0) by projected
// gradient. Meaningful when t carries exact zeros, i.e. at high-accuracy
// solutions.
Eigen::VectorXd fit_subgradient(const Eigen::VectorXd& t,
                                const Eigen::MatrixXd& h, double cap,
                                int iters) {
  const auto n = t.size();
  const double tau_t = 1e-9 * (1.0 + t.lpNorm<Eigen::Infinity>());
  Eigen::VectorXd s(n);
  std::vector<bool> fixed(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fixed[i] = std::abs(t[i]) > tau_t;
    s[i] = fixed[i] ? sign(t[i]) : 0.0;
  }
  const double smax = sigma_max_estimate(h);
  const double step = 1.0 / (smax * smax + 1.0);
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd grad = h * (h.transpose() * s);
    if (cap >= 0.0) {
      const double sn = s.norm();
      if (sn > cap && sn > 0.0) grad += (1.0 - cap / sn) * s;
    }
    double moved = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      const double next = std::clamp(s[i] - step * grad[i], -1.0, 1.0);
      moved = std::max(moved, std::abs(next - s[i]));
      s[i] = next;
    }
    if (moved <= 1e-13) break;
  }
  return s;
}

double certificate_impl(const DecodeProblem& p, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& z,
                        const Eigen::VectorXd* dual_hint, int fit_iters) {
  const Eigen::VectorXd t = p.y - p.h * x - z;
  const double l1 = t.lpNorm<1>();
  const double col_scale = p.h.colwise().norm().maxCoeff();
  const auto stationarity = [&](const Eigen::VectorXd& s) {
    return (p.h.transpose() * s).lpNorm<Eigen::Infinity>() / (1.0 + col_scale);
  };
  const auto box = [](const Eigen::VectorXd& s) {
    return std::max(0.0, s.lpNorm<Eigen::Infinity>() - 1.0);
  };
  const auto complementarity = [&](const Eigen::VectorXd& s) {
    return std::max(0.0, l1 - s.dot(t)) / (1.0 + l1);
  };

  // Candidate residual subgradient for the branches where z pins nothing:
  // a clamped dual hint when available (the complementarity term measures
  // how far it sits from the subdifferential), otherwise a sign-pinned
  // box-constrained fit.
  const auto candidate = [&](double cap) -> Eigen::VectorXd {
    if (dual_hint) return dual_hint->cwiseMax(-1.0).cwiseMin(1.0);
    return fit_subgradient(t, p.h, cap, fit_iters);
  };

  const double zn = z.norm();
  if (p.mode == Mode::lagrangian) {
    if (zn > 1e-12 * (1.0 + p.y.norm())) {
      // z-stationarity pins the whole subgradient vector.
      const Eigen::VectorXd s = (p.lambda / zn) * z;
      return std::max({box(s), complementarity(s), stationarity(s)});
    }
    const Eigen::VectorXd s = candidate(p.lambda);
    const double ball = std::max(0.0, s.norm() - p.lambda) / (1.0 + p.lambda);
    return std::max({stationarity(s), ball, complementarity(s)});
  }

  // Constrained mode.
  const double feas = std::max(0.0, zn - p.epsilon) / (1.0 + p.epsilon);
  if (p.epsilon == 0.0) {
    const Eigen::VectorXd s = candidate(-1.0);
    return std::max({feas, stationarity(s), complementarity(s)});
  }
  if (zn < p.epsilon * (1.0 - 1e-9)) {
    // Ball constraint inactive: the l1 residual must vanish.
    const double y_scale = 1.0 + p.y.lpNorm<Eigen::Infinity>();
    return std::max(feas, t.lpNorm<Eigen::Infinity>() / y_scale);
  }
  // Active ball: the multiplier direction is z, the magnitude is fitted
  // through the complementarity condition s't = |t|_1.
  const double zt = z.dot(t);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(t.size());
  if (zt > 0.0 && zn > 0.0) s = (l1 / zt) * z;
  return std::max({feas, box(s), complementarity(s), stationarity(s)});
}

struct ProblemCsvHeader {
  int n = 0;
  int m = 0;
  Mode mode = Mode::lagrangian;
  double param = 0.0;
};

}  // namespace

DecodeProblem DecodeProblem::constrained(Eigen::VectorXd y, Eigen::MatrixXd h,
                                         double epsilon) {
  DecodeProblem p;
  p.y = std::move(y);
  p.h = std::move(h);
  p.mode = Mode::constrained;
  p.epsilon = epsilon;
  return p;
}

DecodeProblem DecodeProblem::lagrangian(Eigen::VectorXd y, Eigen::MatrixXd h,
                                        double lambda) {
  DecodeProblem p;
  p.y = std::move(y);
  p.h = std::move(h);
  p.mode = Mode::lagrangian;
  p.lambda = lambda;
  return p;
}

void SparseErrorSpec::validate(int n) const {
  if (support.size() != values.size())
    throw std::invalid_argument("SparseErrorSpec: support/values mismatch");
  if (static_cast<int>(support.size()) >= n)
    throw std::invalid_argument("SparseErrorSpec: need k < n");
  std::vector<int> sorted = support;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= n)
      throw std::invalid_argument("SparseErrorSpec: index out of range");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw std::invalid_argument("SparseErrorSpec: duplicate index");
  }
}

void SparseErrorSpec::apply_to(Eigen::VectorXd& y) const {
  validate(static_cast<int>(y.size()));
  for (std::size_t i = 0; i < support.size(); ++i)
    y[support[i]] += values[i];
}

DecodeSolution solve(const DecodeProblem& problem, double tol, int max_iter,
                     const WarmStart* warm) {
  validate_problem(problem);
  if (tol <= 0.0) throw std::invalid_argument("solve: tol must be positive");
  const auto n = problem.h.rows();
  const auto m = problem.h.cols();
  const Eigen::VectorXd& y = problem.y;

  // Column equilibration: iterating on H D with unit column norms keeps
  // the coupled operator [H D, I] balanced between the x and z blocks, so
  // step sizes are not throttled by the raw column scale of H. The
  // substitution x = D x~ is exact and is undone on exit.
  Eigen::VectorXd col_scale = problem.h.colwise().norm();
  for (Eigen::Index j = 0; j < m; ++j)
    if (col_scale[j] <= 0.0) col_scale[j] = 1.0;
  const Eigen::MatrixXd h =
      problem.h * col_scale.cwiseInverse().asDiagonal();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(h);
  const double s_max = svd.singularValues()(0);
  const double s_min = svd.singularValues()(m - 1);
  if (!(s_min > kRankThreshold * s_max))
    throw RankDeficientError("solve: H is rank deficient");

  // Thin Q factor for projecting the running dual onto the null space of
  // H', which turns the dual iterate into a feasible dual point and the
  // objective difference into a certified optimality gap.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(h);
  const Eigen::MatrixXd thin_q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, m);

  // Step sizes obey tau * sig * (sigma_max^2 + 1) = 1; the primal/dual
  // balance follows the scale mismatch between the primal iterates (order
  // |y|) and the dual ball (order lambda in the penalized form).
  const double opnorm = std::sqrt(s_max * s_max + 1.0);
  double balance = 1.0;
  if (problem.mode == Mode::lagrangian) {
    const double yn = y.norm();
    balance = std::clamp(yn / (problem.lambda + 0.02 * yn + 1e-300), 1.0,
                         50.0);
  }
  const double tau = balance / opnorm;
  const double sig = 1.0 / (balance * opnorm);

  Eigen::VectorXd x = warm ? warm->x : Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z = warm ? warm->z : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = warm ? warm->dual : Eigen::VectorXd::Zero(n);
  if (x.size() != m || z.size() != n || s.size() != n)
    throw std::invalid_argument("solve: warm start dimension mismatch");
  x = x.cwiseProduct(col_scale);  // into the equilibrated coordinates

  Eigen::VectorXd w = h * x;            // H x
  Eigen::VectorXd g = h.transpose() * s;  // H' s
  Eigen::VectorXd w_prev = w, z_prev = z;

  DecodeSolution sol;

  const auto objective_at = [&](const Eigen::VectorXd& t,
                                const Eigen::VectorXd& zz) {
    double obj = t.lpNorm<1>();
    if (problem.mode == Mode::lagrangian) obj += problem.lambda * zz.norm();
    return obj;
  };

  const auto duality_gap = [&](double obj) {
    Eigen::VectorXd sp = s - thin_q * (thin_q.transpose() * s);
    const double ninf = sp.lpNorm<Eigen::Infinity>();
    double scale = ninf > 1.0 ? 1.0 / ninf : 1.0;
    if (problem.mode == Mode::lagrangian) {
      const double n2 = sp.norm() * scale;
      if (n2 > problem.lambda && n2 > 0.0)
        scale *= problem.lambda / n2;
      return obj - y.dot(sp) * scale;
    }
    sp *= scale;
    return obj - (y.dot(sp) - problem.epsilon * sp.norm());
  };

  int it = 0;
  int next_check = 0;  // the start point may already be optimal
  int check_step = 10;
  bool converged = false;
  while (true) {
    if (it >= next_check) {
      const Eigen::VectorXd t = y - w - z;
      const double obj = objective_at(t, z);
      const double gap = duality_gap(obj);
      if (gap <= tol * (1.0 + std::abs(obj))) {
        const double cert = certificate_impl(
            problem, x.cwiseQuotient(col_scale), z, &s, 120);
        if (cert <= tol) {
          sol.certificate_gap = cert;
          sol.objective = obj;
          converged = true;
          break;
        }
        // Not yet a valid certificate; back off before re-checking.
        check_step = std::min(check_step * 2, 400);
      }
      next_check = it + check_step;
      if (it >= 100 && check_step < 100) check_step = 100;
    }
    if (it >= max_iter) break;
    ++it;

    // Dual ascent on the clipped l1 conjugate, primal descent with the
    // closed-form z prox, extrapolation on the primal block.
    const Eigen::VectorXd t_bar = y - (2.0 * w - w_prev) - (2.0 * z - z_prev);
    Eigen::VectorXd s_next =
        (s + sig * t_bar).cwiseMax(-1.0).cwiseMin(1.0);
    Eigen::VectorXd g_next = h.transpose() * s_next;
    Eigen::VectorXd x_next = x + tau * g_next;
    Eigen::VectorXd w_next = h * x_next;
    Eigen::VectorXd z_arg = z + tau * s_next;
    Eigen::VectorXd z_next;
    if (problem.mode == Mode::lagrangian) {
      const double zn = z_arg.norm();
      const double shrink = tau * problem.lambda;
      z_next = zn <= shrink ? Eigen::VectorXd::Zero(n).eval()
                            : ((1.0 - shrink / zn) * z_arg).eval();
    } else {
      const double zn = z_arg.norm();
      z_next = zn <= problem.epsilon
                   ? z_arg
                   : (problem.epsilon / zn) * z_arg;
    }

    const double pres =
        std::sqrt(((x - x_next) / tau + (g - g_next)).squaredNorm() +
                  ((z - z_next) / tau + (s - s_next)).squaredNorm());
    const double dres =
        ((s - s_next) / sig + (w - w_next) + (z - z_next)).norm();
    sol.primal_residual = pres / (1.0 + x_next.norm() + z_next.norm());
    sol.dual_residual = dres / (1.0 + s_next.norm());

    w_prev = w;
    z_prev = z;
    x = x_next;
    z = z_next;
    s = s_next;
    w = w_next;
    g = g_next;
  }

  sol.x_hat = x.cwiseQuotient(col_scale);
  sol.z_hat = z;
  sol.dual = s;
  sol.iterations = it;
  sol.converged = converged;
  if (!converged) {
    const Eigen::VectorXd t = y - w - z;
    sol.objective = objective_at(t, z);
    sol.certificate_gap =
        certificate_impl(problem, sol.x_hat, z, &s, 120);
  }
  return sol;
}

double kkt_certificate(const DecodeProblem& problem,
                       const DecodeSolution& solution) {
  if (solution.x_hat.size() != problem.h.cols() ||
      solution.z_hat.size() != problem.h.rows())
    throw std::invalid_argument("kkt_certificate: dimension mismatch");
  // The solution's dual vector, when present, seeds the free coordinates
  // of the residual subgradient; the verified conditions themselves do not
  // depend on where the candidate came from.
  const Eigen::VectorXd* hint =
      solution.dual.size() == problem.h.rows() ? &solution.dual : nullptr;
  return certificate_impl(problem, solution.x_hat, solution.z_hat, hint,
                          2000);
}

double min_singular_value(const Eigen::MatrixXd& h) {
  if (h.size() == 0 || h.norm() == 0.0)
    throw std::invalid_argument("min_singular_value: matrix must be nonzero");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(h);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1);
}

double theorem1_bound(double sigma_min, double alpha, double c,
                      double epsilon) {
  if (!(c > 1.0)) throw std::invalid_argument("theorem1_bound: need C > 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("theorem1_bound: need alpha in (0,1]");
  if (!(sigma_min > 0.0))
    throw std::invalid_argument("theorem1_bound: need sigma_min > 0");
  if (epsilon < 0.0)
    throw std::invalid_argument("theorem1_bound: need epsilon >= 0");
  return 2.0 * (c + 1.0) * epsilon / (sigma_min * alpha * (c - 1.0));
}

void write_problem(std::ostream& out, const DecodeProblem& problem) {
  const auto n = problem.h.rows();
  const auto m = problem.h.cols();
  out << "# " << n << ',' << m << ','
      << (problem.mode == Mode::constrained ? "constrained" : "lagrangian")
      << ',' << text::format_double(problem.param()) << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j) out << ',';
      out << text::format_double(problem.h(i, j));
    }
    out << '\n';
  }
  for (Eigen::Index i = 0; i < n; ++i)
    out << text::format_double(problem.y[i]) << '\n';
}

DecodeProblem read_problem(std::istream& in) {
  std::string line;
  int lineno = 0;
  ProblemCsvHeader header;
  bool have_header = false;
  DecodeProblem p;
  Eigen::Index h_row = 0, y_row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = text::trim(line);
    if (sv.empty()) continue;
    if (!have_header) {
      if (sv.front() != '#')
        throw ParseError(lineno, "expected '# n,m,mode,param' header");
      sv.remove_prefix(1);
      auto fields = text::split(text::trim(sv), ',');
      if (fields.size() != 4)
        throw ParseError(lineno, "header must have 4 fields");
      if (!text::parse_int(text::trim(fields[0]), header.n) ||
          !text::parse_int(text::trim(fields[1]), header.m))
        throw ParseError(lineno, "bad n or m in header");
      const std::string_view mode = text::trim(fields[2]);
      if (mode == "constrained")
        header.mode = Mode::constrained;
      else if (mode == "lagrangian")
        header.mode = Mode::lagrangian;
      else
        throw ParseError(lineno, "mode must be constrained or lagrangian");
      if (!text::parse_double(text::trim(fields[3]), header.param))
        throw ParseError(lineno, "bad param in header");
      if (header.n <= 0 || header.m <= 0)
        throw ParseError(lineno, "n and m must be positive");
      p.h.resize(header.n, header.m);
      p.y.resize(header.n);
      p.mode = header.mode;
      if (header.mode == Mode::constrained)
        p.epsilon = header.param;
      else
        p.lambda = header.param;
      have_header = true;
      continue;
    }
    if (sv.front() == '#') continue;
    if (h_row < header.n) {
      auto fields = text::split(sv, ',');
      if (static_cast<int>(fields.size()) != header.m)
        throw ParseError(lineno, "expected " + std::to_string(header.m) +
                                     " values in H row");
      for (int j = 0; j < header.m; ++j) {
        double v;
        if (!text::parse_double(text::trim(fields[j]), v))
          throw ParseError(lineno, "bad number in H row");
        p.h(h_row, j) = v;
      }
      ++h_row;
      continue;
    }
    if (y_row < header.n) {
      double v;
      if (!text::parse_double(sv, v))
        throw ParseError(lineno, "bad number in y row");
      p.y[y_row++] = v;
      continue;
    }
    throw ParseError(lineno, "unexpected trailing content");
  }
  if (!have_header) throw ParseError(lineno, "missing header");
  if (h_row != header.n || y_row != header.n)
    throw ParseError(lineno, "truncated problem: expected " +
                                 std::to_string(2 * header.n) + " data rows");
  return p;
}

void write_solution(std::ostream& out, const DecodeSolution& solution) {
  out << "index,x_hat\n";
  for (Eigen::Index i = 0; i < solution.x_hat.size(); ++i)
    out << i << ',' << text::format_double(solution.x_hat[i]) << '\n';
  out << "index,z_hat\n";
  for (Eigen::Index i = 0; i < solution.z_hat.size(); ++i)
    out << i << ',' << text::format_double(solution.z_hat[i]) << '\n';
}

}  // namespace rse::decoder
