#include "mrgd/optim.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "mrgd/errors.hpp"
#include "mrgd/spectrum.hpp"

namespace mrgd {

namespace {

constexpr double kDivergenceFactor = 1e12;

double error_or_nan(const Eigen::VectorXd& theta, const Eigen::VectorXd* optimum) {
  if (optimum == nullptr) return std::numeric_limits<double>::quiet_NaN();
  return (theta - *optimum).norm();
}

void check_divergence(const Eigen::VectorXd& theta, double guard, long step) {
  const double norm = theta.norm();
  if (!std::isfinite(norm) || norm > guard) {
    std::ostringstream msg;
    msg << "iterate diverged at step " << step << " (||theta|| = " << norm << ")";
    throw DivergenceError(step, msg.str());
  }
}

void check_finite(const Eigen::VectorXd& theta, long step) {
  if (!theta.allFinite()) {
    std::ostringstream msg;
    msg << "iterate overflowed at step " << step;
    throw DivergenceError(step, msg.str());
  }
}

std::pair<double, double> spectrum_extremes(const QuadraticProblem& problem,
                                            const BaselineParams& params) {
  if (params.sigma_min && params.sigma_max) return {*params.sigma_min, *params.sigma_max};
  const Eigendecomposition eig = eigendecompose_symmetric(problem.a);
  return {eig.eigenvalues[eig.eigenvalues.size() - 1], eig.eigenvalues[0]};
}

}  // namespace

QuadraticProblem::QuadraticProblem(Eigen::MatrixXd a_in, Eigen::VectorXd g_in)
    : a(std::move(a_in)), g(std::move(g_in)) {
  if (a.rows() != a.cols() || a.rows() != g.size())
    throw ValidationError("QuadraticProblem: A must be square and match g");
  const double asym = (a - a.transpose()).norm();
  if (asym > 1e-10 * std::max(a.norm(), 1e-300))
    throw ValidationError("QuadraticProblem: A must be symmetric");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw RankDeficiencyError("QuadraticProblem: A is not positive definite");
  optimum = ldlt.solve(g);
  if ((a * optimum - g).norm() > 1e-8 * std::max(g.norm(), 1e-300))
    throw RankDeficiencyError("QuadraticProblem: optimum solve did not reach 1e-8 relative");
}

GradientOracle QuadraticProblem::gradient() const {
  const Eigen::MatrixXd a_copy = a;
  const Eigen::VectorXd g_copy = g;
  return [a_copy, g_copy](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    return a_copy * theta - g_copy;
  };
}

void TrajectoryRecord::write_csv(std::ostream& os) const {
  os << "step,outer,scale,inner,residual,error,grad_evals\n";
  char buf[64];
  for (const TrajectoryPoint& p : points) {
    os << p.step << ',' << p.outer << ',' << p.scale << ',' << p.inner << ',';
    std::snprintf(buf, sizeof buf, "%.17g", p.residual);
    os << buf << ',';
    if (std::isnan(p.error)) {
      os << "";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", p.error);
      os << buf;
    }
    os << ',' << p.grad_evals << '\n';
  }
}

long TrajectoryRecord::grad_evals_to(double tol) const {
  for (const TrajectoryPoint& p : points)
    if (p.residual <= tol) return p.grad_evals;
  return -1;
}

std::vector<double> TrajectoryRecord::cycle_errors() const {
  std::vector<double> out;
  if (!points.empty() && has_error) {
    out.push_back(points.front().error);  // state before the first update
    for (const TrajectoryPoint& p : points)
      if (p.scale == 0 && p.step > 0) out.push_back(p.error);
  }
  return out;
}

SolveResult mrgd(const GradientOracle& grad, const Schedule& schedule,
                 const Eigen::VectorXd& theta0, long outer_cycles, double tol,
                 const Eigen::VectorXd* optimum) {
  const std::size_t m = schedule.group_count();
  if (m == 0 || schedule.counts.size() != m)
    throw ValidationError("mrgd: schedule must carry matching etas and counts");
  for (long n : schedule.counts)
    if (n < 1) throw ValidationError("mrgd: inner counts must be positive");
  if (outer_cycles < 1) throw ValidationError("mrgd: outer cycle count must be positive");
  if (!theta0.allFinite()) throw ValidationError("mrgd: theta0 must be finite");

  const double guard = kDivergenceFactor * std::max(1.0, theta0.norm());

  SolveResult result;
  result.theta = theta0;
  result.trajectory.has_error = optimum != nullptr;

  long step = 0;
  long evals = 0;
  for (long k = 1; k <= outer_cycles; ++k) {
    for (std::size_t idx = m; idx >= 1; --idx) {
      const double eta_i = schedule.etas[idx - 1];
      const long n_i = schedule.counts[idx - 1];
      for (long l = 1; l <= n_i; ++l) {
        const Eigen::VectorXd gradient = grad(result.theta);
        ++evals;
        result.trajectory.points.push_back({step + 1, k, static_cast<int>(idx), l,
                                            gradient.norm(), error_or_nan(result.theta, optimum),
                                            evals});
        result.theta -= eta_i * gradient;
        ++step;
        // Mid-cycle only overflow counts as divergence: the sweep passes
        // through large transient growth on the fast scales by design.
        check_finite(result.theta, step);
      }
    }
    // Cycle boundary: the contraction guarantee is per full cycle, so the
    // norm guard applies here; early exit is only legal here too.
    check_divergence(result.theta, guard, step);
    const Eigen::VectorXd boundary_grad = grad(result.theta);
    ++evals;
    const double boundary_residual = boundary_grad.norm();
    result.trajectory.points.push_back(
        {step, k, 0, 0, boundary_residual, error_or_nan(result.theta, optimum), evals});
    if (tol > 0.0 && boundary_residual <= tol) {
      result.converged = true;
      break;
    }
  }
  result.grad_evals = evals;
  if (tol <= 0.0) result.converged = true;
  return result;
}

namespace {

SolveResult run_gd(const QuadraticProblem& problem, double eta, long max_steps, double tol) {
  SolveResult result;
  result.theta = Eigen::VectorXd::Zero(problem.dimension());
  result.trajectory.has_error = true;
  const double guard = kDivergenceFactor * std::max(1.0, problem.optimum.norm());
  long evals = 0;
  for (long k = 1; k <= max_steps; ++k) {
    const Eigen::VectorXd gradient = problem.a * result.theta - problem.g;
    ++evals;
    const double res = gradient.norm();
    result.trajectory.points.push_back(
        {k, k, 0, 0, res, (result.theta - problem.optimum).norm(), evals});
    if (res <= tol) {
      result.converged = true;
      break;
    }
    result.theta -= eta * gradient;
    check_divergence(result.theta, guard, k);
  }
  result.grad_evals = evals;
  return result;
}

SolveResult run_heavy_ball(const QuadraticProblem& problem, double mu, double lmax,
                           long max_steps, double tol) {
  const double sq_l = std::sqrt(lmax), sq_mu = std::sqrt(mu);
  const double alpha = 4.0 / ((sq_l + sq_mu) * (sq_l + sq_mu));
  const double beta_m = ((sq_l - sq_mu) / (sq_l + sq_mu)) * ((sq_l - sq_mu) / (sq_l + sq_mu));

  SolveResult result;
  result.theta = Eigen::VectorXd::Zero(problem.dimension());
  result.trajectory.has_error = true;
  Eigen::VectorXd prev = result.theta;
  const double guard = kDivergenceFactor * std::max(1.0, problem.optimum.norm());
  long evals = 0;
  for (long k = 1; k <= max_steps; ++k) {
    const Eigen::VectorXd gradient = problem.a * result.theta - problem.g;
    ++evals;
    const double res = gradient.norm();
    result.trajectory.points.push_back(
        {k, k, 0, 0, res, (result.theta - problem.optimum).norm(), evals});
    if (res <= tol) {
      result.converged = true;
      break;
    }
    const Eigen::VectorXd next = result.theta - alpha * gradient + beta_m * (result.theta - prev);
    prev = result.theta;
    result.theta = next;
    check_divergence(result.theta, guard, k);
  }
  result.grad_evals = evals;
  return result;
}

SolveResult run_nesterov(const QuadraticProblem& problem, double mu, double lmax,
                         long max_steps, double tol) {
  const double sq_l = std::sqrt(lmax), sq_mu = std::sqrt(mu);
  const double momentum = (sq_l - sq_mu) / (sq_l + sq_mu);
  const double alpha = 1.0 / lmax;

  SolveResult result;
  result.theta = Eigen::VectorXd::Zero(problem.dimension());
  result.trajectory.has_error = true;
  Eigen::VectorXd prev = result.theta;
  const double guard = kDivergenceFactor * std::max(1.0, problem.optimum.norm());
  long evals = 0;
  for (long k = 1; k <= max_steps; ++k) {
    const Eigen::VectorXd y = result.theta + momentum * (result.theta - prev);
    const Eigen::VectorXd gradient = problem.a * y - problem.g;
    const double res = (problem.a * result.theta - problem.g).norm();
    evals += 2;  // gradient at y plus the residual monitor
    result.trajectory.points.push_back(
        {k, k, 0, 0, res, (result.theta - problem.optimum).norm(), evals});
    if (res <= tol) {
      result.converged = true;
      break;
    }
    prev = result.theta;
    result.theta = y - alpha * gradient;
    check_divergence(result.theta, guard, k);
  }
  result.grad_evals = evals;
  return result;
}

// Standard Chebyshev semi-iteration on [mu, lmax]:
//   alpha_1 = 1/d, alpha_k = 1/(d - c^2 alpha_{k-1}/4), beta_k = (c alpha_{k-1}/2)^2
// with d = (lmax+mu)/2, c = (lmax-mu)/2.
SolveResult run_chebyshev(const QuadraticProblem& problem, double mu, double lmax,
                          long max_steps, double tol) {
  const double d = 0.5 * (lmax + mu);
  const double c = 0.5 * (lmax - mu);

  SolveResult result;
  result.theta = Eigen::VectorXd::Zero(problem.dimension());
  result.trajectory.has_error = true;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(problem.dimension());
  const double guard = kDivergenceFactor * std::max(1.0, problem.optimum.norm());
  double alpha = 0.0;
  long evals = 0;
  for (long k = 1; k <= max_steps; ++k) {
    const Eigen::VectorXd r = problem.g - problem.a * result.theta;
    ++evals;
    const double res = r.norm();
    result.trajectory.points.push_back(
        {k, k, 0, 0, res, (result.theta - problem.optimum).norm(), evals});
    if (res <= tol) {
      result.converged = true;
      break;
    }
    if (k == 1) {
      p = r;
      alpha = 1.0 / d;
    } else {
      const double beta = (c * alpha / 2.0) * (c * alpha / 2.0);
      alpha = 1.0 / (d - beta / alpha);
      p = r + beta * p;
    }
    result.theta += alpha * p;
    check_divergence(result.theta, guard, k);
  }
  result.grad_evals = evals;
  return result;
}

SolveResult run_cg(const QuadraticProblem& problem, long max_steps, double tol) {
  SolveResult result;
  result.theta = Eigen::VectorXd::Zero(problem.dimension());
  result.trajectory.has_error = true;
  Eigen::VectorXd r = problem.g - problem.a * result.theta;
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  long evals = 1;
  for (long k = 1; k <= max_steps; ++k) {
    const double res = std::sqrt(rs);
    result.trajectory.points.push_back(
        {k, k, 0, 0, res, (result.theta - problem.optimum).norm(), evals});
    if (res <= tol) {
      result.converged = true;
      break;
    }
    const Eigen::VectorXd ap = problem.a * p;
    ++evals;
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0))
      throw NumericalBreakdownError("cg: encountered a zero-curvature direction");
    const double alpha = rs / curvature;
    result.theta += alpha * p;
    r -= alpha * ap;
    const double rs_next = r.squaredNorm();
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  result.grad_evals = evals;
  return result;
}

}  // namespace

BaselineMethod baseline_method_from_name(const std::string& name) {
  if (name == "gd") return BaselineMethod::gd;
  if (name == "heavy_ball") return BaselineMethod::heavy_ball;
  if (name == "nesterov") return BaselineMethod::nesterov;
  if (name == "chebyshev") return BaselineMethod::chebyshev;
  if (name == "cg") return BaselineMethod::cg;
  throw ValidationError("unknown baseline method: " + name);
}

std::string baseline_method_name(BaselineMethod method) {
  switch (method) {
    case BaselineMethod::gd: return "gd";
    case BaselineMethod::heavy_ball: return "heavy_ball";
    case BaselineMethod::nesterov: return "nesterov";
    case BaselineMethod::chebyshev: return "chebyshev";
    case BaselineMethod::cg: return "cg";
  }
  throw ValidationError("unknown baseline method enum");
}

SolveResult baseline_solve(BaselineMethod method, const QuadraticProblem& problem,
                           const BaselineParams& params, long max_steps, double tol) {
  if (max_steps < 1) throw ValidationError("baseline_solve: max_steps must be positive");
  switch (method) {
    case BaselineMethod::gd: {
      auto [mu, lmax] = spectrum_extremes(problem, params);
      double eta = params.eta.value_or(1.0 / lmax);
      if (!params.allow_unstable_eta && eta > 1.0 / lmax) {
        std::ostringstream msg;
        msg << "gd: eta " << eta << " exceeds 1/sigma_max = " << 1.0 / lmax
            << " (set allow_unstable_eta to override)";
        throw ValidationError(msg.str());
      }
      return run_gd(problem, eta, max_steps, tol);
    }
    case BaselineMethod::heavy_ball: {
      auto [mu, lmax] = spectrum_extremes(problem, params);
      return run_heavy_ball(problem, mu, lmax, max_steps, tol);
    }
    case BaselineMethod::nesterov: {
      auto [mu, lmax] = spectrum_extremes(problem, params);
      return run_nesterov(problem, mu, lmax, max_steps, tol);
    }
    case BaselineMethod::chebyshev: {
      auto [mu, lmax] = spectrum_extremes(problem, params);
      return run_chebyshev(problem, mu, lmax, max_steps, tol);
    }
    case BaselineMethod::cg:
      return run_cg(problem, max_steps, tol);
  }
  throw ValidationError("baseline_solve: unknown method");
}

double error_operator_norm(const std::vector<double>& eigenvalues, const Schedule& schedule) {
  if (eigenvalues.empty()) throw ValidationError("error_operator_norm: empty spectrum");
  for (double lambda : eigenvalues)
    if (!(lambda > 0.0))
      throw ValidationError("error_operator_norm: eigenvalues must be positive");
  if (schedule.etas.size() != schedule.counts.size())
    throw ValidationError("error_operator_norm: malformed schedule");

  double best = 0.0;
  for (double lambda : eigenvalues) {
    double log_value = 0.0;
    bool exact_zero = false;
    for (std::size_t j = 0; j < schedule.etas.size(); ++j) {
      const double factor = std::abs(1.0 - schedule.etas[j] * lambda);
      if (factor == 0.0) {
        exact_zero = true;
        break;
      }
      log_value += static_cast<double>(schedule.counts[j]) * std::log(factor);
    }
    const double value = exact_zero ? 0.0 : std::exp(log_value);
    best = std::max(best, value);
  }
  return best;
}

}  // namespace mrgd
