#pragma once

#include <Eigen/Core>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mrgd/schedule.hpp"

namespace mrgd {

using GradientOracle = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// min 0.5 theta^T A theta - g^T theta with A symmetric positive definite.
// The optimum (A theta* = g) is solved on construction.
struct QuadraticProblem {
  Eigen::MatrixXd a;
  Eigen::VectorXd g;
  Eigen::VectorXd optimum;

  QuadraticProblem(Eigen::MatrixXd a_in, Eigen::VectorXd g_in);

  Eigen::Index dimension() const { return a.rows(); }
  GradientOracle gradient() const;
  double residual(const Eigen::VectorXd& theta) const { return (a * theta - g).norm(); }
};

// One recorded step of a solver run. Inner rows carry the residual at the
// pre-update point; rows with scale == 0 are outer-cycle boundaries (the
// state after cycle `outer` completed). error is NaN when theta* is unknown.
struct TrajectoryPoint {
  long step = 0;
  long outer = 0;
  int scale = 0;
  long inner = 0;
  double residual = 0.0;
  double error = 0.0;
  long grad_evals = 0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryPoint> points;
  bool has_error = false;

  // CSV with header step,outer,scale,inner,residual,error,grad_evals.
  void write_csv(std::ostream& os) const;

  // Gradient evaluations spent when the residual first reached tol; -1 if never.
  long grad_evals_to(double tol) const;

  // ||theta^k - theta*|| at each outer-cycle boundary (boundary rows only),
  // prefixed with the initial error.
  std::vector<double> cycle_errors() const;
};

struct SolveResult {
  Eigen::VectorXd theta;
  TrajectoryRecord trajectory;
  bool converged = false;
  long grad_evals = 0;
};

// Algorithm-1 multirate descent: K outer cycles, each sweeping the scale
// index i from m down to 1 with counts[i] steps at rate etas[i]. Early exit
// happens only at outer-cycle boundaries (mid-cycle the error can grow
// transiently). Throws DivergenceError when the iterate norm exceeds
// 1e12 x max(1, ||theta0||) or turns non-finite.
SolveResult mrgd(const GradientOracle& grad, const Schedule& schedule,
                 const Eigen::VectorXd& theta0, long outer_cycles, double tol,
                 const Eigen::VectorXd* optimum = nullptr);

enum class BaselineMethod { gd, heavy_ball, nesterov, chebyshev, cg };

struct BaselineParams {
  std::optional<double> eta;             // gd step size; default 1/sigma_max
  bool allow_unstable_eta = false;       // lift the eta <= 1/sigma_max gate
  std::optional<double> sigma_min;       // spectrum estimates for momentum/chebyshev
  std::optional<double> sigma_max;
};

BaselineMethod baseline_method_from_name(const std::string& name);
std::string baseline_method_name(BaselineMethod method);

// Textbook iterations of the named method with the same trajectory contract
// as mrgd. Momentum/Chebyshev parameters come from (sigma_min, sigma_max),
// computed from A when not supplied.
SolveResult baseline_solve(BaselineMethod method, const QuadraticProblem& problem,
                           const BaselineParams& params, long max_steps, double tol);

// Exact spectral norm of the cycle error operator S = prod_j (I - eta_j A)^{n_j}:
// max over eigenvalues of |prod_j (1 - eta_j lambda)^{n_j}|, evaluated in log
// space.
double error_operator_norm(const std::vector<double>& eigenvalues, const Schedule& schedule);

}  // namespace mrgd
