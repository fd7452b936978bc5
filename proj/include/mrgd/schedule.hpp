#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mrgd/spectrum.hpp"

namespace mrgd {

// Per-group learning rates and inner iteration counts for one outer cycle of
// multirate gradient descent, plus the outer cycle count K. Invariants:
// counts.back() == 1, etas[j] <= 1/sigma_j, and each n_i dominates the
// coupling sum ceil(sum_{j>i} n_j F_{i,j}).
struct Schedule {
  std::vector<double> etas;
  std::vector<long> counts;
  long outer = 1;
  double eta_scalar = 0.0;  // the Assumption-2 constant eta (>1) when used, else 0

  std::size_t group_count() const { return etas.size(); }
  long total_inner() const;

  nlohmann::json to_json() const;
  static Schedule from_json(const nlohmann::json& j);
};

// Theorem-2 coupling factors F_{i,j} (1 <= i < j <= m) and the rate/eigenvalue
// products R_l^j = eta_j * sigma_l. Stored dense; F(i-1,j-1) is meaningful for
// i < j only.
struct CouplingFactors {
  Eigen::MatrixXd f;
  Eigen::MatrixXd r;
};

// eta_i = 1/(eta * sigma_i) with eta > 1, so each eta_i <= 1/sigma_i with
// margin.
std::vector<double> learning_rates(const SpectrumGroups& spectrum, double eta);

// One Theorem-2 coupling factor. Indices are 1-based with 1 <= i < j <= m.
// Throws ScheduleInfeasibleError when the shared denominator is <= 0 and
// DegenerateSpectrumError when |r_i - R^j_{i+1}| vanishes.
double coupling_factor(std::size_t i, std::size_t j, const SpectrumGroups& spectrum,
                       const std::vector<double>& etas);

CouplingFactors coupling_factors(const SpectrumGroups& spectrum,
                                 const std::vector<double>& etas);

// n_m = 1; for i = m-1 .. 1, n_i = max(1, ceil(sum_{j>i} n_j F_{i,j})).
std::vector<long> iteration_counts(const SpectrumGroups& spectrum,
                                   const std::vector<double>& etas);

// learning_rates + iteration_counts in one call.
Schedule synthesize_schedule(const SpectrumGroups& spectrum, double eta, long outer = 1);

// Theorem-2 guarantee: prod_j (1 - eta_j * sigma_{m,d_m})^{n_j}. Factors must
// lie in [0, 1); otherwise BoundInvalidError.
double contraction_bound(const SpectrumGroups& spectrum, const Schedule& schedule);

// The proof's group-wise factors
//   c_i = prod_{j<=i} (1 - R_i^j/kappa_i)^{n_j} * prod_{j>i} |1 - R_i^j|^{n_j},
// computed in log space (the growth terms overflow a double for deep
// hierarchies). c_m equals contraction_bound exactly.
std::vector<double> group_contraction_factors(const SpectrumGroups& spectrum,
                                              const Schedule& schedule);

struct Corollary2Bounds {
  double adjacent;  // upper bound on F_{i,i+1}
  double far;       // upper bound on F_{i,j}, j >= i+2, at the given gap
};

// Closed-form Corollary-2 upper bounds under the equal-kappa/equal-r regime.
// gap = j - (i+1); the far-bound constant C is evaluated from the proof's
// inequality at the given (gap, eta, r) rather than left abstract.
Corollary2Bounds corollary2_upper_bounds(double r, double eta, double kappa_c, int gap);

struct ComplexityEstimates {
  double gd;
  double gd_plus;
  double mrgd;
};

// Iteration-count estimates to reach target_eps: plain gradient descent,
// accelerated first-order methods (sqrt-kappa class), and multirate descent
// with the schedule synthesized at the given eta.
ComplexityEstimates complexity_estimates(const SpectrumGroups& spectrum, double target_eps,
                                         double eta = 2.0);

}  // namespace mrgd
