#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mrgd {

// Eigenvalues of a symmetric positive-definite operator organized into
// hierarchically clustered groups:
//
//   sigma_{1,1} >= ... >= sigma_{1,d_1} > sigma_{2,1} >= ... > sigma_{m,d_m} > 0
//
// Per group i: sigma_top = sigma_{i,1}, sigma_bot = sigma_{i,d_i},
// kappa_i = sigma_{i,1}/sigma_{i,d_i} (local condition number), and between
// consecutive groups the decay rate r_i = sigma_{i+1,1}/sigma_{i,1} < 1.
struct SpectrumGroups {
  std::vector<double> eigenvalues;       // full spectrum, non-increasing
  std::vector<std::size_t> group_sizes;  // d_1..d_m, sums to dimension
  std::vector<double> sigma_top;         // sigma_{i,1}
  std::vector<double> sigma_bot;         // sigma_{i,d_i}
  std::vector<double> kappa;             // kappa_i >= 1
  std::vector<double> decay;             // r_i in (0,1), size m-1

  std::size_t group_count() const { return group_sizes.size(); }
  std::size_t dimension() const { return eigenvalues.size(); }

  // kappa = sigma_{1,1}/sigma_{m,d_m}; equals kappa_c * r^{1-m} when all
  // kappa_i = kappa_c and r_i = r.
  double global_condition_number() const;

  nlohmann::json to_json() const;
};

struct Eigendecomposition {
  Eigen::VectorXd eigenvalues;  // non-increasing, strictly positive
  Eigen::MatrixXd basis;        // orthonormal columns, A = V diag(l) V^T
};

// Dense symmetric PD eigendecomposition. Rejects matrices that are not
// symmetric within 1e-10 relative, and spectra whose smallest eigenvalue is
// within 1e-12 (relative) of zero or below.
Eigendecomposition eigendecompose_symmetric(const Eigen::MatrixXd& a);

// Partition a non-increasing positive spectrum into groups: a new group
// starts at index k+1 exactly when eigenvalues[k+1]/eigenvalues[k] falls
// below gap_threshold.
SpectrumGroups detect_groups(const std::vector<double>& eigenvalues,
                             double gap_threshold = 0.1);

// Explicit grouping for callers that know the d_i. Errors when a declared
// boundary carries no spectral gap (sigma_{i,d_i} <= sigma_{i+1,1}).
SpectrumGroups groups_from_sizes(const std::vector<double>& eigenvalues,
                                 const std::vector<std::size_t>& group_sizes);

// Non-increasing eigenvalues of X^T X / N computed from the singular values
// of X (never forms X^T X).
std::vector<double> covariance_spectrum(const Eigen::MatrixXd& x);

}  // namespace mrgd
