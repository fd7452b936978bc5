#include "mrgd/spectrum.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mrgd/errors.hpp"

namespace mrgd {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kZeroEigenvalueTol = 1e-12;

void require_positive_sorted(const std::vector<double>& eigenvalues) {
  if (eigenvalues.empty()) throw ValidationError("spectrum: empty eigenvalue list");
  for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
    if (!(eigenvalues[k] > 0.0))
      throw ValidationError("spectrum: eigenvalues must be strictly positive");
    if (k > 0 && eigenvalues[k] > eigenvalues[k - 1])
      throw ValidationError("spectrum: eigenvalues must be non-increasing");
  }
}

SpectrumGroups assemble(const std::vector<double>& eigenvalues,
                        const std::vector<std::size_t>& sizes) {
  SpectrumGroups out;
  out.eigenvalues = eigenvalues;
  out.group_sizes = sizes;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double top = eigenvalues[offset];
    const double bot = eigenvalues[offset + sizes[i] - 1];
    out.sigma_top.push_back(top);
    out.sigma_bot.push_back(bot);
    out.kappa.push_back(top / bot);
    offset += sizes[i];
  }
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    out.decay.push_back(out.sigma_top[i + 1] / out.sigma_top[i]);
  return out;
}

}  // namespace

double SpectrumGroups::global_condition_number() const {
  return sigma_top.front() / sigma_bot.back();
}

nlohmann::json SpectrumGroups::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t i = 0; i < group_count(); ++i) {
    groups.push_back({{"size", group_sizes[i]},
                      {"sigma_top", sigma_top[i]},
                      {"sigma_bot", sigma_bot[i]},
                      {"kappa", kappa[i]}});
  }
  return {{"eigenvalues", eigenvalues}, {"groups", groups}, {"decay", decay}};
}

Eigendecomposition eigendecompose_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw ValidationError("eigendecompose_symmetric: matrix must be square");
  const double scale = a.norm();
  const double asym = (a - a.transpose()).norm();
  if (asym > kSymmetryTol * std::max(scale, 1e-300))
    throw ValidationError("eigendecompose_symmetric: matrix is not symmetric within 1e-10 relative");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw ValidationError("eigendecompose_symmetric: eigensolver failed to converge");

  // Eigen returns ascending order; flip to non-increasing.
  const Eigen::Index d = a.rows();
  Eigendecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.basis = solver.eigenvectors().rowwise().reverse();

  const double top = out.eigenvalues[0];
  const double bottom = out.eigenvalues[d - 1];
  if (!(bottom > kZeroEigenvalueTol * std::max(top, 0.0))) {
    std::ostringstream msg;
    msg << "eigendecompose_symmetric: matrix is not positive definite (min eigenvalue "
        << bottom << ")";
    throw IndefiniteMatrixError(msg.str());
  }
  return out;
}

SpectrumGroups detect_groups(const std::vector<double>& eigenvalues, double gap_threshold) {
  if (!(gap_threshold > 0.0 && gap_threshold < 1.0))
    throw ValidationError("detect_groups: gap_threshold must lie in (0,1)");
  require_positive_sorted(eigenvalues);

  std::vector<std::size_t> sizes;
  std::size_t current = 1;
  for (std::size_t k = 0; k + 1 < eigenvalues.size(); ++k) {
    if (eigenvalues[k + 1] / eigenvalues[k] < gap_threshold) {
      sizes.push_back(current);
      current = 1;
    } else {
      ++current;
    }
  }
  sizes.push_back(current);
  return assemble(eigenvalues, sizes);
}

SpectrumGroups groups_from_sizes(const std::vector<double>& eigenvalues,
                                 const std::vector<std::size_t>& group_sizes) {
  require_positive_sorted(eigenvalues);
  if (group_sizes.empty())
    throw ValidationError("groups_from_sizes: no groups declared");
  std::size_t total = 0;
  for (std::size_t s : group_sizes) {
    if (s == 0) throw ValidationError("groups_from_sizes: group sizes must be positive");
    total += s;
  }
  if (total != eigenvalues.size())
    throw ValidationError("groups_from_sizes: group sizes must sum to the dimension");

  std::size_t offset = 0;
  for (std::size_t i = 0; i + 1 < group_sizes.size(); ++i) {
    offset += group_sizes[i];
    const double bot = eigenvalues[offset - 1];   // sigma_{i,d_i}
    const double next_top = eigenvalues[offset];  // sigma_{i+1,1}
    if (!(bot > next_top)) {
      std::ostringstream msg;
      msg << "groups_from_sizes: no spectral gap at declared boundary after group " << (i + 1)
          << " (sigma_bot=" << bot << " <= next sigma_top=" << next_top << ")";
      throw InvalidGroupingError(msg.str());
    }
  }
  return assemble(eigenvalues, group_sizes);
}

std::vector<double> covariance_spectrum(const Eigen::MatrixXd& x) {
  if (x.rows() == 0 || x.cols() == 0)
    throw ValidationError("covariance_spectrum: empty data matrix");
  const double n = static_cast<double>(x.rows());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
  const Eigen::VectorXd& s = svd.singularValues();
  std::vector<double> out(static_cast<std::size_t>(x.cols()), 0.0);
  for (Eigen::Index k = 0; k < s.size(); ++k) out[static_cast<std::size_t>(k)] = s[k] * s[k] / n;
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

}  // namespace mrgd
