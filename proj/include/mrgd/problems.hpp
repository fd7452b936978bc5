#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mrgd/optim.hpp"
#include "mrgd/spectrum.hpp"

namespace mrgd {

enum class GroupSampler { gaussian, uniform };
enum class TargetKind { linear_regression, gaussian_label, classification };

GroupSampler sampler_from_name(const std::string& name);
TargetKind target_from_name(const std::string& name);
std::string sampler_name(GroupSampler s);
std::string target_name(TargetKind t);

// Synthetic multiscale distribution: feature column group k is scaled by
// scales[k], with scales = (1, eps_1, ..., eps_m) strictly decreasing. The
// scales are data-space standard deviations; covariance eigenvalues go as
// their squares.
struct MultiscaleDataSpec {
  std::vector<std::size_t> group_dims;  // d_0..d_m
  std::vector<double> scales;           // (1, eps_1, ..., eps_m)
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
  bool power_cascade = false;  // scales follow eps^k
  GroupSampler sampler = GroupSampler::gaussian;
  std::size_t class_count = 2;  // classification targets
  bool one_hot = false;         // argmax teacher labels instead of soft

  // scales = (1, eps, eps^2, ..., eps^m).
  static MultiscaleDataSpec make_power_cascade(std::vector<std::size_t> dims, double eps,
                                               std::size_t sample_count, std::uint64_t seed);

  std::size_t dimension() const;
  void validate() const;

  nlohmann::json to_json() const;
  static MultiscaleDataSpec from_json(const nlohmann::json& j);
};

struct Alignment {
  Eigen::MatrixXd u;     // orthonormal d x d
  Eigen::VectorXd mean;  // column means removed before rotation
};

struct Dataset {
  Eigen::MatrixXd features;  // N x d
  Eigen::MatrixXd targets;   // N x 1 regression, N x c class-probability rows
  bool classification = false;
  std::optional<Alignment> alignment;
  bool rank_deficient_warning = false;  // N < d at generation time
  std::optional<MultiscaleDataSpec> spec;

  Eigen::Index sample_count() const { return features.rows(); }
  Eigen::Index dimension() const { return features.cols(); }

  void validate() const;

  // CSV with header x0..x{d-1},y0..y{c-1} plus a JSON sidecar
  // {spec, seed, alignment}.
  void write_csv(const std::string& csv_path, const std::string& sidecar_path) const;
  static Dataset read_csv(const std::string& csv_path, const std::string& sidecar_path);
};

Dataset generate_multiscale_dataset(const MultiscaleDataSpec& spec, TargetKind target);

// Center, rotate onto the principal axes (via SVD), and record (U, mean) so
// that original = aligned * U^T + mean.
Dataset pca_align(const Dataset& dataset);

// A = (1/N) sum x_i x_i^T, g = (2/N) sum g_i x_i (the source convention,
// factor placement included); optimum solved on construction.
QuadraticProblem least_squares_quadratic(const Dataset& dataset);

// Non-quadratic loss L(theta) = 0.5 theta^T A theta - g^T theta
//                              + sum_i f_i(Pi_i theta)
// with block-diagonal Hessian in the Pi basis (cross-spectrum delta = 0
// exactly) and per-group Hessian bounds equal to the template spectrum.
struct ConvexProblem {
  std::function<double(const Eigen::VectorXd&)> loss;
  GradientOracle gradient;
  std::vector<Eigen::MatrixXd> projections;             // Pi_i, d_i x d
  std::vector<std::pair<double, double>> group_bounds;  // (sigma_bot, sigma_top)
  double delta = 0.0;
  Eigen::VectorXd optimum;
  Eigen::Index dimension() const { return optimum.size(); }
};

ConvexProblem build_separable_convex(const SpectrumGroups& spectrum_template,
                                     std::uint64_t seed);

struct LogisticValue {
  double loss = 0.0;
  Eigen::MatrixXd grad_w;  // c x d
  Eigen::VectorXd grad_b;  // c
};

// Cross-entropy loss and its descent gradient (f - g averaged against x) for
// softmax regression, computed with max-subtraction.
LogisticValue logistic_loss_grad(const Dataset& dataset, const Eigen::MatrixXd& w,
                                 const Eigen::VectorXd& b);

}  // namespace mrgd
