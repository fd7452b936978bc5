#pragma once

#include <cstdint>
#include <vector>

#include "mrgd/landscape.hpp"

namespace mrgd {

// Gradient-scaling sweep on two-scale data: logistic column-group norms,
// first-MLP-layer column-group norms (both expected to scale linearly in
// eps), and the second-layer contrast (no eps trend).
struct ScalingProbeConfig {
  std::vector<std::size_t> group_dims = {6, 6};  // two groups
  std::vector<double> eps_values = {1e-1, 1e-2, 1e-3, 1e-4};
  std::size_t sample_count = 400;
  std::vector<Eigen::Index> widths = {8, 6};
  Activation activation = Activation::tanh;
  std::size_t class_count = 3;
  std::uint64_t seed = 11;
};

struct ScalingProbeResult {
  SlopeFit logistic_small_group;         // Prop-1 scaling
  SlopeFit mlp_small_group;              // Prop-2 scaling
  std::vector<SlopeFit> second_layer;    // per column-half of dL/dW^2
  double second_layer_max_abs_slope = 0.0;
};

ScalingProbeResult run_scaling_probe(const ScalingProbeConfig& cfg);

// Theorem-1 expansion-order sweep on a power-cascade family.
struct ExpansionProbeConfig {
  std::vector<std::size_t> group_dims = {6, 6};
  std::vector<double> eps_values = {1e-1, 3.1622776601683794e-2, 1e-2,
                                    3.1622776601683794e-3};
  std::size_t sample_count = 400;
  std::vector<Eigen::Index> widths = {8, 6};
  Activation activation = Activation::tanh;
  std::uint64_t seed = 11;
};

struct ExpansionProbeResult {
  SlopeFit layer1;
  SlopeFit layer2;
};

ExpansionProbeResult run_expansion_probe(const ExpansionProbeConfig& cfg);

// Row-Hessian identity and Fig-2-style spectrum tracking.
struct HessianProbeConfig {
  std::vector<std::size_t> group_dims = {5, 5};
  double data_scale = 0.05;  // second-group standard deviation
  std::size_t sample_count = 200;
  std::vector<Eigen::Index> widths = {6, 4};
  Activation activation = Activation::tanh;
  Eigen::Index row = 0;
  std::uint64_t seed = 7;
};

struct HessianProbeResult {
  double rel_frobenius_error = 0.0;  // formula vs finite-difference modes
  double pearson_log = 0.0;          // log-eigenvalue profile vs covariance
  double spearman = 0.0;             // rank correlation of the same pairing
};

HessianProbeResult run_hessian_probe(const HessianProbeConfig& cfg);

// Randomized layer-decomposition bound check.
struct LemmaProbeResult {
  int trials = 0;
  int violations = 0;
  double max_ratio = 0.0;  // max lhs/rhs over trials with rhs > 0
};

LemmaProbeResult run_lemma_probe(int trials, std::uint64_t seed);

double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys);
double spearman_correlation(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace mrgd
