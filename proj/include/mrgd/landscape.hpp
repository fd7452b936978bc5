#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mrgd/problems.hpp"

namespace mrgd {

enum class Activation { tanh, sigmoid };

Activation activation_from_name(const std::string& name);
double activation_lipschitz(Activation a);  // tanh: 1, sigmoid: 1/4

// Small fully-connected scalar-output network
//   f^0 = x,  f^l = act(W^l f^{l-1} + b^l)  l = 1..L,  f = W^{L+1} f^L.
struct MlpModel {
  std::vector<Eigen::MatrixXd> weights;  // W^1..W^{L+1}, last row-shaped 1 x n_L
  std::vector<Eigen::VectorXd> biases;   // b^1..b^L
  Activation activation = Activation::tanh;

  // Seeded Gaussian weights scaled by 1/sqrt(fan-in); small Gaussian biases.
  static MlpModel random(Eigen::Index input_dim, const std::vector<Eigen::Index>& widths,
                         Activation activation, std::uint64_t seed);

  int depth() const { return static_cast<int>(biases.size()); }  // L
  Eigen::Index input_dim() const { return weights.front().cols(); }

  struct Forward {
    std::vector<Eigen::VectorXd> pre;         // z^1..z^L
    std::vector<Eigen::VectorXd> activations; // a^0 = x, a^1..a^L
    double output = 0.0;
  };
  Forward forward(const Eigen::VectorXd& x) const;
  double predict(const Eigen::VectorXd& x) const { return forward(x).output; }

  // Hidden-layer output f^l(x), l in [1, depth()].
  Eigen::VectorXd layer_output(const Eigen::VectorXd& x, int layer) const;
};

struct MlpGradients {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weight_grads;
  std::vector<Eigen::VectorXd> bias_grads;
};

// Exact reverse-mode gradients of the least-squares loss
// (1/2N) sum (f(x_i) - g_i)^2 over a scalar-target regression dataset.
MlpGradients mlp_loss_and_grads(const MlpModel& model, const Dataset& dataset);

struct GroupNorms {
  Eigen::MatrixXd per_row;    // n_1 x (m+1): column-group norms of each dL/dW^1 row
  Eigen::VectorXd aggregate;  // Frobenius norm of each column-group block
};

GroupNorms first_layer_group_norms(const MlpModel& model, const Dataset& dataset,
                                   const std::vector<std::size_t>& group_dims);

enum class HessianMode { formula, finite_difference };

// Hessian of the loss with respect to row i of W^1: either the weighted
// outer-product formula (1/N) sum s_i(x) x x^T with s_i = c_i^2 +
// (f - g) d2f/dz_i^2, or central differences of the loss gradient.
Eigen::MatrixXd first_layer_row_hessian(const MlpModel& model, const Dataset& dataset,
                                        Eigen::Index row, HessianMode mode);

struct SlopeFit {
  double slope = 0.0;
  bool conclusive = false;
  std::vector<double> eps;
  std::vector<double> norms;
};

// Fit of log ||G(eps) - G(0)||_F against log eps for the layer's loss
// gradient, over a power-cascade family sharing base samples (common random
// numbers); G(0) is evaluated with every k >= 1 column group zeroed.
SlopeFit expansion_order_check(const MlpModel& model, const MultiscaleDataSpec& base_spec,
                               const std::vector<double>& eps_values, int layer);

// Least-squares slope of log(norms) against log(eps); shared by the probe
// commands. Points at or below the noise floor are dropped.
SlopeFit fit_log_slope(const std::vector<double>& eps, const std::vector<double>& norms);

struct PerturbationBound {
  double lhs = 0.0;
  double rhs = 0.0;
};

// Layer-decomposition bound: perturbing the second column group by eps*x1
// moves f^l by at most eps * Lip(act)^l * ||W^1_1 x1|| * prod_{k=2}^l ||W^k||.
PerturbationBound layer_perturbation_bound_check(const MlpModel& model,
                                                 const Eigen::VectorXd& x0,
                                                 const Eigen::VectorXd& x1, double eps,
                                                 int layer);

}  // namespace mrgd
