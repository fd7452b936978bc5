#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "mrgd/errors.hpp"
#include "mrgd/landscape.hpp"
#include "mrgd/probes.hpp"
#include "mrgd/problems.hpp"
#include "mrgd/rng.hpp"

using namespace mrgd;

namespace {

Dataset regression_dataset(const std::vector<std::size_t>& dims, double eps, std::size_t n,
                           std::uint64_t seed) {
  MultiscaleDataSpec spec;
  spec.group_dims = dims;
  spec.scales = {1.0, eps};
  spec.sample_count = n;
  spec.seed = seed;
  return generate_multiscale_dataset(spec, TargetKind::linear_regression);
}

MlpGradients fd_gradients(const MlpModel& model, const Dataset& ds) {
  MlpGradients out;
  const double h = 1e-6;
  MlpModel perturbed = model;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Eigen::MatrixXd g(model.weights[l].rows(), model.weights[l].cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        perturbed.weights[l](i, j) = model.weights[l](i, j) + h;
        const double lp = mlp_loss_and_grads(perturbed, ds).loss;
        perturbed.weights[l](i, j) = model.weights[l](i, j) - h;
        const double lm = mlp_loss_and_grads(perturbed, ds).loss;
        perturbed.weights[l](i, j) = model.weights[l](i, j);
        g(i, j) = (lp - lm) / (2 * h);
      }
    out.weight_grads.push_back(g);
  }
  for (std::size_t l = 0; l < model.biases.size(); ++l) {
    Eigen::VectorXd g(model.biases[l].size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      perturbed.biases[l][i] = model.biases[l][i] + h;
      const double lp = mlp_loss_and_grads(perturbed, ds).loss;
      perturbed.biases[l][i] = model.biases[l][i] - h;
      const double lm = mlp_loss_and_grads(perturbed, ds).loss;
      perturbed.biases[l][i] = model.biases[l][i];
      g[i] = (lp - lm) / (2 * h);
    }
    out.bias_grads.push_back(g);
  }
  return out;
}

}  // namespace

TEST_CASE("all-zero weights with zero targets give zero loss and gradients") {
  Dataset ds = regression_dataset({3, 2}, 0.1, 20, 5);
  ds.targets.setZero();
  MlpModel model = MlpModel::random(5, {4, 3}, Activation::tanh, 9);
  for (auto& w : model.weights) w.setZero();
  for (auto& b : model.biases) b.setZero();
  const MlpGradients g = mlp_loss_and_grads(model, ds);
  CHECK(g.loss == 0.0);
  for (const auto& w : g.weight_grads) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : g.bias_grads) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backprop matches finite differences entrywise") {
  // Single data point, widths (4, 3), seed 7.
  Dataset ds = regression_dataset({2, 2}, 0.1, 1, 7);
  for (Activation act : {Activation::tanh, Activation::sigmoid}) {
    const MlpModel model = MlpModel::random(4, {4, 3}, act, 7);
    const MlpGradients exact = mlp_loss_and_grads(model, ds);
    const MlpGradients fd = fd_gradients(model, ds);
    for (std::size_t l = 0; l < exact.weight_grads.size(); ++l) {
      const double scale = std::max(1e-8, fd.weight_grads[l].norm());
      CHECK((exact.weight_grads[l] - fd.weight_grads[l]).norm() <= 1e-6 * scale);
    }
    for (std::size_t l = 0; l < exact.bias_grads.size(); ++l) {
      const double scale = std::max(1e-8, fd.bias_grads[l].norm());
      CHECK((exact.bias_grads[l] - fd.bias_grads[l]).norm() <= 1e-6 * scale);
    }
  }
}

TEST_CASE("backprop matches finite differences on a batch") {
  const Dataset ds = regression_dataset({4, 3}, 0.05, 12, 15);
  const MlpModel model = MlpModel::random(7, {5, 4}, Activation::tanh, 15);
  const MlpGradients exact = mlp_loss_and_grads(model, ds);
  const MlpGradients fd = fd_gradients(model, ds);
  for (std::size_t l = 0; l < exact.weight_grads.size(); ++l)
    CHECK((exact.weight_grads[l] - fd.weight_grads[l]).norm() <=
          1e-6 * std::max(1e-8, fd.weight_grads[l].norm()));
}

TEST_CASE("near-zero tanh behaves like the composed linear map") {
  // Tiny inputs keep tanh in its linear regime, so the network is close to
  // the linear model W^{L+1} W^1 x (biases zeroed).
  MlpModel model = MlpModel::random(3, {4}, Activation::tanh, 19);
  model.biases[0].setZero();
  Dataset ds;
  Rng rng(21);
  const double scale = 1e-5;
  ds.features = scale * rng.normal_matrix(30, 3);
  ds.targets = scale * rng.normal_matrix(30, 1);

  const MlpGradients exact = mlp_loss_and_grads(model, ds);

  const Eigen::MatrixXd composed = model.weights[1] * model.weights[0];  // 1 x 3
  Eigen::MatrixXd grad_linear = Eigen::MatrixXd::Zero(4, 3);
  const double inv_n = 1.0 / 30.0;
  for (Eigen::Index i = 0; i < 30; ++i) {
    const Eigen::VectorXd x = ds.features.row(i).transpose();
    const double f = (composed * x)(0);
    grad_linear += inv_n * (f - ds.targets(i, 0)) * model.weights[1].transpose() * x.transpose();
  }
  CHECK((exact.weight_grads[0] - grad_linear).norm() <= 1e-6 * grad_linear.norm());
}

TEST_CASE("first layer group norms: zero small-scale columns contribute nothing") {
  Dataset ds = regression_dataset({3, 3}, 0.1, 40, 23);
  ds.features.rightCols(3).setZero();  // eps -> 0
  const MlpModel model = MlpModel::random(6, {5, 4}, Activation::tanh, 23);
  const GroupNorms gn = first_layer_group_norms(model, ds, {3, 3});
  CHECK(gn.aggregate[1] == 0.0);
  CHECK(gn.aggregate[0] > 0.0);
  for (Eigen::Index r = 0; r < gn.per_row.rows(); ++r) CHECK(gn.per_row(r, 1) == 0.0);
}

TEST_CASE("scaling probe: slopes land in the windows") {
  ScalingProbeConfig cfg;
  const ScalingProbeResult res = run_scaling_probe(cfg);
  REQUIRE(res.logistic_small_group.conclusive);
  REQUIRE(res.mlp_small_group.conclusive);
  CHECK(res.logistic_small_group.slope > 0.8);
  CHECK(res.logistic_small_group.slope < 1.2);
  CHECK(res.mlp_small_group.slope > 0.8);
  CHECK(res.mlp_small_group.slope < 1.2);
  CHECK(res.second_layer_max_abs_slope < 0.3);

  // The Fig-1 contrast: second-layer group norms stay within a 10x band
  // across the sweep while the first-layer small-group norm moves ~1000x.
  for (const SlopeFit& half : res.second_layer) {
    double lo = half.norms[0], hi = half.norms[0];
    for (double n : half.norms) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    CHECK(hi / lo < 10.0);
  }
}

TEST_CASE("row hessian: single point is a scaled outer product") {
  Dataset ds = regression_dataset({2, 2}, 0.1, 1, 29);
  const MlpModel model = MlpModel::random(4, {3, 3}, Activation::tanh, 29);
  const Eigen::MatrixXd h = first_layer_row_hessian(model, ds, 0, HessianMode::formula);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h);
  CHECK(svd.singularValues()[1] <= 1e-10 * svd.singularValues()[0]);  // rank 1

  const Eigen::VectorXd x = ds.features.row(0).transpose();
  const double s = h(0, 0) / (x[0] * x[0]);
  CHECK((h - s * x * x.transpose()).norm() <= 1e-8 * h.norm());
}

TEST_CASE("row hessian: formula and finite differences agree") {
  const Dataset ds = regression_dataset({5, 5}, 0.1, 200, 31);
  const MlpModel model = MlpModel::random(10, {6, 4}, Activation::tanh, 31);
  for (Eigen::Index row : {0, 3}) {
    const Eigen::MatrixXd hf = first_layer_row_hessian(model, ds, row, HessianMode::formula);
    const Eigen::MatrixXd hd =
        first_layer_row_hessian(model, ds, row, HessianMode::finite_difference);
    CHECK((hf - hd).norm() <= 1e-4 * hd.norm());
  }
}

TEST_CASE("hessian probe: identity and spectrum tracking") {
  HessianProbeConfig cfg;
  const HessianProbeResult res = run_hessian_probe(cfg);
  CHECK(res.rel_frobenius_error <= 1e-4);
  CHECK(res.pearson_log >= 0.9);
  CHECK(res.spearman >= 0.9);
}

TEST_CASE("expansion order check: linear single layer is exactly first order") {
  // Identity-like single linear layer: gradient is linear in the data, so
  // the fitted slope is 1 up to float noise.
  MultiscaleDataSpec base = MultiscaleDataSpec::make_power_cascade({4, 4}, 0.1, 200, 37);
  MlpModel model = MlpModel::random(8, {6}, Activation::tanh, 37);
  // Shrink weights so tanh stays in its linear regime.
  for (auto& w : model.weights) w *= 1e-3;
  for (auto& b : model.biases) b.setZero();
  const std::vector<double> eps{1e-1, 3.162277660168379e-2, 1e-2, 3.162277660168379e-3};
  const SlopeFit fit = expansion_order_check(model, base, eps, 1);
  REQUIRE(fit.conclusive);
  CHECK(std::abs(fit.slope - 1.0) < 1e-2);
}

TEST_CASE("expansion order check: both layers of the probe model") {
  ExpansionProbeConfig cfg;
  const ExpansionProbeResult res = run_expansion_probe(cfg);
  REQUIRE(res.layer1.conclusive);
  REQUIRE(res.layer2.conclusive);
  CHECK(res.layer1.slope > 0.85);
  CHECK(res.layer1.slope < 1.15);
  CHECK(res.layer2.slope > 0.85);
  CHECK(res.layer2.slope < 1.15);
}

TEST_CASE("truncated-data gradient equals the gradient on the D0 dataset") {
  // The zeroed-groups route inside expansion_order_check and an
  // independently assembled truncated dataset are the same computation.
  MultiscaleDataSpec base = MultiscaleDataSpec::make_power_cascade({4, 4}, 0.05, 80, 39);
  const MlpModel model = MlpModel::random(8, {5, 4}, Activation::tanh, 39);
  const Dataset full = generate_multiscale_dataset(base, TargetKind::linear_regression);

  Dataset truncated = full;
  truncated.features.rightCols(4).setZero();

  Dataset d0;
  d0.features = Eigen::MatrixXd::Zero(80, 8);
  d0.features.leftCols(4) = full.features.leftCols(4);
  d0.targets = full.targets;

  const Eigen::MatrixXd a = mlp_loss_and_grads(model, truncated).weight_grads[0];
  const Eigen::MatrixXd b = mlp_loss_and_grads(model, d0).weight_grads[0];
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("expansion order check flags degenerate fits") {
  // All-zero weights produce identically zero gradients: every point sits at
  // the noise floor and the fit must come back inconclusive.
  MultiscaleDataSpec base = MultiscaleDataSpec::make_power_cascade({3, 3}, 0.1, 50, 41);
  MlpModel model = MlpModel::random(6, {4}, Activation::tanh, 41);
  for (auto& w : model.weights) w.setZero();
  for (auto& b : model.biases) b.setZero();
  Dataset probe = generate_multiscale_dataset(base, TargetKind::linear_regression);
  const std::vector<double> eps{1e-1, 1e-2, 1e-3};
  const SlopeFit fit = expansion_order_check(model, base, eps, 1);
  CHECK_FALSE(fit.conclusive);
}

TEST_CASE("layer perturbation bound") {
  SUBCASE("eps = 0 gives 0 <= 0") {
    const MlpModel model = MlpModel::random(6, {5, 4}, Activation::tanh, 43);
    Rng rng(43);
    const PerturbationBound pb = layer_perturbation_bound_check(
        model, rng.normal_vector(3), rng.normal_vector(3), 0.0, 2);
    CHECK(pb.lhs == 0.0);
    CHECK(pb.rhs == 0.0);
  }
  SUBCASE("layer-1 tanh contraction") {
    const MlpModel model = MlpModel::random(6, {5}, Activation::tanh, 47);
    Rng rng(47);
    const Eigen::VectorXd x0 = rng.normal_vector(3);
    const Eigen::VectorXd x1 = rng.normal_vector(3);
    const PerturbationBound pb = layer_perturbation_bound_check(model, x0, x1, 0.05, 1);
    CHECK(pb.lhs <= pb.rhs * (1.0 + 1e-8));
    CHECK(pb.rhs == doctest::Approx(
                        0.05 * (model.weights[0].rightCols(3) * x1).norm()));
  }
  SUBCASE("randomized draws never violate the bound") {
    const LemmaProbeResult res = run_lemma_probe(100, 53);
    CHECK(res.trials == 100);
    CHECK(res.violations == 0);
    CHECK(res.max_ratio <= 1.0 + 1e-8);
  }
}
