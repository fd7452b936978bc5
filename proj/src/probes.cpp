#include "mrgd/probes.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrgd/errors.hpp"
#include "mrgd/rng.hpp"
#include "mrgd/spectrum.hpp"

namespace mrgd {

namespace {

MultiscaleDataSpec two_scale_spec(const std::vector<std::size_t>& dims, double eps,
                                  std::size_t n, std::uint64_t seed) {
  MultiscaleDataSpec spec;
  spec.group_dims = dims;
  spec.scales = {1.0, eps};
  spec.sample_count = n;
  spec.seed = seed;
  return spec;
}

}  // namespace

double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw ValidationError("pearson_correlation: need matched series of length >= 2");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> out(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // mid-rank for ties
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = rank;
    i = j + 1;
  }
  return out;
}

}  // namespace

double spearman_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pearson_correlation(ranks(xs), ranks(ys));
}

ScalingProbeResult run_scaling_probe(const ScalingProbeConfig& cfg) {
  if (cfg.group_dims.size() != 2)
    throw ValidationError("run_scaling_probe: two column groups expected");
  const std::size_t d = cfg.group_dims[0] + cfg.group_dims[1];

  // Fixed weights shared across the eps sweep.
  Rng wrng(cfg.seed + 1);
  const Eigen::MatrixXd w_logistic =
      wrng.normal_matrix(static_cast<Eigen::Index>(cfg.class_count), static_cast<Eigen::Index>(d)) /
      std::sqrt(static_cast<double>(d));
  const Eigen::VectorXd b_logistic = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.class_count));
  const MlpModel model = MlpModel::random(static_cast<Eigen::Index>(d), cfg.widths,
                                          cfg.activation, cfg.seed + 2);

  std::vector<double> logistic_norms, mlp_norms;
  const Eigen::Index n2 = model.weights[1].cols();
  const Eigen::Index half = n2 / 2;
  std::vector<std::vector<double>> second_norms(2);

  for (double eps : cfg.eps_values) {
    MultiscaleDataSpec spec = two_scale_spec(cfg.group_dims, eps, cfg.sample_count, cfg.seed);
    spec.class_count = cfg.class_count;
    const Dataset classified = generate_multiscale_dataset(spec, TargetKind::classification);
    const LogisticValue lv = logistic_loss_grad(classified, w_logistic, b_logistic);
    logistic_norms.push_back(
        lv.grad_w.rightCols(static_cast<Eigen::Index>(cfg.group_dims[1])).norm());

    const Dataset regression = generate_multiscale_dataset(spec, TargetKind::linear_regression);
    const GroupNorms gn = first_layer_group_norms(model, regression, cfg.group_dims);
    mlp_norms.push_back(gn.aggregate[1]);

    const Eigen::MatrixXd w2_grad = mlp_loss_and_grads(model, regression).weight_grads[1];
    second_norms[0].push_back(w2_grad.leftCols(half).norm());
    second_norms[1].push_back(w2_grad.rightCols(n2 - half).norm());
  }

  ScalingProbeResult out;
  out.logistic_small_group = fit_log_slope(cfg.eps_values, logistic_norms);
  out.mlp_small_group = fit_log_slope(cfg.eps_values, mlp_norms);
  for (const std::vector<double>& series : second_norms) {
    out.second_layer.push_back(fit_log_slope(cfg.eps_values, series));
    if (out.second_layer.back().conclusive)
      out.second_layer_max_abs_slope =
          std::max(out.second_layer_max_abs_slope, std::abs(out.second_layer.back().slope));
  }
  return out;
}

ExpansionProbeResult run_expansion_probe(const ExpansionProbeConfig& cfg) {
  const std::size_t d =
      std::accumulate(cfg.group_dims.begin(), cfg.group_dims.end(), std::size_t{0});
  const MlpModel model = MlpModel::random(static_cast<Eigen::Index>(d), cfg.widths,
                                          cfg.activation, cfg.seed + 2);
  const MultiscaleDataSpec base = MultiscaleDataSpec::make_power_cascade(
      cfg.group_dims, cfg.eps_values.front(), cfg.sample_count, cfg.seed);

  ExpansionProbeResult out;
  out.layer1 = expansion_order_check(model, base, cfg.eps_values, 1);
  out.layer2 = expansion_order_check(model, base, cfg.eps_values, 2);
  return out;
}

HessianProbeResult run_hessian_probe(const HessianProbeConfig& cfg) {
  MultiscaleDataSpec spec =
      two_scale_spec(cfg.group_dims, cfg.data_scale, cfg.sample_count, cfg.seed);
  const Dataset dataset = generate_multiscale_dataset(spec, TargetKind::linear_regression);
  const std::size_t d = static_cast<std::size_t>(dataset.dimension());
  const MlpModel model = MlpModel::random(static_cast<Eigen::Index>(d), cfg.widths,
                                          cfg.activation, cfg.seed + 2);

  const Eigen::MatrixXd h_formula =
      first_layer_row_hessian(model, dataset, cfg.row, HessianMode::formula);
  const Eigen::MatrixXd h_fd =
      first_layer_row_hessian(model, dataset, cfg.row, HessianMode::finite_difference);

  HessianProbeResult out;
  out.rel_frobenius_error = (h_formula - h_fd).norm() / h_fd.norm();

  // Fig-2 pairing: eigenvalue magnitudes of the row Hessian against the data
  // covariance spectrum, both sorted descending, compared on the log scale.
  const Eigen::MatrixXd sym = 0.5 * (h_formula + h_formula.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  std::vector<double> hess_logs;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    hess_logs.push_back(std::abs(es.eigenvalues()[i]));
  std::sort(hess_logs.begin(), hess_logs.end(), std::greater<double>());
  for (double& v : hess_logs) v = std::log(std::max(v, 1e-300));

  std::vector<double> cov_logs = covariance_spectrum(dataset.features);
  for (double& v : cov_logs) v = std::log(std::max(v, 1e-300));

  out.pearson_log = pearson_correlation(hess_logs, cov_logs);
  out.spearman = spearman_correlation(hess_logs, cov_logs);
  return out;
}

LemmaProbeResult run_lemma_probe(int trials, std::uint64_t seed) {
  Rng rng(seed);
  LemmaProbeResult out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const Eigen::Index d0 = static_cast<Eigen::Index>(rng.uniform_int(2, 6));
    const Eigen::Index d1 = static_cast<Eigen::Index>(rng.uniform_int(2, 6));
    const int depth = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<Eigen::Index> widths;
    for (int l = 0; l < depth; ++l)
      widths.push_back(static_cast<Eigen::Index>(rng.uniform_int(3, 8)));
    const Activation act = rng.uniform() < 0.5 ? Activation::tanh : Activation::sigmoid;
    const MlpModel model = MlpModel::random(d0 + d1, widths, act, rng.uniform_int(0, 1u << 30));

    const Eigen::VectorXd x0 = rng.normal_vector(d0);
    const Eigen::VectorXd x1 = rng.normal_vector(d1);
    const double eps = std::pow(10.0, rng.uniform(-4.0, -1.0));
    const int layer = static_cast<int>(rng.uniform_int(1, static_cast<std::uint64_t>(depth)));

    const PerturbationBound pb = layer_perturbation_bound_check(model, x0, x1, eps, layer);
    if (pb.rhs > 0.0) out.max_ratio = std::max(out.max_ratio, pb.lhs / pb.rhs);
    if (pb.lhs > pb.rhs * (1.0 + 1e-8)) ++out.violations;
  }
  return out;
}

}  // namespace mrgd
