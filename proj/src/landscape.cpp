#include "mrgd/landscape.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "mrgd/errors.hpp"
#include "mrgd/rng.hpp"

namespace mrgd {

namespace {

double act_value(Activation a, double t) {
  return a == Activation::tanh ? std::tanh(t) : 1.0 / (1.0 + std::exp(-t));
}

double act_derivative(Activation a, double t) {
  if (a == Activation::tanh) {
    const double v = std::tanh(t);
    return 1.0 - v * v;
  }
  const double s = 1.0 / (1.0 + std::exp(-t));
  return s * (1.0 - s);
}

Eigen::VectorXd act_vec(Activation a, const Eigen::VectorXd& z) {
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = act_value(a, z[i]);
  return out;
}

Eigen::VectorXd act_deriv_vec(Activation a, const Eigen::VectorXd& z) {
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = act_derivative(a, z[i]);
  return out;
}

double spectral_norm(const Eigen::MatrixXd& w) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(w);
  return svd.singularValues()[0];
}

void check_regression(const Dataset& dataset) {
  if (dataset.classification || dataset.targets.cols() != 1)
    throw ValidationError("landscape: scalar-target regression dataset required");
}

}  // namespace

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ValidationError("unknown activation: " + name);
}

double activation_lipschitz(Activation a) {
  return a == Activation::tanh ? 1.0 : 0.25;
}

MlpModel MlpModel::random(Eigen::Index input_dim, const std::vector<Eigen::Index>& widths,
                          Activation activation, std::uint64_t seed) {
  if (input_dim < 1 || widths.empty())
    throw ValidationError("MlpModel: need input_dim >= 1 and at least one hidden width");
  Rng rng(seed);
  MlpModel model;
  model.activation = activation;
  Eigen::Index fan_in = input_dim;
  for (Eigen::Index width : widths) {
    if (width < 1) throw ValidationError("MlpModel: widths must be positive");
    model.weights.push_back(rng.normal_matrix(width, fan_in) /
                            std::sqrt(static_cast<double>(fan_in)));
    model.biases.push_back(0.1 * rng.normal_vector(width));
    fan_in = width;
  }
  model.weights.push_back(rng.normal_matrix(1, fan_in) / std::sqrt(static_cast<double>(fan_in)));
  return model;
}

MlpModel::Forward MlpModel::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw ValidationError("MlpModel: input dimension mismatch");
  Forward fw;
  fw.activations.push_back(x);
  for (int l = 0; l < depth(); ++l) {
    fw.pre.push_back(weights[static_cast<std::size_t>(l)] * fw.activations.back() +
                     biases[static_cast<std::size_t>(l)]);
    fw.activations.push_back(act_vec(activation, fw.pre.back()));
  }
  fw.output = (weights.back() * fw.activations.back())(0);
  return fw;
}

Eigen::VectorXd MlpModel::layer_output(const Eigen::VectorXd& x, int layer) const {
  if (layer < 1 || layer > depth())
    throw ValidationError("MlpModel: layer index out of range");
  return forward(x).activations[static_cast<std::size_t>(layer)];
}

MlpGradients mlp_loss_and_grads(const MlpModel& model, const Dataset& dataset) {
  check_regression(dataset);
  const int layer_count = static_cast<int>(model.weights.size());  // L+1
  MlpGradients out;
  for (const Eigen::MatrixXd& w : model.weights)
    out.weight_grads.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const Eigen::VectorXd& b : model.biases)
    out.bias_grads.push_back(Eigen::VectorXd::Zero(b.size()));

  const double inv_n = 1.0 / static_cast<double>(dataset.sample_count());
  for (Eigen::Index i = 0; i < dataset.sample_count(); ++i) {
    const Eigen::VectorXd x = dataset.features.row(i).transpose();
    const MlpModel::Forward fw = model.forward(x);
    const double diff = fw.output - dataset.targets(i, 0);
    out.loss += 0.5 * diff * diff * inv_n;

    const double seed = diff * inv_n;  // d/df of the averaged loss term
    out.weight_grads.back().noalias() += seed * fw.activations.back().transpose();
    Eigen::VectorXd lambda = model.weights.back().transpose() * seed;
    for (int l = layer_count - 2; l >= 0; --l) {
      const Eigen::VectorXd delta =
          lambda.cwiseProduct(act_deriv_vec(model.activation, fw.pre[static_cast<std::size_t>(l)]));
      out.weight_grads[static_cast<std::size_t>(l)].noalias() +=
          delta * fw.activations[static_cast<std::size_t>(l)].transpose();
      out.bias_grads[static_cast<std::size_t>(l)] += delta;
      if (l > 0) lambda = model.weights[static_cast<std::size_t>(l)].transpose() * delta;
    }
  }
  return out;
}

GroupNorms first_layer_group_norms(const MlpModel& model, const Dataset& dataset,
                                   const std::vector<std::size_t>& group_dims) {
  std::size_t total = 0;
  for (std::size_t g : group_dims) total += g;
  if (total != static_cast<std::size_t>(dataset.dimension()))
    throw ValidationError("first_layer_group_norms: group dims must sum to the data dimension");

  const Eigen::MatrixXd grad = mlp_loss_and_grads(model, dataset).weight_grads.front();
  GroupNorms out;
  out.per_row.resize(grad.rows(), static_cast<Eigen::Index>(group_dims.size()));
  out.aggregate.resize(static_cast<Eigen::Index>(group_dims.size()));
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < group_dims.size(); ++k) {
    const Eigen::Index width = static_cast<Eigen::Index>(group_dims[k]);
    const auto block = grad.middleCols(offset, width);
    for (Eigen::Index r = 0; r < grad.rows(); ++r)
      out.per_row(r, static_cast<Eigen::Index>(k)) = block.row(r).norm();
    out.aggregate[static_cast<Eigen::Index>(k)] = block.norm();
    offset += width;
  }
  return out;
}

namespace {

// f-tilde restricted to the first-layer pre-activation: continue the forward
// pass from z^1 = z (bias already included).
double tail_from_first_preactivation(const MlpModel& model, const Eigen::VectorXd& z1) {
  Eigen::VectorXd a = act_vec(model.activation, z1);
  for (int l = 1; l < model.depth(); ++l)
    a = act_vec(model.activation,
                model.weights[static_cast<std::size_t>(l)] * a + model.biases[static_cast<std::size_t>(l)]);
  return (model.weights.back() * a)(0);
}

Eigen::MatrixXd row_hessian_formula(const MlpModel& model, const Dataset& dataset,
                                    Eigen::Index row) {
  const Eigen::Index d = dataset.dimension();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  const double inv_n = 1.0 / static_cast<double>(dataset.sample_count());
  const double cube_root_eps = std::cbrt(std::numeric_limits<double>::epsilon());

  for (Eigen::Index i = 0; i < dataset.sample_count(); ++i) {
    const Eigen::VectorXd x = dataset.features.row(i).transpose();
    const MlpModel::Forward fw = model.forward(x);
    const double diff = fw.output - dataset.targets(i, 0);

    // c_row = df/dz^1_row by a unit-seeded reverse pass.
    Eigen::VectorXd lambda = model.weights.back().transpose();
    for (int l = model.depth() - 1; l >= 1; --l) {
      const Eigen::VectorXd delta =
          lambda.cwiseProduct(act_deriv_vec(model.activation, fw.pre[static_cast<std::size_t>(l)]));
      lambda = model.weights[static_cast<std::size_t>(l)].transpose() * delta;
    }
    const double c_row =
        lambda[row] * act_derivative(model.activation, fw.pre.front()[row]);

    // Second derivative of f-tilde along the scalar pre-activation, by
    // central differences with step eps_mach^(1/3) * max(1, |z_i|).
    const double z_i = fw.pre.front()[row];
    const double step = cube_root_eps * std::max(1.0, std::abs(z_i));
    Eigen::VectorXd z_plus = fw.pre.front();
    Eigen::VectorXd z_minus = fw.pre.front();
    z_plus[row] += step;
    z_minus[row] -= step;
    const double second = (tail_from_first_preactivation(model, z_plus) - 2.0 * fw.output +
                           tail_from_first_preactivation(model, z_minus)) /
                          (step * step);

    const double s = c_row * c_row + diff * second;
    h.noalias() += (inv_n * s) * (x * x.transpose());
  }
  return h;
}

Eigen::MatrixXd row_hessian_fd(const MlpModel& model, const Dataset& dataset, Eigen::Index row) {
  const Eigen::Index d = dataset.dimension();
  Eigen::MatrixXd h(d, d);
  const double cube_root_eps = std::cbrt(std::numeric_limits<double>::epsilon());
  MlpModel perturbed = model;
  for (Eigen::Index b = 0; b < d; ++b) {
    const double w_rb = model.weights.front()(row, b);
    const double step = cube_root_eps * std::max(1.0, std::abs(w_rb));
    perturbed.weights.front()(row, b) = w_rb + step;
    const Eigen::VectorXd grad_plus =
        mlp_loss_and_grads(perturbed, dataset).weight_grads.front().row(row).transpose();
    perturbed.weights.front()(row, b) = w_rb - step;
    const Eigen::VectorXd grad_minus =
        mlp_loss_and_grads(perturbed, dataset).weight_grads.front().row(row).transpose();
    perturbed.weights.front()(row, b) = w_rb;
    h.col(b) = (grad_plus - grad_minus) / (2.0 * step);
  }
  return h;
}

}  // namespace

Eigen::MatrixXd first_layer_row_hessian(const MlpModel& model, const Dataset& dataset,
                                        Eigen::Index row, HessianMode mode) {
  check_regression(dataset);
  if (row < 0 || row >= model.weights.front().rows())
    throw ValidationError("first_layer_row_hessian: row index out of range");
  return mode == HessianMode::formula ? row_hessian_formula(model, dataset, row)
                                      : row_hessian_fd(model, dataset, row);
}

SlopeFit fit_log_slope(const std::vector<double>& eps, const std::vector<double>& norms) {
  if (eps.size() != norms.size()) throw ValidationError("fit_log_slope: size mismatch");
  double floor = 0.0;
  for (double n : norms) floor = std::max(floor, n);
  floor = std::max(floor * 1e-13, 1e-300);

  SlopeFit fit;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    fit.eps.push_back(eps[k]);
    fit.norms.push_back(norms[k]);
    if (norms[k] > floor) {
      xs.push_back(std::log(eps[k]));
      ys.push_back(std::log(norms[k]));
    }
  }
  if (xs.size() < 3) return fit;  // inconclusive

  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.conclusive = true;
  return fit;
}

SlopeFit expansion_order_check(const MlpModel& model, const MultiscaleDataSpec& base_spec,
                               const std::vector<double>& eps_values, int layer) {
  if (!base_spec.power_cascade)
    throw ValidationError("expansion_order_check: power-cascade spec required");
  if (layer < 1 || layer > static_cast<int>(model.weights.size()))
    throw ValidationError("expansion_order_check: layer out of range");
  if (eps_values.size() < 3)
    throw ValidationError("expansion_order_check: need at least three eps values");

  std::vector<double> norms;
  for (double eps : eps_values) {
    MultiscaleDataSpec spec = base_spec;  // same seed: common random numbers
    double s = 1.0;
    for (std::size_t k = 0; k < spec.scales.size(); ++k) {
      spec.scales[k] = s;
      s *= eps;
    }
    Dataset full = generate_multiscale_dataset(spec, TargetKind::linear_regression);

    Dataset truncated = full;
    Eigen::Index offset = static_cast<Eigen::Index>(spec.group_dims[0]);
    truncated.features.rightCols(truncated.dimension() - offset).setZero();

    const Eigen::MatrixXd g_eps =
        mlp_loss_and_grads(model, full).weight_grads[static_cast<std::size_t>(layer - 1)];
    const Eigen::MatrixXd g_zero =
        mlp_loss_and_grads(model, truncated).weight_grads[static_cast<std::size_t>(layer - 1)];
    norms.push_back((g_eps - g_zero).norm());
  }
  return fit_log_slope(eps_values, norms);
}

PerturbationBound layer_perturbation_bound_check(const MlpModel& model,
                                                 const Eigen::VectorXd& x0,
                                                 const Eigen::VectorXd& x1, double eps,
                                                 int layer) {
  if (layer < 1 || layer > model.depth())
    throw ValidationError("layer_perturbation_bound_check: layer out of range");
  if (x0.size() + x1.size() != model.input_dim())
    throw ValidationError("layer_perturbation_bound_check: x0/x1 must fill the input dimension");
  if (eps < 0.0) throw ValidationError("layer_perturbation_bound_check: eps must be >= 0");

  Eigen::VectorXd base(model.input_dim());
  base << x0, Eigen::VectorXd::Zero(x1.size());
  Eigen::VectorXd shifted(model.input_dim());
  shifted << x0, eps * x1;

  PerturbationBound out;
  out.lhs = (model.layer_output(shifted, layer) - model.layer_output(base, layer)).norm();

  const double lip = activation_lipschitz(model.activation);
  const Eigen::MatrixXd w1_tail = model.weights.front().rightCols(x1.size());
  double rhs = eps * std::pow(lip, layer) * (w1_tail * x1).norm();
  for (int k = 2; k <= layer; ++k)
    rhs *= spectral_norm(model.weights[static_cast<std::size_t>(k - 1)]);
  out.rhs = rhs;
  return out;
}

}  // namespace mrgd
