#include "mrgd/problems.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mrgd/errors.hpp"
#include "mrgd/rng.hpp"

namespace mrgd {

namespace {

constexpr double kUniformHalfWidth = 1.7320508075688772;  // sqrt(3): unit variance

double stable_softplus(double u) {
  return std::log1p(std::exp(-std::abs(u))) + std::max(u, 0.0);
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

Eigen::VectorXd softmax_row(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

void write_double(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

GroupSampler sampler_from_name(const std::string& name) {
  if (name == "gaussian") return GroupSampler::gaussian;
  if (name == "uniform") return GroupSampler::uniform;
  throw ValidationError("unknown sampler: " + name);
}

TargetKind target_from_name(const std::string& name) {
  if (name == "linear_regression") return TargetKind::linear_regression;
  if (name == "gaussian_label") return TargetKind::gaussian_label;
  if (name == "classification") return TargetKind::classification;
  throw ValidationError("unknown target kind: " + name);
}

std::string sampler_name(GroupSampler s) {
  return s == GroupSampler::gaussian ? "gaussian" : "uniform";
}

std::string target_name(TargetKind t) {
  switch (t) {
    case TargetKind::linear_regression: return "linear_regression";
    case TargetKind::gaussian_label: return "gaussian_label";
    case TargetKind::classification: return "classification";
  }
  throw ValidationError("unknown target kind enum");
}

MultiscaleDataSpec MultiscaleDataSpec::make_power_cascade(std::vector<std::size_t> dims,
                                                          double eps, std::size_t sample_count,
                                                          std::uint64_t seed) {
  MultiscaleDataSpec spec;
  spec.group_dims = std::move(dims);
  spec.scales.resize(spec.group_dims.size());
  double s = 1.0;
  for (std::size_t k = 0; k < spec.scales.size(); ++k) {
    spec.scales[k] = s;
    s *= eps;
  }
  spec.sample_count = sample_count;
  spec.seed = seed;
  spec.power_cascade = true;
  spec.validate();
  return spec;
}

std::size_t MultiscaleDataSpec::dimension() const {
  std::size_t d = 0;
  for (std::size_t g : group_dims) d += g;
  return d;
}

void MultiscaleDataSpec::validate() const {
  if (group_dims.empty()) throw ValidationError("data spec: no groups");
  if (group_dims.size() != scales.size())
    throw ValidationError("data spec: one scale per group required");
  for (std::size_t g : group_dims)
    if (g == 0) throw ValidationError("data spec: group dims must be positive");
  if (scales.front() != 1.0) throw ValidationError("data spec: scales[0] must be 1");
  for (std::size_t k = 0; k < scales.size(); ++k) {
    if (!(scales[k] > 0.0)) throw ValidationError("data spec: scales must be positive");
    if (k > 0 && !(scales[k] < scales[k - 1]))
      throw ValidationError("data spec: scales must be strictly decreasing");
  }
  if (sample_count == 0) throw ValidationError("data spec: sample_count must be positive");
  if (class_count < 2) throw ValidationError("data spec: class_count must be >= 2");
}

nlohmann::json MultiscaleDataSpec::to_json() const {
  return {{"group_dims", group_dims},
          {"scales", scales},
          {"sample_count", sample_count},
          {"seed", seed},
          {"power_cascade", power_cascade},
          {"sampler", sampler_name(sampler)},
          {"class_count", class_count},
          {"one_hot", one_hot}};
}

MultiscaleDataSpec MultiscaleDataSpec::from_json(const nlohmann::json& j) {
  MultiscaleDataSpec spec;
  spec.group_dims = j.at("group_dims").get<std::vector<std::size_t>>();
  spec.scales = j.at("scales").get<std::vector<double>>();
  spec.sample_count = j.at("sample_count").get<std::size_t>();
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.power_cascade = j.value("power_cascade", false);
  spec.sampler = sampler_from_name(j.value("sampler", std::string("gaussian")));
  spec.class_count = j.value("class_count", std::size_t{2});
  spec.one_hot = j.value("one_hot", false);
  spec.validate();
  return spec;
}

void Dataset::validate() const {
  if (features.rows() != targets.rows())
    throw ValidationError("dataset: features and targets disagree on sample count");
  if (classification) {
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < targets.cols(); ++j) {
        if (targets(i, j) < 0.0)
          throw ValidationError("dataset: class probabilities must be nonnegative");
        sum += targets(i, j);
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw ValidationError("dataset: class-probability rows must sum to 1");
    }
  }
  if (alignment) {
    const Eigen::MatrixXd& u = alignment->u;
    if (u.rows() != dimension() || u.cols() != dimension())
      throw ValidationError("dataset: alignment U must be d x d");
    const double defect =
        (u.transpose() * u - Eigen::MatrixXd::Identity(u.rows(), u.cols())).norm();
    if (defect > 1e-8) throw ValidationError("dataset: alignment U is not orthonormal");
  }
}

Dataset generate_multiscale_dataset(const MultiscaleDataSpec& spec, TargetKind target) {
  spec.validate();
  const std::size_t d = spec.dimension();
  const std::size_t n = spec.sample_count;
  Rng rng(spec.seed);

  Dataset out;
  out.spec = spec;
  out.rank_deficient_warning = n < d;
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));

  std::size_t col = 0;
  for (std::size_t k = 0; k < spec.group_dims.size(); ++k) {
    const double scale = spec.scales[k];
    for (std::size_t j = 0; j < spec.group_dims[k]; ++j, ++col) {
      for (std::size_t i = 0; i < n; ++i) {
        const double raw = spec.sampler == GroupSampler::gaussian
                               ? rng.normal()
                               : rng.uniform(-kUniformHalfWidth, kUniformHalfWidth);
        out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) = scale * raw;
      }
    }
  }

  switch (target) {
    case TargetKind::linear_regression: {
      out.targets.resize(static_cast<Eigen::Index>(n), 1);
      for (std::size_t i = 0; i < n; ++i) out.targets(static_cast<Eigen::Index>(i), 0) = rng.normal();
      break;
    }
    case TargetKind::gaussian_label: {
      // Targets from a fixed random linear functional of the features.
      const Eigen::VectorXd w =
          rng.normal_vector(static_cast<Eigen::Index>(d)) / std::sqrt(static_cast<double>(d));
      out.targets = out.features * w;
      break;
    }
    case TargetKind::classification: {
      const std::size_t c = spec.class_count;
      const Eigen::MatrixXd teacher =
          rng.normal_matrix(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)) /
          std::sqrt(static_cast<double>(d));
      out.classification = true;
      out.targets.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
      for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
        Eigen::VectorXd probs = softmax_row(teacher * out.features.row(i).transpose());
        if (spec.one_hot) {
          Eigen::Index argmax = 0;
          probs.maxCoeff(&argmax);
          probs.setZero();
          probs[argmax] = 1.0;
        }
        out.targets.row(i) = probs.transpose();
      }
      break;
    }
  }
  return out;
}

Dataset pca_align(const Dataset& dataset) {
  if (dataset.sample_count() < 2)
    throw ValidationError("pca_align: need at least two samples");
  const Eigen::VectorXd mean = dataset.features.colwise().mean();
  Eigen::MatrixXd centered = dataset.features.rowwise() - mean.transpose();

  const double spread = centered.norm();
  if (spread <= 1e-12 * std::max(1.0, dataset.features.norm()))
    throw DegenerateDataError("pca_align: dataset has zero variance");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeFullV);
  Dataset out = dataset;
  out.alignment = Alignment{svd.matrixV(), mean};
  out.features = centered * svd.matrixV();
  return out;
}

QuadraticProblem least_squares_quadratic(const Dataset& dataset) {
  if (dataset.classification)
    throw ValidationError("least_squares_quadratic: regression targets required");
  const Eigen::MatrixXd& x = dataset.features;
  const double n = static_cast<double>(x.rows());
  const Eigen::MatrixXd a = x.transpose() * x / n;
  const Eigen::VectorXd g = 2.0 * x.transpose() * dataset.targets.col(0) / n;

  // Spectrum check via SVD of the data (not of A) for a stable singularity test.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
  const Eigen::VectorXd& s = svd.singularValues();
  const double top = s[0] * s[0] / n;
  const double bottom = s.size() < x.cols() ? 0.0 : s[s.size() - 1] * s[s.size() - 1] / n;
  if (!(bottom > 1e-12 * top))
    throw RankDeficiencyError(
        "least_squares_quadratic: sample covariance is singular; need N >= d independent samples");
  return QuadraticProblem(a, g);
}

ConvexProblem build_separable_convex(const SpectrumGroups& spectrum_template,
                                     std::uint64_t seed) {
  const std::size_t m = spectrum_template.group_count();
  const std::size_t d = spectrum_template.dimension();
  Rng rng(seed);

  // Random orthogonal Pi via QR of a Gaussian matrix; rows partitioned into
  // the Pi_i blocks.
  Eigen::MatrixXd gaussian = rng.normal_matrix(static_cast<Eigen::Index>(d),
                                               static_cast<Eigen::Index>(d));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd pi = Eigen::MatrixXd(qr.householderQ()).transpose();

  // Per coordinate c (in Pi coordinates): quadratic part 0.5*sigma_c from A,
  // plus f-part a_i u^2/2 + b_i softplus(u) where a_i = 0.5*sigma_bot and
  // b_i = 2*(sigma_top - sigma_bot) so that the f-part Hessian spans
  // (0.5*sigma_bot, 0.5*sigma_top] (softplus'' peaks at 1/4).
  std::vector<double> half_sigma(d), a_coef(d), b_coef(d);
  std::vector<Eigen::MatrixXd> projections(m);
  std::vector<std::pair<double, double>> bounds(m);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t di = spectrum_template.group_sizes[i];
    const double top = spectrum_template.sigma_top[i];
    const double bot = spectrum_template.sigma_bot[i];
    for (std::size_t k = 0; k < di; ++k) {
      const std::size_t c = offset + k;
      half_sigma[c] = 0.5 * spectrum_template.eigenvalues[c];
      a_coef[c] = 0.5 * bot;
      b_coef[c] = 2.0 * (top - bot);
    }
    projections[i] = pi.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(di));
    bounds[i] = {bot, top};
    offset += di;
  }

  const Eigen::VectorXd g = rng.normal_vector(static_cast<Eigen::Index>(d));
  const Eigen::VectorXd g_pi = pi * g;

  // In Pi coordinates the stationarity condition separates:
  //   h_c(u) = sigma_c u / 2 + a_c u + b_c sigmoid(u) = g_pi[c].
  // Damped fixed point per coordinate with step 1/L_c.
  Eigen::VectorXd u_star(static_cast<Eigen::Index>(d));
  for (std::size_t c = 0; c < d; ++c) {
    const double lc = half_sigma[c] + a_coef[c] + 0.25 * b_coef[c];
    double u = 0.0;
    for (int it = 0; it < 100000; ++it) {
      const double res = half_sigma[c] * u + a_coef[c] * u + b_coef[c] * sigmoid(u) -
                         g_pi[static_cast<Eigen::Index>(c)];
      if (std::abs(res) <= 1e-13) break;
      u -= res / lc;
    }
    u_star[static_cast<Eigen::Index>(c)] = u;
  }

  ConvexProblem problem;
  problem.projections = projections;
  problem.group_bounds = bounds;
  problem.delta = 0.0;
  problem.optimum = pi.transpose() * u_star;

  Eigen::VectorXd hs = Eigen::Map<const Eigen::VectorXd>(half_sigma.data(), static_cast<Eigen::Index>(d));
  Eigen::VectorXd ac = Eigen::Map<const Eigen::VectorXd>(a_coef.data(), static_cast<Eigen::Index>(d));
  Eigen::VectorXd bc = Eigen::Map<const Eigen::VectorXd>(b_coef.data(), static_cast<Eigen::Index>(d));

  problem.loss = [pi, hs, ac, bc, g](const Eigen::VectorXd& theta) -> double {
    const Eigen::VectorXd u = pi * theta;
    double value = -g.dot(theta);
    for (Eigen::Index c = 0; c < u.size(); ++c) {
      value += 0.5 * hs[c] * u[c] * u[c] + 0.5 * ac[c] * u[c] * u[c] +
               bc[c] * stable_softplus(u[c]);
    }
    return value;
  };
  problem.gradient = [pi, hs, ac, bc, g](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    const Eigen::VectorXd u = pi * theta;
    Eigen::VectorXd h(u.size());
    for (Eigen::Index c = 0; c < u.size(); ++c)
      h[c] = hs[c] * u[c] + ac[c] * u[c] + bc[c] * sigmoid(u[c]);
    return pi.transpose() * h - g;
  };
  return problem;
}

LogisticValue logistic_loss_grad(const Dataset& dataset, const Eigen::MatrixXd& w,
                                 const Eigen::VectorXd& b) {
  if (!dataset.classification)
    throw ValidationError("logistic_loss_grad: classification dataset required");
  const Eigen::Index n = dataset.sample_count();
  const Eigen::Index d = dataset.dimension();
  const Eigen::Index c = dataset.targets.cols();
  if (w.rows() != c || w.cols() != d || b.size() != c)
    throw ValidationError("logistic_loss_grad: W must be c x d and b length c");

  LogisticValue out;
  out.grad_w = Eigen::MatrixXd::Zero(c, d);
  out.grad_b = Eigen::VectorXd::Zero(c);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd logits = w * dataset.features.row(i).transpose() + b;
    const double shift = logits.maxCoeff();
    const Eigen::VectorXd shifted = logits.array() - shift;
    const double log_z = std::log(shifted.array().exp().sum());
    const Eigen::VectorXd log_probs = shifted.array() - log_z;
    const Eigen::VectorXd probs = log_probs.array().exp();

    loss -= dataset.targets.row(i).dot(log_probs.transpose());
    const Eigen::VectorXd diff = probs - dataset.targets.row(i).transpose();
    out.grad_w.noalias() += diff * dataset.features.row(i);
    out.grad_b += diff;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = loss * inv_n;
  out.grad_w *= inv_n;
  out.grad_b *= inv_n;
  return out;
}

void Dataset::write_csv(const std::string& csv_path, const std::string& sidecar_path) const {
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot open for writing: " + csv_path);
  const Eigen::Index d = dimension();
  const Eigen::Index c = targets.cols();
  for (Eigen::Index j = 0; j < d; ++j) csv << 'x' << j << ',';
  for (Eigen::Index j = 0; j < c; ++j) csv << 'y' << j << (j + 1 < c ? "," : "");
  csv << '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      write_double(csv, features(i, j));
      csv << ',';
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      write_double(csv, targets(i, j));
      if (j + 1 < c) csv << ',';
    }
    csv << '\n';
  }
  if (!csv) throw IoError("write failed: " + csv_path);

  nlohmann::json sidecar;
  sidecar["classification"] = classification;
  sidecar["rank_deficient_warning"] = rank_deficient_warning;
  if (spec) {
    sidecar["spec"] = spec->to_json();
    sidecar["seed"] = spec->seed;
  }
  if (alignment) {
    nlohmann::json u = nlohmann::json::array();
    for (Eigen::Index i = 0; i < alignment->u.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < alignment->u.cols(); ++j) row.push_back(alignment->u(i, j));
      u.push_back(row);
    }
    sidecar["alignment"] = {{"u", u},
                            {"mean", std::vector<double>(alignment->mean.data(),
                                                         alignment->mean.data() + alignment->mean.size())}};
  }
  std::ofstream side(sidecar_path);
  if (!side) throw IoError("cannot open for writing: " + sidecar_path);
  side << sidecar.dump(2) << '\n';
  if (!side) throw IoError("write failed: " + sidecar_path);
}

Dataset read_csv_impl(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream side(sidecar_path);
  if (!side) throw IoError("cannot open: " + sidecar_path);
  nlohmann::json sidecar = nlohmann::json::parse(side, nullptr, true);

  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open: " + csv_path);
  std::string header;
  if (!std::getline(csv, header)) throw IoError("empty dataset file: " + csv_path);

  Eigen::Index d = 0, c = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (!col.empty() && col[0] == 'x') ++d;
      else if (!col.empty() && col[0] == 'y') ++c;
      else throw ValidationError("dataset header must contain only x*/y* columns");
    }
  }
  if (d == 0 || c == 0) throw ValidationError("dataset header missing feature or target columns");

  std::vector<double> values;
  std::string line;
  Eigen::Index rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index cols = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != d + c) throw ValidationError("dataset row has wrong column count");
    ++rows;
  }

  Dataset out;
  out.features.resize(rows, d);
  out.targets.resize(rows, c);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.features(i, j) = values[static_cast<std::size_t>(i * (d + c) + j)];
    for (Eigen::Index j = 0; j < c; ++j) out.targets(i, j) = values[static_cast<std::size_t>(i * (d + c) + d + j)];
  }
  out.classification = sidecar.value("classification", false);
  out.rank_deficient_warning = sidecar.value("rank_deficient_warning", false);
  if (sidecar.contains("spec")) out.spec = MultiscaleDataSpec::from_json(sidecar["spec"]);
  if (sidecar.contains("alignment")) {
    Alignment al;
    const auto& aj = sidecar["alignment"];
    const auto rows_u = aj.at("u").get<std::vector<std::vector<double>>>();
    al.u.resize(static_cast<Eigen::Index>(rows_u.size()), static_cast<Eigen::Index>(rows_u.size()));
    for (std::size_t i = 0; i < rows_u.size(); ++i)
      for (std::size_t j = 0; j < rows_u[i].size(); ++j)
        al.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows_u[i][j];
    const auto mean = aj.at("mean").get<std::vector<double>>();
    al.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    out.alignment = al;
  }
  out.validate();
  return out;
}

Dataset Dataset::read_csv(const std::string& csv_path, const std::string& sidecar_path) {
  return read_csv_impl(csv_path, sidecar_path);
}

}  // namespace mrgd
