#include "mrgd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mrgd/errors.hpp"

namespace mrgd {

namespace {

// R_l^j = eta_j * sigma_l with 1-based group indices.
double rate_product(const SpectrumGroups& s, const std::vector<double>& etas, std::size_t l,
                    std::size_t j) {
  return etas[j - 1] * s.sigma_top[l - 1];
}

// Shared Theorem-2 denominator log((1 - R^i_{i+1}/kappa_{i+1}) / (1 - R^i_i/kappa_i)).
double coupling_denominator(const SpectrumGroups& s, const std::vector<double>& etas,
                            std::size_t i) {
  const double upper = 1.0 - rate_product(s, etas, i + 1, i) / s.kappa[i];
  const double lower = 1.0 - rate_product(s, etas, i, i) / s.kappa[i - 1];
  if (!(upper > 0.0 && lower > 0.0)) return -1.0;
  return std::log(upper / lower);
}

void validate_etas(const SpectrumGroups& s, const std::vector<double>& etas) {
  if (etas.size() != s.group_count())
    throw ValidationError("schedule: one learning rate per group required");
  for (std::size_t j = 0; j < etas.size(); ++j) {
    if (!(etas[j] > 0.0))
      throw ValidationError("schedule: learning rates must be positive");
  }
}

}  // namespace

long Schedule::total_inner() const {
  return std::accumulate(counts.begin(), counts.end(), 0L);
}

nlohmann::json Schedule::to_json() const {
  return {{"etas", etas}, {"counts", counts}, {"outer", outer}};
}

Schedule Schedule::from_json(const nlohmann::json& j) {
  Schedule s;
  s.etas = j.at("etas").get<std::vector<double>>();
  s.counts = j.at("counts").get<std::vector<long>>();
  s.outer = j.value("outer", 1L);
  if (s.etas.empty() || s.etas.size() != s.counts.size())
    throw ValidationError("schedule: etas and counts must be non-empty and equal length");
  return s;
}

std::vector<double> learning_rates(const SpectrumGroups& spectrum, double eta) {
  if (!(eta > 1.0))
    throw ValidationError("learning_rates: eta must exceed 1 (rate margin eta_i <= 1/sigma_i)");
  std::vector<double> out;
  out.reserve(spectrum.group_count());
  for (double sigma : spectrum.sigma_top) out.push_back(1.0 / (eta * sigma));
  return out;
}

double coupling_factor(std::size_t i, std::size_t j, const SpectrumGroups& spectrum,
                       const std::vector<double>& etas) {
  const std::size_t m = spectrum.group_count();
  if (!(i >= 1 && i < j && j <= m))
    throw ValidationError("coupling_factor: indices must satisfy 1 <= i < j <= m");
  validate_etas(spectrum, etas);

  const double denom = coupling_denominator(spectrum, etas, i);
  if (!(denom > 0.0)) {
    std::ostringstream msg;
    msg << "coupling_factor: non-positive denominator at (i,j)=(" << i << "," << j
        << "); spectrum/rates violate the theorem's applicability";
    throw ScheduleInfeasibleError(i, j, msg.str());
  }

  const double r_i = spectrum.decay[i - 1];
  const double r_next = rate_product(spectrum, etas, i + 1, j);
  const double spread = std::abs(r_i - r_next);
  if (spread == 0.0) {
    std::ostringstream msg;
    msg << "coupling_factor: r_i coincides with R^" << j << "_" << (i + 1)
        << " (degenerate parameter choice)";
    throw DegenerateSpectrumError(msg.str());
  }

  double numerator;
  if (j == i + 1) {
    const double conv = 1.0 - r_next / spectrum.kappa[i];
    if (!(conv > 0.0)) {
      std::ostringstream msg;
      msg << "coupling_factor: rate eta_" << j << " inadmissible for group " << j;
      throw ScheduleInfeasibleError(i, j, msg.str());
    }
    numerator = -std::log(r_i) + std::log(spread / conv);
  } else {
    const double growth = std::abs(1.0 - r_next);
    if (growth == 0.0)
      throw DegenerateSpectrumError("coupling_factor: |1 - R^j_{i+1}| vanished");
    numerator = -std::log(r_i) + std::log(spread / growth);
  }
  return numerator / denom;
}

CouplingFactors coupling_factors(const SpectrumGroups& spectrum,
                                 const std::vector<double>& etas) {
  validate_etas(spectrum, etas);
  const std::size_t m = spectrum.group_count();
  CouplingFactors out;
  out.f = Eigen::MatrixXd::Zero(m, m);
  out.r = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t l = 1; l <= m; ++l)
    for (std::size_t j = 1; j <= m; ++j)
      out.r(l - 1, j - 1) = rate_product(spectrum, etas, l, j);
  for (std::size_t i = 1; i < m; ++i)
    for (std::size_t j = i + 1; j <= m; ++j)
      out.f(i - 1, j - 1) = coupling_factor(i, j, spectrum, etas);
  return out;
}

std::vector<long> iteration_counts(const SpectrumGroups& spectrum,
                                   const std::vector<double>& etas) {
  validate_etas(spectrum, etas);
  const std::size_t m = spectrum.group_count();
  std::vector<long> counts(m, 1);
  for (std::size_t i = m - 1; i >= 1; --i) {
    double sum = 0.0;
    for (std::size_t j = i + 1; j <= m; ++j)
      sum += static_cast<double>(counts[j - 1]) * coupling_factor(i, j, spectrum, etas);
    counts[i - 1] = std::max(1L, static_cast<long>(std::ceil(sum)));
  }
  return counts;
}

Schedule synthesize_schedule(const SpectrumGroups& spectrum, double eta, long outer) {
  if (outer < 1) throw ValidationError("synthesize_schedule: outer count must be positive");
  Schedule s;
  s.etas = learning_rates(spectrum, eta);
  s.counts = iteration_counts(spectrum, s.etas);
  s.outer = outer;
  s.eta_scalar = eta;
  return s;
}

double contraction_bound(const SpectrumGroups& spectrum, const Schedule& schedule) {
  if (schedule.etas.size() != spectrum.group_count() ||
      schedule.counts.size() != spectrum.group_count())
    throw ValidationError("contraction_bound: schedule/spectrum group mismatch");
  const double sigma_min = spectrum.sigma_bot.back();
  double log_bound = 0.0;
  bool exact_zero = false;
  for (std::size_t j = 0; j < schedule.etas.size(); ++j) {
    const double factor = 1.0 - schedule.etas[j] * sigma_min;
    if (factor < 0.0 || factor >= 1.0) {
      std::ostringstream msg;
      msg << "contraction_bound: factor " << factor << " for group " << (j + 1)
          << " outside [0,1); eta_j inadmissible for the smallest eigenvalue";
      throw BoundInvalidError(msg.str());
    }
    if (factor == 0.0)
      exact_zero = true;
    else
      log_bound += static_cast<double>(schedule.counts[j]) * std::log(factor);
  }
  return exact_zero ? 0.0 : std::exp(log_bound);
}

std::vector<double> group_contraction_factors(const SpectrumGroups& spectrum,
                                              const Schedule& schedule) {
  const std::size_t m = spectrum.group_count();
  if (schedule.etas.size() != m || schedule.counts.size() != m)
    throw ValidationError("group_contraction_factors: schedule/spectrum group mismatch");
  std::vector<double> c(m, 0.0);
  for (std::size_t i = 1; i <= m; ++i) {
    double log_c = 0.0;
    bool exact_zero = false;
    for (std::size_t j = 1; j <= m; ++j) {
      const double factor = (j <= i)
                                ? 1.0 - schedule.etas[j - 1] * spectrum.sigma_bot[i - 1]
                                : std::abs(1.0 - schedule.etas[j - 1] * spectrum.sigma_top[i - 1]);
      if (factor == 0.0) {
        exact_zero = true;
        break;
      }
      log_c += static_cast<double>(schedule.counts[j - 1]) * std::log(std::abs(factor));
    }
    c[i - 1] = exact_zero ? 0.0 : std::exp(log_c);
  }
  return c;
}

Corollary2Bounds corollary2_upper_bounds(double r, double eta, double kappa_c, int gap) {
  if (!(r > 0.0 && r < 1.0))
    throw ValidationError("corollary2_upper_bounds: r must lie in (0,1)");
  if (!(eta * kappa_c >= 1.0))
    throw ValidationError("corollary2_upper_bounds: eta*kappa_c must be >= 1");
  if (gap < 1) throw ValidationError("corollary2_upper_bounds: gap must be >= 1");

  const double ek = eta * kappa_c;
  const double prefactor = ek * (ek - r) / (ek * (1.0 - r) - r);

  Corollary2Bounds out;
  out.adjacent = prefactor * (-std::log(r * (ek - 1.0)) + kappa_c - eta * r - 1.0);
  // C r^k is the proof's bound -eta r^{k+1} + eta r^k / (1 - eta r^k),
  // evaluated at the requested gap k.
  const double rk = std::pow(r, gap);
  const double correction = -eta * rk * r + eta * rk / (1.0 - eta * rk);
  out.far = prefactor * (-std::log(r) + correction);
  return out;
}

ComplexityEstimates complexity_estimates(const SpectrumGroups& spectrum, double target_eps,
                                         double eta) {
  if (!(target_eps > 0.0 && target_eps < 1.0))
    throw ValidationError("complexity_estimates: target_eps must lie in (0,1)");
  const double log_eps = std::abs(std::log(target_eps));
  const double kappa_global = spectrum.global_condition_number();

  ComplexityEstimates out;
  out.gd = kappa_global * log_eps;
  out.gd_plus = std::sqrt(kappa_global) * log_eps;

  const Schedule schedule = synthesize_schedule(spectrum, eta);
  const double bound = contraction_bound(spectrum, schedule);
  const double per_cycle = std::abs(std::log(bound));
  out.mrgd = static_cast<double>(schedule.total_inner()) * log_eps / per_cycle;
  return out;
}

}  // namespace mrgd
