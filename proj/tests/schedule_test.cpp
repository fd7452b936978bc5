#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "mrgd/errors.hpp"
#include "mrgd/rng.hpp"
#include "mrgd/schedule.hpp"
#include "mrgd/spectrum.hpp"

using namespace mrgd;

namespace {

SpectrumGroups two_group_spectrum() {
  return groups_from_sizes({1.0, 0.9, 0.001, 0.0009}, {2, 2});
}

// Assumption-2 style spectrum: sigma_{i,1} = r^{i-1}, kappa_i = kappa_c, with
// two eigenvalues per group.
SpectrumGroups assumption2_spectrum(std::size_t m, double r, double kappa_c) {
  std::vector<double> eig;
  for (std::size_t i = 0; i < m; ++i) {
    const double top = std::pow(r, static_cast<double>(i));
    eig.push_back(top);
    eig.push_back(top / kappa_c);
  }
  return groups_from_sizes(eig, std::vector<std::size_t>(m, 2));
}

}  // namespace

TEST_CASE("learning rates match the appendix choices") {
  SUBCASE("two-scale") {
    const auto etas = learning_rates(groups_from_sizes({1.0, 0.001}, {1, 1}), 2.0);
    CHECK(etas[0] == doctest::Approx(0.5));
    CHECK(etas[1] == doctest::Approx(500.0));
  }
  SUBCASE("three-scale") {
    const auto etas = learning_rates(groups_from_sizes({1.0, 0.1, 0.01}, {1, 1, 1}), 2.0);
    CHECK(etas[0] == doctest::Approx(0.5));
    CHECK(etas[1] == doctest::Approx(5.0));
    CHECK(etas[2] == doctest::Approx(50.0));
  }
  SUBCASE("single group near-optimal rate") {
    const auto etas = learning_rates(groups_from_sizes({1.0}, {1}), 1.0 + 1e-9);
    CHECK(etas[0] == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("eta at or below 1 is rejected") {
    CHECK_THROWS_AS(learning_rates(two_group_spectrum(), 1.0), ValidationError);
    CHECK_THROWS_AS(learning_rates(two_group_spectrum(), 0.5), ValidationError);
  }
  SUBCASE("every rate respects eta_j <= 1/sigma_j") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
      const auto s = assumption2_spectrum(3, rng.uniform(0.001, 0.1), rng.uniform(1.0, 3.0));
      const double eta = rng.uniform(1.0 + 1e-6, 3.0);
      const auto etas = learning_rates(s, eta);
      for (std::size_t j = 0; j < etas.size(); ++j) CHECK(etas[j] <= 1.0 / s.sigma_top[j]);
    }
  }
}

TEST_CASE("coupling factor reproduces the frozen two-group value") {
  // Independent evaluation of the closed form gives numerator 6.8104430965,
  // denominator 0.5973868995, ratio 11.4003890987.
  const SpectrumGroups s = two_group_spectrum();
  const auto etas = learning_rates(s, 2.0);
  const double f12 = coupling_factor(1, 2, s, etas);
  CHECK(f12 == doctest::Approx(11.4003890987).epsilon(1e-9));

  const CouplingFactors cf = coupling_factors(s, etas);
  CHECK(cf.f(0, 1) == doctest::Approx(f12));
  CHECK(cf.r(1, 1) == doctest::Approx(0.5));       // R_2^2 = eta_2 sigma_2
  CHECK(cf.r(0, 1) == doctest::Approx(500.0));     // R_1^2 = eta_2 sigma_1
  CHECK(cf.r(1, 0) == doctest::Approx(0.0005));    // R_2^1 = eta_1 sigma_2
}

TEST_CASE("coupling factor index and degeneracy handling") {
  const SpectrumGroups s = two_group_spectrum();
  const auto etas = learning_rates(s, 2.0);
  CHECK_THROWS_AS(coupling_factor(2, 1, s, etas), ValidationError);
  CHECK_THROWS_AS(coupling_factor(1, 1, s, etas), ValidationError);
  CHECK_THROWS_AS(coupling_factor(1, 3, s, etas), ValidationError);

  // A manual first rate above 1/sigma_{1,d_1} breaks the denominator.
  CHECK_THROWS_AS(coupling_factor(1, 2, s, std::vector<double>{2.0, 500.0}),
                  ScheduleInfeasibleError);
  try {
    coupling_factor(1, 2, s, {2.0, 500.0});
  } catch (const ScheduleInfeasibleError& e) {
    CHECK(e.group_i == 1);
    CHECK(e.group_j == 2);
  }

  // |r_1 - R^2_2| == 0 exactly: r = 0.5 with eta_2 = 1/(2 sigma_2).
  const SpectrumGroups knife = groups_from_sizes({1.0, 0.5}, {1, 1});
  CHECK_THROWS_AS(coupling_factor(1, 2, knife, learning_rates(knife, 2.0)),
                  DegenerateSpectrumError);
}

TEST_CASE("iteration counts: frozen example, single group, and limit") {
  SUBCASE("two-group example") {
    const SpectrumGroups s = two_group_spectrum();
    const auto counts = iteration_counts(s, learning_rates(s, 2.0));
    REQUIRE(counts.size() == 2);
    CHECK(counts[0] == 12);  // ceil(11.4004)
    CHECK(counts[1] == 1);
  }
  SUBCASE("single group has the empty sum") {
    const SpectrumGroups s = groups_from_sizes({1.0, 0.8}, {2});
    const auto counts = iteration_counts(s, learning_rates(s, 2.0));
    REQUIRE(counts.size() == 1);
    CHECK(counts[0] == 1);
  }
  SUBCASE("near-degenerate limit drives total n towards m") {
    // As eta -> 1+ and kappa_c -> 1+ the coupling factors tend to 1 and 0, so
    // each count collapses to its floor; convergence is logarithmic, so at
    // 1e-4 offsets F_{i,i+1} is still ~1.27 and the ceiling gives 2.
    const SpectrumGroups s = assumption2_spectrum(3, 0.1, 1.0 + 1e-4);
    const auto counts = iteration_counts(s, learning_rates(s, 1.0 + 1e-4));
    CHECK(counts[2] == 1);
    CHECK(counts[1] <= 2);
    CHECK(counts[0] <= 4);
  }
}

TEST_CASE("coupling factor limits via denominator extrapolation") {
  // F(eta) = limit + a/D(eta) with D the shared Theorem-2 denominator, so a
  // two-point fit in 1/D anchored at eta = kappa_c = 1+1e-4 recovers the
  // limit to ~5e-4 even though the direct value there is still ~1.27.
  for (double r : {0.1, 0.01}) {
    double f[2], dinv[2];
    int k = 0;
    for (double offset : {1e-3, 1e-4}) {
      const double eta = 1.0 + offset;
      const SpectrumGroups s = assumption2_spectrum(3, r, eta);
      const auto etas = learning_rates(s, eta);
      const double upper = 1.0 - etas[0] * s.sigma_bot[1];
      const double lower = 1.0 - etas[0] * s.sigma_bot[0];
      dinv[k] = 1.0 / std::log(upper / lower);
      f[k] = coupling_factor(1, 2, s, etas);
      ++k;
    }
    const double slope = (f[1] - f[0]) / (dinv[1] - dinv[0]);
    const double adjacent_limit = f[1] - slope * dinv[1];
    CHECK(std::abs(adjacent_limit - 1.0) < 1e-2);

    k = 0;
    for (double offset : {1e-3, 1e-4}) {
      const double eta = 1.0 + offset;
      const SpectrumGroups s = assumption2_spectrum(3, r, eta);
      const auto etas = learning_rates(s, eta);
      const double upper = 1.0 - etas[0] * s.sigma_bot[1];
      const double lower = 1.0 - etas[0] * s.sigma_bot[0];
      dinv[k] = 1.0 / std::log(upper / lower);
      f[k] = coupling_factor(1, 3, s, etas);
      ++k;
    }
    const double far_slope = (f[1] - f[0]) / (dinv[1] - dinv[0]);
    const double far_limit = f[1] - far_slope * dinv[1];
    CHECK(std::abs(far_limit) < 1e-2);
  }
}

TEST_CASE("contraction bound on the frozen example and corollary-1 cap") {
  const SpectrumGroups s = two_group_spectrum();
  const Schedule schedule = synthesize_schedule(s, 2.0);
  const double bound = contraction_bound(s, schedule);
  CHECK(bound == doctest::Approx(0.5470373397).epsilon(1e-9));
  CHECK(bound <= 1.0 - 1.0 / (2.0 * (1.0 / 0.9)) + 1e-12);  // 1 - 1/(eta kappa_c) = 0.55
}

TEST_CASE("contraction bound: one-step convergence and invalid factors") {
  const SpectrumGroups s = groups_from_sizes({1.0}, {1});
  Schedule exact;
  exact.etas = {1.0};
  exact.counts = {1};
  CHECK(contraction_bound(s, exact) == 0.0);

  Schedule too_big;
  too_big.etas = {1.5};
  too_big.counts = {1};
  CHECK_THROWS_AS(contraction_bound(s, too_big), BoundInvalidError);

  Schedule negative;
  negative.etas = {-0.5};
  negative.counts = {1};
  CHECK_THROWS_AS(contraction_bound(s, negative), BoundInvalidError);
}

TEST_CASE("group contraction factors are ordered and end at the bound") {
  Rng rng(19);
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = 2 + rng.uniform_int(0, 2);
    const double r = std::pow(10.0, rng.uniform(-4.0, -1.0));
    const double kappa_c = rng.uniform(1.0, 3.0);
    const double eta = rng.uniform(1.0 + 1e-9, 3.0);
    const SpectrumGroups s = assumption2_spectrum(m, r, kappa_c);
    const Schedule schedule = synthesize_schedule(s, eta);
    const auto c = group_contraction_factors(s, schedule);
    REQUIRE(c.size() == m);
    for (std::size_t i = 0; i + 1 < m; ++i) CHECK(c[i] <= c[i + 1] * (1.0 + 1e-12));
    CHECK(c.back() == doctest::Approx(contraction_bound(s, schedule)).epsilon(1e-12));
  }
}

TEST_CASE("raising any count never increases c_m") {
  const SpectrumGroups s = assumption2_spectrum(3, 0.01, 1.5);
  Schedule schedule = synthesize_schedule(s, 2.0);
  const double base = contraction_bound(s, schedule);
  for (std::size_t i = 0; i + 1 < schedule.counts.size(); ++i) {
    Schedule bumped = schedule;
    bumped.counts[i] += 5;
    CHECK(contraction_bound(s, bumped) <= base + 1e-15);
  }
}

TEST_CASE("corollary-2 bounds dominate the exact factors") {
  // Frozen from the same independent evaluation: adjacent bound 15.1622706404
  // at (r=0.001, eta=2, kappa_c=10/9).
  const Corollary2Bounds b = corollary2_upper_bounds(0.001, 2.0, 10.0 / 9.0, 1);
  CHECK(b.adjacent == doctest::Approx(15.1622706404).epsilon(1e-9));
  CHECK(b.adjacent >= 11.4003890987);

  // gap=3, r=0.01: the correction term C r^3 is ~2e-6, so the far bound is
  // the |log r| leading term to six digits.
  const Corollary2Bounds far = corollary2_upper_bounds(0.01, 2.0, 10.0 / 9.0, 3);
  const double prefactor = (2.0 * 10.0 / 9.0) * (2.0 * 10.0 / 9.0 - 0.01) /
                           ((2.0 * 10.0 / 9.0) * 0.99 - 0.01);
  CHECK(far.far == doctest::Approx(prefactor * (-std::log(0.01))).epsilon(1e-5));
  CHECK(far.far - prefactor * (-std::log(0.01)) <= prefactor * 2.1e-6);

  CHECK_THROWS_AS(corollary2_upper_bounds(1.5, 2.0, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(corollary2_upper_bounds(0.01, 0.5, 1.0, 1), ValidationError);
}

TEST_CASE("corollary-2 bounds grow like |log r| as r -> 0") {
  // Both bounds should be affine in |log r| with slope near the r->0
  // prefactor eta*kappa_c... limit, here (1.5*1.2)^2/(1.5*1.2) = 1.8.
  const double f1 = corollary2_upper_bounds(1e-3, 1.5, 1.2, 1).adjacent;
  const double f2 = corollary2_upper_bounds(1e-6, 1.5, 1.2, 1).adjacent;
  const double slope = (f2 - f1) / (std::abs(std::log(1e-6)) - std::abs(std::log(1e-3)));
  CHECK(slope == doctest::Approx(1.8).epsilon(0.05));
  const double g1 = corollary2_upper_bounds(1e-3, 1.5, 1.2, 2).far;
  const double g2 = corollary2_upper_bounds(1e-6, 1.5, 1.2, 2).far;
  const double far_slope = (g2 - g1) / (std::abs(std::log(1e-6)) - std::abs(std::log(1e-3)));
  CHECK(far_slope == doctest::Approx(1.8).epsilon(0.05));
}

TEST_CASE("complexity estimates: frozen m=2 example and edge cases") {
  const SpectrumGroups s = two_group_spectrum();
  const ComplexityEstimates est = complexity_estimates(s, 1e-8, 2.0);
  CHECK(est.gd == doctest::Approx(20467.423049).epsilon(1e-6));
  CHECK(est.gd_plus == doctest::Approx(614.022691).epsilon(1e-6));
  CHECK(est.mrgd == doctest::Approx(396.972279).epsilon(1e-6));

  // Single group: gd = kappa |log eps|, mrgd within the eta factor.
  const SpectrumGroups single = groups_from_sizes({1.0, 0.9}, {2});
  const ComplexityEstimates se = complexity_estimates(single, 1e-8, 2.0);
  CHECK(se.gd == doctest::Approx((1.0 / 0.9) * std::abs(std::log(1e-8))));
  CHECK(se.mrgd / se.gd > 1.0);
  CHECK(se.mrgd / se.gd < 2.5);

  // Three-scale r=0.1: gd carries the r^{-2} factor.
  const SpectrumGroups three = assumption2_spectrum(3, 0.1, 1.1);
  const ComplexityEstimates te = complexity_estimates(three, 1e-8, 2.0);
  CHECK(te.gd == doctest::Approx(1.1 * 100.0 * std::abs(std::log(1e-8))).epsilon(1e-9));
  CHECK(te.mrgd < te.gd);
}

TEST_CASE("schedule json round trip") {
  const SpectrumGroups s = two_group_spectrum();
  Schedule schedule = synthesize_schedule(s, 2.0, 7);
  const Schedule back = Schedule::from_json(schedule.to_json());
  CHECK(back.etas == schedule.etas);
  CHECK(back.counts == schedule.counts);
  CHECK(back.outer == 7);
}
