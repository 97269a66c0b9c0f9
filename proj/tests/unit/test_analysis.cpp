#include <doctest.h>

#include <cmath>

#include "lgv/greenkubo.hpp"
#include "lgv/response.hpp"
#include "lgv/revcheck.hpp"

using namespace lgv;

TEST_CASE("stationary Gateaux derivative of the OU mean under a linear tilt is 1") {
  const auto w = PerturbationSpec::linear({1.0}, 1.0, 0.1);
  const auto g = stationary_gateaux(Potential::quadratic(1, 1.0), w, Observable::parse("q", 1, 1), 1.0,
                                    Grid1D(-12, 12, 2400));
  CHECK(g.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("stationary Gateaux derivative matches an independent midpoint covariance") {
  const auto w = PerturbationSpec::bump({0.3}, 1.5, 1.0, 0.1);
  const auto g = stationary_gateaux(Potential::double_well(1, 0.25, 0.5), w, Observable::parse("q^2", 1, 1), 2.0,
                                    Grid1D(-6, 6, 2400));
  double z = 0, ew = 0, ef = 0, efw = 0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double q = -6 + (i + 0.5) * 12.0 / n;
    const double rho = std::exp(-2.0 * (0.25 * q * q * q * q - 0.5 * q * q));
    const double s = (q - 0.3) * (q - 0.3) / 2.25;
    const double wq = s < 1 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
    z += rho;
    ew += rho * wq;
    ef += rho * q * q;
    efw += rho * q * q * wq;
  }
  const double cov = efw / z - (ef / z) * (ew / z);
  CHECK(g.value == doctest::Approx(2.0 * cov).epsilon(1e-7));
}

TEST_CASE("Green-Kubo integral of an exact exponential correlation") {
  CorrelationSeries k;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.05 * i;
    k.lags.push_back(t);
    k.values.push_back(std::exp(-t));
    k.se.push_back(0.01);
  }
  const GKResult fixed = gk_integral(k, Truncation::fixed(5.0));
  // Trapezoid on [0, 5]: (1 − e^{−5}) plus the O(h²/12) rule error.
  CHECK(fixed.value == doctest::Approx(1 - std::exp(-5.0)).epsilon(5e-4));
  CHECK(fixed.tail == 0.0);
  const GKResult tail = gk_integral(k);
  CHECK(tail.t_cut < 5.0);
  CHECK(tail.tail_rate == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(tail.value == doctest::Approx(1.0).epsilon(5e-4));
}

TEST_CASE("potential condition separates gradient from rotational drifts") {
  Model m;
  m.potential = Potential::double_well(2, 0.25, 0.5);
  m.sigma = DiffusionMatrix::identity(2);
  CHECK(potential_condition_test(m, 0.05, 3.0).pass);
  m.rotation = 0.3;
  CHECK_FALSE(potential_condition_test(m, 0.05, 3.0).pass);
}

TEST_CASE("generator symmetry holds exactly for OU and fails with rotation") {
  Model m;
  m.potential = Potential::quadratic(2, 1.0);
  m.sigma = DiffusionMatrix::identity(2);
  const auto pairs = default_test_pairs(m);
  const auto ok = generator_symmetry_quadrature(m, stationary_rule(m, 3, 0.05, 2), pairs, 1e-8);
  for (const auto& v : ok) CHECK(v.pass);
  m.rotation = 0.3;
  const auto bad = generator_symmetry_quadrature(m, stationary_rule(m, 3, 0.05, 2), pairs, 1e-8);
  bool any_fail = false;
  for (const auto& v : bad) any_fail |= !v.pass;
  CHECK(any_fail);
}

TEST_CASE("generator symmetry of underdamped OU uses the momentum flip") {
  Model m;
  m.kind = DynamicsKind::underdamped;
  m.potential = Potential::quadratic(1, 2.0);
  for (const auto& v : generator_symmetry_quadrature(m, stationary_rule(m, 4, 0.05, 2), default_test_pairs(m), 1e-8))
    CHECK(v.pass);
}

TEST_CASE("stationary flux vanishes for a 1D gradient model") {
  Model m;
  m.potential = Potential::double_well(1, 0.25, 0.5);
  CHECK(flux_check(m, 0.04, 6.0).pass);
}
