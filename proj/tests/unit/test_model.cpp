#include <doctest.h>

#include <cmath>

#include "lgv/error.hpp"
#include "lgv/model.hpp"
#include "lgv/observable.hpp"
#include "lgv/quadrature.hpp"

using namespace lgv;

TEST_CASE("bump is smooth, compactly supported and peaks at amplitude/e") {
  const Bump b{{0.5}, 1.5, 2.0};
  const double c[1] = {0.5}, out[1] = {2.0001}, edge[1] = {1.999};
  CHECK(b.value(c) == doctest::Approx(2.0 * std::exp(-1.0)));
  CHECK(b.value(out) == 0.0);
  CHECK(b.value(edge) < 1e-200);
  // Gradient against a central difference.
  const double q[1] = {1.1};
  double g = 0.0;
  b.gradient(q, &g);
  const double h = 1e-6, qp[1] = {1.1 + h}, qm[1] = {1.1 - h};
  CHECK(g == doctest::Approx((b.value(qp) - b.value(qm)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("gibbs normalization of a quadratic matches the Gaussian constant") {
  const Potential v = Potential::quadratic(1, 2.0);
  const GibbsMeasure m = gibbs_normalize(v, 0.5, Grid1D(-20, 20, 4000));
  CHECK(m.logZ == doctest::Approx(0.5 * std::log(2 * M_PI / (0.5 * 2.0))).epsilon(1e-10));
  CHECK(m.variance[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("double-well gibbs measure is symmetric with the quadrature variance") {
  const Potential v = Potential::double_well(1, 0.25, 0.5);
  const GibbsMeasure m = gibbs_auto(v, 1.0);
  CHECK(std::abs(m.mean[0]) < 1e-10);
  // Independent oracle: midpoint rule on [−8, 8].
  double z = 0, s2 = 0;
  for (int i = 0; i < 200000; ++i) {
    const double q = -8 + (i + 0.5) * 16.0 / 200000;
    const double w = std::exp(-(0.25 * q * q * q * q - 0.5 * q * q));
    z += w;
    s2 += w * q * q;
  }
  CHECK(m.variance[0] == doctest::Approx(s2 / z).epsilon(1e-8));
}

TEST_CASE("linear stationary law: rotation leaves the overdamped Gibbs covariance unchanged") {
  Model m;
  m.potential = Potential::quadratic(2, 1.0);
  m.sigma = DiffusionMatrix::identity(2);
  m.rotation = 0.7;
  m.beta = 2.0;
  const auto s = linear_stationary(m);
  REQUIRE(s);
  CHECK((s->cov - Mat::Identity(2, 2) / 2.0).norm() < 1e-12);
}

TEST_CASE("linear stationary law of underdamped and GLE models is the Gibbs Gaussian") {
  Model m;
  m.kind = DynamicsKind::underdamped;
  m.potential = Potential::quadratic(1, 4.0);
  const auto s = linear_stationary(m);
  REQUIRE(s);
  CHECK(s->cov(0, 0) == doctest::Approx(0.25));
  CHECK(s->cov(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(s->cov(0, 1)) < 1e-12);
  m.kind = DynamicsKind::gle_augmented;
  const auto g = linear_stationary(m);
  REQUIRE(g);
  CHECK((g->cov - Eigen::Vector3d(0.25, 1.0, 1.0).asDiagonal().toDenseMatrix()).norm() < 1e-10);
}

TEST_CASE("linear perturbation shifts the stationary mean") {
  Model m;
  m.potential = Potential::quadratic(1, 1.0);
  m.perturbation = PerturbationSpec::linear({1.0}, 1.0, 0.3);
  const auto s = linear_stationary(m);
  REQUIRE(s);
  CHECK(s->mean[0] == doctest::Approx(0.3));
}

TEST_CASE("overdamped conjugate observable has zero Gibbs mean") {
  const Potential v = Potential::double_well(1, 0.25, 0.5);
  const auto w = PerturbationSpec::bump({0.3}, 1.5, 1.0, 0.1);
  const auto h = conjugate_observable_overdamped(w, v, DiffusionMatrix::identity(1), 1.0);
  const auto rule = gibbs_rule([&](const double* q) { return v.value(q); }, 1.0, Grid1D(-6, 6, 2400));
  CHECK(std::abs(expectation(rule, h)) < 1e-8);
}

TEST_CASE("assumption probes: confining quartic passes, flat potential fails") {
  const auto ok = verify_assumptions(Potential::double_well(1, 0.25, 0.5), DiffusionMatrix::identity(1), 1.0, 5.0);
  CHECK(ok.pass_I);
  CHECK(ok.pass_II);
  const auto bad = verify_assumptions(Potential::zero(1), DiffusionMatrix::identity(1), 1.0, 5.0);
  CHECK_FALSE(bad.pass_I);
}

TEST_CASE("polynomial parsing and generator action") {
  Model m;
  m.potential = Potential::quadratic(1, 1.0);
  m.beta = 2.0;
  const Observable f = Observable::parse("q^2", 1, 1);
  const Observable lf = apply_generator(m, f);
  // L q² = −2q² + 2/β for dq = −q dt + √(2/β) dB.
  for (double q : {-1.5, 0.0, 0.7}) CHECK(lf(&q) == doctest::Approx(-2 * q * q + 1.0));
  const Observable g = carre_du_champ(m, Observable::parse("q", 1, 1), Observable::parse("q", 1, 1));
  const double x = 0.3;
  CHECK(g(&x) == doctest::Approx(1.0));
  CHECK(Observable::parse("(q1+2*p2)^2 - q1*q1", 2, 4)(std::array<double, 4>{1, 9, 9, 3}.data()) ==
        doctest::Approx(48.0));
}

TEST_CASE("invalid inputs raise typed errors") {
  CHECK_THROWS_AS(Observable::parse("q3", 2, 2), Error);
  CHECK_THROWS_AS(DiffusionMatrix(Mat::Zero(2, 2)), Error);
  Model m;
  m.potential = Potential::quadratic(1, 1.0);
  m.rotation = 0.5;
  CHECK_THROWS_AS(m.validate(), Error);
}
