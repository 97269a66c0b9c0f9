#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lgv/fp.hpp"
#include "lgv/parallel.hpp"
#include "lgv/sde.hpp"

using namespace lgv;

namespace {

Model ou() {
  Model m;
  m.potential = Potential::quadratic(1, 1.0);
  return m;
}

SimConfig short_run(long paths, long steps, double dt) {
  SimConfig c;
  c.dt = dt;
  c.n_steps = steps;
  c.n_paths = paths;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("zero-noise Euler-Maruyama on OU is the geometric recursion") {
  SimConfig c = short_run(2, 50, 0.1);
  c.zero_noise = true;
  const Ensemble e = simulate_overdamped(ou(), c, InitSpec::at({2.0}));
  for (long r = 0; r < e.n_records; ++r) CHECK(e.state(1, r)[0] == doctest::Approx(2.0 * std::pow(0.9, r)));
}

TEST_CASE("zero-noise BAOAB dissipates harmonic energy") {
  Model m = ou();
  m.kind = DynamicsKind::underdamped;
  SimConfig c = short_run(1, 200, 0.01);
  c.zero_noise = true;
  const Ensemble e = simulate_underdamped(m, c, InitSpec::at({1.0, 0.0}));
  const auto energy = [&](long r) {
    const double* x = e.state(0, r);
    return 0.5 * (x[0] * x[0] + x[1] * x[1]);
  };
  // Damped oscillator with unit friction: E(2) is about e^{-2} E(0).
  CHECK(energy(e.n_records - 1) < 0.25 * energy(0));
  CHECK(energy(e.n_records - 1) > 0.05 * energy(0));
}

TEST_CASE("ensembles are identical for every thread count") {
  Model m;
  m.potential = Potential::double_well(1, 0.25, 0.5);
  const SimConfig c = short_run(37, 200, 0.01);
  set_thread_count(1);
  const Ensemble a = simulate(m, c, InitSpec::gibbs());
  set_thread_count(3);
  const Ensemble b = simulate(m, c, InitSpec::gibbs());
  set_thread_count(0);
  CHECK(a.states == b.states);
  CHECK(a.times == b.times);
}

TEST_CASE("perturbed and unperturbed runs share Brownian increments") {
  Model m = ou();
  m.perturbation = PerturbationSpec::linear({1.0}, 1.0, 0.2);
  const SimConfig c = short_run(4, 100, 0.01);
  const Ensemble a = simulate(m.unperturbed(), c, InitSpec::at({0.0}));
  const Ensemble b = simulate(m, c, InitSpec::at({0.0}));
  // Linear model: the difference is the deterministic response 0.2(1 − (1 − dt)^n).
  for (long p = 0; p < 4; ++p)
    CHECK(b.state(p, 100)[0] - a.state(p, 100)[0] == doctest::Approx(0.2 * (1 - std::pow(0.99, 100))).epsilon(1e-9));
}

TEST_CASE("noise bank coarsening sums adjacent increments") {
  const NoiseBank fine = NoiseBank::generate(5, 3, 8, 2);
  const NoiseBank coarse = fine.coarsened();
  CHECK(coarse.n_steps == 4);
  for (long p = 0; p < 3; ++p)
    for (long s = 0; s < 4; ++s)
      for (int k = 0; k < 2; ++k)
        CHECK(coarse.at(p, s)[k] ==
              doctest::Approx((fine.at(p, 2 * s)[k] + fine.at(p, 2 * s + 1)[k]) / std::sqrt(2.0)));
}

TEST_CASE("gibbs sampler reproduces the quadrature variance") {
  const GibbsMeasure g = gibbs_auto(Potential::double_well(1, 0.25, 0.5), 1.0);
  const long n = 100000;
  const auto xs = sample_gibbs(g, n, 3);
  double s2 = 0;
  for (double x : xs) s2 += x * x;
  CHECK(std::abs(s2 / n - g.variance[0]) < 5 * std::sqrt(2.0 / n) * g.variance[0] * 1.5);
}

TEST_CASE("Scharfetter-Gummel stationary state is the discrete Gibbs density") {
  Model m;
  m.potential = Potential::double_well(1, 0.25, 0.5);
  m.perturbation = PerturbationSpec::bump({0.5}, 1.5, 1.0, 0.2);
  const Grid1D g(-6, 6, 512);
  const auto a = assemble_overdamped_fp(m, g);
  const DensityField rho = stationary_solve(a);
  const DensityField gibbs = discrete_gibbs(m.effective_potential(), m.beta, g);
  CHECK(distance(rho, gibbs, NormTag::l1) < 1e-10);
  CHECK(residual(a, gibbs).relative < 1e-13);
  for (double s : a.column_sums()) CHECK(std::abs(s) < 1e-9 * a.norm_inf());
}

TEST_CASE("Crank-Nicolson steps conserve mass") {
  const Grid1D g(-6, 6, 256);
  const auto a = assemble_overdamped_fp(ou(), g);
  DensityField rho;
  rho.axes = {g};
  rho.values.assign(g.n, 0.0);
  for (std::size_t i = 100; i < 120; ++i) rho.values[i] = 1.0;
  rho.normalize();
  for (int k = 0; k < 50; ++k) rho = step_fp(a, rho, 0.05);
  CHECK(rho.mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("OU relaxation rate is the spectral gap 1") {
  const Grid1D g(-8, 8, 1024);
  Model shifted = ou();
  shifted.perturbation = PerturbationSpec::linear({1.0}, 1.0, 0.5);
  const auto a0 = assemble_overdamped_fp(ou(), g);
  const DensityField start = stationary_solve(assemble_overdamped_fp(shifted, g));
  const DensityField target = stationary_solve(a0);
  const DecaySeries d = decay_1d(a0, start, target, 0.01, 8.0, 10);
  const RateFit f = fit_rate(d.t, d.l1);
  CHECK(f.rate == doctest::Approx(1.0).epsilon(0.02));
  CHECK(f.r_squared > 0.999);
}

TEST_CASE("kinetic operator conserves mass and fixes the phase-space Gibbs density") {
  Model m = ou();
  m.kind = DynamicsKind::underdamped;
  Grid2D g{Grid1D(-6, 6, 64), Grid1D(-6, 6, 64)};
  const auto k = assemble_kinetic_fp(m, g);
  for (double s : kinetic_column_sums(k)) CHECK(std::abs(s) < 1e-9);
  const DensityField gibbs = discrete_phase_gibbs(m.potential, 1.0, g);
  const DensityField stat = kinetic_stationary(k);
  CHECK(distance(stat, gibbs, NormTag::l1) < 0.02);
  DensityField rho = gibbs;
  for (int i = 0; i < 20; ++i) rho = step_kinetic(k, rho, 0.02);
  CHECK(rho.mass() == doctest::Approx(1.0).epsilon(1e-12));
}
