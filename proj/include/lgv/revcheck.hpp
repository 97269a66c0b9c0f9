#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgv/model.hpp"
#include "lgv/observable.hpp"
#include "lgv/quadrature.hpp"
#include "lgv/sde.hpp"
#include "lgv/verdict.hpp"

namespace lgv {

struct TestPair {
  Observable a, b;
};

// Time-reversal symmetry of stationary correlations, with the momentum flip P for kinetic
// states: E[A(x_t)B(x_0)] against E[(B∘P)(x_t)(A∘P)(x_0)], one verdict per pair at its worst lag.
// The threshold is bonferroni_z(pairs × lags)·SE of the batch-wise difference.
std::vector<Verdict> correlation_symmetry_test(const Ensemble& ens, const Model& m, const std::vector<TestPair>& pairs,
                                               const std::vector<double>& lags);

// ∫ A·L(B) ρ against ∫ L(A∘P)·(B∘P) ρ on a quadrature rule for ρ; tolerance relative to
// max(1, |lhs|, |rhs|).
std::vector<Verdict> generator_symmetry_quadrature(const Model& m, const PointRule& rho, const std::vector<TestPair>& pairs,
                                                   double tolerance);

// Quadrature rule for the model's stationary law: exact Gaussian for linear models
// (gh_nodes per axis), else Simpson on the Gibbs q-grid (spacing q_step, d ≤ 2) times
// Gauss–Hermite in p and z with velocity_nodes per axis (exact up to degree 2n − 1 in each).
PointRule stationary_rule(const Model& m, int gh_nodes, double q_step, int velocity_nodes);

// Overdamped only: probability flux of the stationary density on a uniform grid of
// [−half_width, half_width]^d; pass iff max|j| < 10·h².
Verdict flux_check(const Model& m, double h, double half_width);

// Evenness in p (χ² of mirrored bins), separation of variables (G-test mutual information)
// and Maxwellian p (and z) marginals (Kolmogorov–Smirnov), each over all coordinate pairs with
// a Bonferroni-corrected 1% level. Rows of `samples` are full states.
std::vector<Verdict> evenness_and_separation_test(const Mat& samples, const Model& m);
// States of every path at the last record, then every `record_gap` records earlier.
Mat phase_samples(const Ensemble& ens, long record_gap = 0);

// Discrete curl of (σσᵀ)⁻¹b (overdamped) or of the force (kinetic) at the nodes of
// [−half_width, half_width]² with spacing h; pass iff max|curl| < 10·h. Trivial for d = 1.
Verdict potential_condition_test(const Model& m, double h, double half_width);

struct ReversibilityReport {
  DynamicsKind dynamics = DynamicsKind::overdamped;
  std::string model_tag;
  std::vector<Verdict> checks;   // one summary per equivalence
  std::vector<Verdict> details;  // every underlying comparison
  bool overall() const;
};

struct RevcheckOptions {
  long n_paths = 100000;
  double dt = 0.0;          // 0: 0.01 overdamped, 0.02 underdamped, 0.0025 GLE
  double horizon = 2.0;
  double record_spacing = 0.5;
  std::vector<double> lags{0.5, 1.0};
  std::uint64_t seed = 1;
  double flux_h = 0.04, flux_half_width = 6.0;
  double curl_h = 0.05, curl_half_width = 3.0;
  int gh_nodes = 3;
  double q_step = 0.05;
  // Default pairs have degree ≤ 3 in each velocity variable once the generator is applied.
  int velocity_nodes = 2;
};

// Default polynomial test pairs for the dynamics and dimension.
std::vector<TestPair> default_test_pairs(const Model& m);

// Every applicable check for one model: correlation symmetry, generator symmetry, zero flux
// (overdamped), evenness and separation (kinetic), potential condition. Empty test_pairs selects
// default_test_pairs.
ReversibilityReport check_reversibility(const Model& m, std::string model_tag, const RevcheckOptions& opt = {},
                                        const std::vector<TestPair>& test_pairs = {});

struct BatteryEntry {
  ReversibilityReport report;
  bool expected_reversible = true;
  // Every check agrees with the expected verdict.
  bool consistent() const;
};

// {overdamped, underdamped, GLE} × {gradient, gradient + bump, rotational} in d = 2.
std::vector<BatteryEntry> reversibility_battery(const RevcheckOptions& opt = {});

}  // namespace lgv
