#pragma once

#include <string>
#include <vector>

#include "lgv/linalg.hpp"
#include "lgv/model.hpp"
#include "lgv/observable.hpp"
#include "lgv/quadrature.hpp"
#include "lgv/sde.hpp"
#include "lgv/stats.hpp"

namespace lgv {

// K_AB(lag) = E[A(x_lag) B(x_0)] at stationarity.
struct CorrelationSeries {
  std::vector<double> lags;
  std::vector<double> values;
  std::vector<double> se;
  std::string a_tag, b_tag;
  std::vector<long> n_samples_per_lag;  // paths × time origins
  Mat batches;                          // batch averages, rows batches, columns lags; may be empty
};

struct CorrelationOptions {
  bool check_stationarity = true;
  int n_batches = kDefaultBatches;
};

// Averages over every valid time origin and all paths; SE from path-level batch means.
CorrelationSeries autocorrelation(const Ensemble& ens, const Observable& a, const Observable& b, double max_lag,
                                  const CorrelationOptions& opt = {});

struct Truncation {
  enum class Kind { fixed_T, auto_tail } kind = Kind::auto_tail;
  double t_max = 0.0;  // fixed_T only

  static Truncation fixed(double t) { return {Kind::fixed_T, t}; }
  static Truncation automatic() { return {}; }
};

struct GKResult {
  double value = 0.0;
  double se = 0.0;
  double tail = 0.0;       // exponential remainder added beyond the cut
  double t_cut = 0.0;
  double tail_rate = 0.0;  // fitted decay rate; 0 for fixed_T
  Vec batch_values;        // per-batch integrals including the same tail; empty without batches

  double tail_fraction() const { return value != 0.0 ? tail / value : 0.0; }
};

// ∫₀^∞ K by trapezoid. auto_tail cuts at the first lag with |K| < 2·SE and adds K̂(t_cut)/λ
// from an exponential fit over the resolved lags in [t_cut/2, t_cut); no tail when fewer than
// two lags there are resolved.
GKResult gk_integral(const CorrelationSeries& k, const Truncation& trunc = {});

// (σσᵀ)_ij = β ∫₀^∞ E[(σσᵀ∇V)_i(q_s) (σσᵀ∇V)_j(q_0)] ds from a stationary overdamped ensemble.
GKResult diffusion_coefficient(const Ensemble& ens, const Model& m, int i, int j, double max_lag,
                               const Truncation& trunc = {});

// Gibbs quadrature of the unperturbed potential on an automatically chosen grid (d ≤ 2).
PointRule gibbs_quadrature(const Potential& v, double beta);

struct GKCheck {
  double integral = 0.0;     // −∫K_{L₀g, L₀W}
  double integral_se = 0.0;
  double quadrature = 0.0;   // ∫W L₀g ρ₀
  double tolerance = 0.0;
  bool pass = false;
  GKResult gk;
};

// Both sides of the Green–Kubo identity for an overdamped gradient model and observable g on q.
GKCheck gk_check(const Ensemble& ens, const Model& m, const Observable& g, const PerturbationSpec& w, double max_lag,
                 double abs_floor = 0.02, const Truncation& trunc = {});

struct OnsagerResult {
  std::vector<double> eps;   // as given, followed by 0
  std::vector<double> values;
  std::vector<double> se;
  std::vector<double> gaps;  // values[i] − values[ε = 0]
  std::vector<double> gap_se;
  bool monotone = false;     // |gap| non-increasing as ε decreases, 1·SE slack
  bool final_gap_ok = false; // smallest ε gap within max(3·SE, 1e−3·|value at 0|)
  bool pass() const { return monotone && final_gap_ok; }
};

// −∫K^ε_{L_ε g, L_ε W} for ε in eps_list (decreasing) and ε = 0, each from a run of the ε-perturbed
// overdamped dynamics started in its own Gibbs state ρ_∞^ε. All runs share cfg.seed.
OnsagerResult onsager_regression_check(const Model& m, const Observable& g, const std::vector<double>& eps_list,
                                       const SimConfig& cfg, double max_lag, const Truncation& trunc = {});

}  // namespace lgv
