#pragma once

#include <string>
#include <vector>

#include "lgv/linalg.hpp"
#include "lgv/model.hpp"
#include "lgv/observable.hpp"
#include "lgv/quadrature.hpp"
#include "lgv/sde.hpp"
#include "lgv/stats.hpp"
#include "lgv/verdict.hpp"

namespace lgv {

struct ResponseCurve {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> se;
  double epsilon = 0.0;
  long n_paths = 0;
  std::string estimator_tag;  // paired_crn | independent | predictor
  // Batch averages (rows: batches of paths, columns: times). Batch b always holds the same
  // path indices, so curves from runs sharing a seed can be combined batch by batch.
  Mat batches;
};

// Rows paths, columns records.
Mat evaluate_on(const Ensemble& ens, const Observable& f);

// Per path, the time-origin average of later(o + k)·origin(o) for lags k = 0..n_lags.
Mat lagged_means(const Mat& later, const Mat& origin, long n_lags);

// Mean drift of f between the two halves of each path, against its batch-means SE.
// Throws NotStationary when |drift| > 4·SE.
void check_stationary(const Mat& per_record, const std::string& what, int n_batches = kDefaultBatches);

struct ResponseOptions {
  bool paired = true;  // common random numbers; otherwise the unperturbed run uses another seed
  // Replace the unperturbed ensemble mean by this quadrature value of ∫φρ₀.
  std::optional<double> reference_mean;
  int n_batches = kDefaultBatches;
};

// R(t, ε; φ) = (E_ε[φ(x_t)] − E_0[φ(x_t)]) / ε from Gibbs-initialized runs; the division by ε is
// applied per path after differencing. The model carries ε in its perturbation.
ResponseCurve estimate_response(const Model& m, const Observable& phi, const SimConfig& cfg,
                                const ResponseOptions& opt = {});

// Conjugate observable for the model's dynamics: overdamped β σσᵀM·∇V − ∇·(σσᵀM);
// underdamped and GLE β M·p.
Observable conjugate_observable(const Model& m);

struct PredictOptions {
  double max_lag = -1.0;  // default: half the horizon
  int n_batches = kDefaultBatches;
  bool check_stationarity = true;
  // The lag integral uses the trapezoid rule on the record grid; reported lags are every
  // output_every-th record, so the quadrature grid can be finer than the output grid.
  long output_every = 1;
};

// ∫₀ᵗ E_ρ₀[h(x₀)(φ(x_s) − φ̄)] ds from one unperturbed stationary run, averaged over time
// origins. SE from batch means of per-path cumulative curves.
ResponseCurve predict_response(const Model& m, const Observable& phi, const SimConfig& cfg,
                               const PredictOptions& opt = {});

struct GateauxValue {
  double value = 0.0;
  double error_estimate = 0.0;  // Richardson: |I_h − I_2h| / 15
};

// β Cov_ρ₀(φ, W) by Simpson quadrature on the grid (n divisible by 4).
GateauxValue stationary_gateaux(const Potential& v, const PerturbationSpec& w, const Observable& phi, double beta,
                                const Grid1D& grid);
GateauxValue stationary_gateaux(const Potential& v, const PerturbationSpec& w, const Observable& phi, double beta,
                                const Grid2D& grid);

// E_{exp(−βU)}[φ] on a grid; U and φ act on q only.
double stationary_expectation(const Potential& u, const Observable& phi, double beta, const Grid1D& grid);

struct DoubleLimitOptions {
  double plateau_start = -1.0;  // default: last third of t_list
  double abs_floor = 0.02;
  // Default: the table config with twice the horizon and seed + 1.
  std::optional<SimConfig> predictor_cfg;
  std::optional<Grid1D> gateaux_grid;
};

struct DoubleLimitResult {
  std::vector<double> eps_list;
  std::vector<double> t_list;
  Mat values;  // rows ε, columns t
  Mat se;
  std::vector<double> row_limits;      // t → ∞ per ε (plateau means)
  std::vector<double> row_limit_se;
  std::vector<double> column_limits;   // ε → 0 per t (regression intercepts)
  std::vector<double> column_limit_se;
  ResponseCurve predictor;
  double limit_t_then_eps = 0.0, limit_t_then_eps_se = 0.0;
  double limit_eps_then_t = 0.0, limit_eps_then_t_se = 0.0;
  std::optional<double> gateaux;
  std::vector<Verdict> verdicts;
  bool pass() const;
};

DoubleLimitResult double_limit_table(const Model& m, const Observable& phi, const std::vector<double>& eps_list,
                                     const std::vector<double>& t_list, const SimConfig& cfg,
                                     const DoubleLimitOptions& opt = {});

}  // namespace lgv
