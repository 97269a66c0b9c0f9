#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lgv/linalg.hpp"

namespace lgv {

inline constexpr int kDefaultBatches = 32;

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

// Contiguous path blocks; batch b holds paths [n·b/nb, n·(b+1)/nb). nb is clamped to n.
int effective_batches(std::size_t n, int n_batches);
std::vector<double> batch_averages(std::span<const double> per_path, int n_batches = kDefaultBatches);
MeanSE batch_means(std::span<const double> per_path, int n_batches = kDefaultBatches);

// Rows are paths. Returns an nb × cols matrix of batch averages.
Mat batch_rows(const Mat& per_path, int n_batches = kDefaultBatches);

// Mean and standard error of the mean of independent replicate values (one per batch).
MeanSE replicate_stats(std::span<const double> values);
void column_stats(const Mat& replicates, Vec& mean, Vec& se);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
};

// Ordinary least squares; weights (if non-empty) are 1/σ² per point.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> weights = {});

// Two-sided one-sample Kolmogorov–Smirnov test.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);
double kolmogorov_sf(double lambda);

double chi2_sf(double x, double dof);
// x with chi2_sf(x, dof) = p.
double chi2_isf(double p, double dof);
double normal_cdf(double x);

// Two-sided z threshold that keeps the family-wise false-alarm rate of m comparisons at the
// single-comparison 3σ level (z = 3 for m = 1).
double bonferroni_z(int m);

}  // namespace lgv
