#include "lgv/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "lgv/error.hpp"

namespace lgv {

int effective_batches(std::size_t n, int n_batches) {
  require(n > 0, "batch means need at least one sample");
  return static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, n_batches))));
}

std::vector<double> batch_averages(std::span<const double> per_path, int n_batches) {
  const std::size_t n = per_path.size();
  const int nb = effective_batches(n, n_batches);
  std::vector<double> out(nb, 0.0);
  for (int b = 0; b < nb; ++b) {
    const std::size_t lo = n * b / nb, hi = n * (b + 1) / nb;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += per_path[i];
    out[b] = s / static_cast<double>(hi - lo);
  }
  return out;
}

MeanSE batch_means(std::span<const double> per_path, int n_batches) {
  // Overall mean is the plain path mean; batches only feed the spread.
  MeanSE r;
  double s = 0.0;
  for (double v : per_path) s += v;
  r.mean = s / static_cast<double>(per_path.size());
  const auto avg = batch_averages(per_path, n_batches);
  r.se = replicate_stats(avg).se;
  return r;
}

Mat batch_rows(const Mat& per_path, int n_batches) {
  const auto n = static_cast<std::size_t>(per_path.rows());
  const int nb = effective_batches(n, n_batches);
  Mat out(nb, per_path.cols());
  for (int b = 0; b < nb; ++b) {
    const auto lo = static_cast<Eigen::Index>(n * b / nb), hi = static_cast<Eigen::Index>(n * (b + 1) / nb);
    out.row(b) = per_path.middleRows(lo, hi - lo).colwise().mean();
  }
  return out;
}

MeanSE replicate_stats(std::span<const double> values) {
  MeanSE r;
  const double n = static_cast<double>(values.size());
  for (double v : values) r.mean += v;
  r.mean /= n;
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

void column_stats(const Mat& replicates, Vec& mean, Vec& se) {
  const double n = static_cast<double>(replicates.rows());
  mean = replicates.colwise().mean().transpose();
  se = Vec::Zero(replicates.cols());
  if (replicates.rows() < 2) return;
  for (Eigen::Index c = 0; c < replicates.cols(); ++c) {
    const double ss = (replicates.col(c).array() - mean(c)).square().sum();
    se(c) = std::sqrt(ss / (n - 1.0) / n);
  }
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> weights) {
  const std::size_t n = x.size();
  require(n == y.size() && n >= 2, "linear_fit needs matching x/y with at least two points");
  require(weights.empty() || weights.size() == n, "linear_fit weight length mismatch");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w(i);
    sx += w(i) * x[i];
    sy += w(i) * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += w(i) * dx * dx;
    sxy += w(i) * dx * dy;
    syy += w(i) * dy * dy;
  }
  require(sxx > 0, "linear_fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += w(i) * r * r;
  }
  f.r_squared = syy > 0 ? 1.0 - sse / syy : 1.0;
  if (n > 2) {
    // Weighted fits with true 1/σ² weights use the model variance; unweighted use residuals.
    const double s2 = weights.empty() ? sse / static_cast<double>(n - 2) : 1.0;
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / sw + mx * mx / sxx));
  }
  return f;
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  require(!samples.empty(), "ks_test needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

double chi2_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

double chi2_isf(double p, double dof) {
  require(p > 0.0 && p < 1.0 && dof > 0.0, "chi2_isf needs 0 < p < 1 and dof > 0");
  return 2.0 * boost::math::gamma_q_inv(0.5 * dof, p);
}

double bonferroni_z(int m) {
  require(m >= 1, "bonferroni_z needs m >= 1");
  if (m == 1) return 3.0;
  const double alpha = std::erfc(3.0 / std::sqrt(2.0)) / m;
  return std::sqrt(2.0) * boost::math::erfc_inv(alpha);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace lgv
