#include "lgv/greenkubo.hpp"

#include <algorithm>
#include <cmath>

#include "lgv/error.hpp"
#include "lgv/response.hpp"

namespace lgv {

CorrelationSeries autocorrelation(const Ensemble& ens, const Observable& a, const Observable& b, double max_lag,
                                  const CorrelationOptions& opt) {
  require(ens.n_records >= 2, "autocorrelation needs at least two records");
  const Mat av = evaluate_on(ens, a);
  const Mat bv = evaluate_on(ens, b);
  if (opt.check_stationarity) {
    check_stationary(av, "E[" + a.tag() + "]", opt.n_batches);
    check_stationary(bv, "E[" + b.tag() + "]", opt.n_batches);
  }
  const double spacing = ens.times[1] - ens.times[0];
  const long n_lags = std::min<long>(ens.n_records - 1, std::lround(max_lag / spacing));
  require(n_lags >= 1, "autocorrelation: max_lag shorter than the record spacing");

  CorrelationSeries s;
  s.a_tag = a.tag();
  s.b_tag = b.tag();
  s.batches = batch_rows(lagged_means(av, bv, n_lags), opt.n_batches);
  Vec mean, se;
  column_stats(s.batches, mean, se);
  s.values.assign(mean.data(), mean.data() + mean.size());
  s.se.assign(se.data(), se.data() + se.size());
  for (long k = 0; k <= n_lags; ++k) {
    s.lags.push_back(spacing * static_cast<double>(k));
    s.n_samples_per_lag.push_back(ens.n_paths * (ens.n_records - k));
  }
  return s;
}

namespace {

double trapezoid(const double* v, std::size_t stride, std::size_t cut, double h) {
  double s = 0.0;
  for (std::size_t i = 1; i <= cut; ++i) s += 0.5 * h * (v[(i - 1) * stride] + v[i * stride]);
  return s;
}

}  // namespace

GKResult gk_integral(const CorrelationSeries& k, const Truncation& trunc) {
  const std::size_t n = k.values.size();
  require(n >= 2 && k.lags.size() == n && k.se.size() == n, "gk_integral: malformed correlation series");
  const double h = k.lags[1] - k.lags[0];
  GKResult r;
  std::size_t cut = n - 1;
  if (trunc.kind == Truncation::Kind::fixed_T) {
    require(trunc.t_max > 0.0 && trunc.t_max <= k.lags.back() + 0.5 * h, "fixed_T truncation beyond the last lag");
    cut = static_cast<std::size_t>(std::lround(trunc.t_max / h));
  } else {
    bool found = false;
    for (std::size_t i = 1; i < n && !found; ++i)
      if (k.se[i] > 0.0 && std::abs(k.values[i]) < 2.0 * k.se[i]) {
        cut = i;
        found = true;
      }
    // Fit only lags that are still resolved; the cut lag itself is within noise.
    const std::size_t lo = cut / 2, hi = found ? cut - 1 : cut;
    const double sign = k.values[lo] < 0.0 ? -1.0 : 1.0;
    std::vector<double> t, y, w;
    for (std::size_t i = lo; i <= hi; ++i) {
      const double v = sign * k.values[i];
      if (v <= 0.0) continue;
      t.push_back(k.lags[i]);
      y.push_back(std::log(v));
      if (k.se[i] > 0.0) w.push_back(std::pow(v / k.se[i], 2));
    }
    if (w.size() != t.size()) w.clear();
    // Fewer than two resolved lags: K is already lost in noise and there is nothing to extrapolate.
    if (t.size() >= 2) {
      const LinearFit fit = linear_fit(t, y, w);
      r.tail_rate = -fit.slope;
      if (!(r.tail_rate > 0.0))
        fail(ErrorCode::NonDecayingTail,
             "fitted correlation tail rate is not positive (" + std::to_string(r.tail_rate) + ")");
      r.tail = sign * std::exp(fit.intercept - r.tail_rate * k.lags[cut]) / r.tail_rate;
    }
  }
  r.t_cut = k.lags[cut];
  r.value = trapezoid(k.values.data(), 1, cut, h) + r.tail;
  if (k.batches.size() > 0) {
    const Eigen::Index nb = k.batches.rows();
    r.batch_values.resize(nb);
    for (Eigen::Index b = 0; b < nb; ++b) {
      const Vec row = k.batches.row(b).transpose();
      r.batch_values(b) = trapezoid(row.data(), 1, cut, h) + r.tail;
    }
    r.se = replicate_stats(std::span<const double>(r.batch_values.data(), static_cast<std::size_t>(nb))).se;
  }
  return r;
}

GKResult diffusion_coefficient(const Ensemble& ens, const Model& m, int i, int j, double max_lag,
                               const Truncation& trunc) {
  require(ens.tag == DynamicsKind::overdamped && ens.state_dim == m.dim(), "diffusion_coefficient needs an overdamped ensemble");
  require(i >= 0 && j >= 0 && i < m.dim() && j < m.dim(), "diffusion_coefficient: index out of range");
  const Mat a = m.sigma.a();
  const Potential v = m.potential;
  const int d = m.dim();
  auto component = [a, v, d](int c) {
    return Observable::function(
        d,
        [a, v, d, c](const double* q) {
          double g[kMaxDim];
          v.gradient(q, g);
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += a(c, k) * g[k];
          return s;
        },
        "(a grad V)_" + std::to_string(c + 1));
  };
  GKResult r = gk_integral(autocorrelation(ens, component(i), component(j), max_lag), trunc);
  r.value *= m.beta;
  r.se *= m.beta;
  r.tail *= m.beta;
  r.batch_values *= m.beta;
  return r;
}

PointRule gibbs_quadrature(const Potential& v, double beta) {
  const GibbsMeasure g = gibbs_auto(v, beta);
  const auto pot = [v](const double* q) { return v.value(q); };
  if (v.dim() == 1) return gibbs_rule(pot, beta, Grid1D{g.box_lo[0], g.box_hi[0], 4096});
  require(v.dim() == 2, "Gibbs quadrature supports d <= 2");
  return gibbs_rule(pot, beta,
                    Grid2D{Grid1D{g.box_lo[0], g.box_hi[0], 512}, Grid1D{g.box_lo[1], g.box_hi[1], 512}});
}

GKCheck gk_check(const Ensemble& ens, const Model& m, const Observable& g, const PerturbationSpec& w, double max_lag,
                 double abs_floor, const Truncation& trunc) {
  require(m.kind == DynamicsKind::overdamped, "gk_check is defined for the overdamped generator");
  const Model m0 = m.unperturbed();
  const Observable wo = perturbation_potential(w, m.dim());
  const Observable lg = apply_generator(m0, g);
  const Observable lw = apply_generator(m0, wo);
  GKCheck c;
  c.gk = gk_integral(autocorrelation(ens, lg, lw, max_lag), trunc);
  c.integral = -c.gk.value;
  c.integral_se = c.gk.se;
  c.quadrature = expectation(gibbs_quadrature(m.potential, m.beta), [&](const double* q) { return wo(q) * lg(q); });
  c.tolerance = std::max(3.0 * c.integral_se, abs_floor);
  c.pass = std::abs(c.integral - c.quadrature) <= c.tolerance;
  return c;
}

OnsagerResult onsager_regression_check(const Model& m, const Observable& g, const std::vector<double>& eps_list,
                                       const SimConfig& cfg, double max_lag, const Truncation& trunc) {
  require(m.kind == DynamicsKind::overdamped && m.rotation == 0.0, "Onsager check needs overdamped gradient dynamics");
  require(m.perturbation && m.perturbation->is_gradient(), "Onsager check needs a gradient perturbation");
  require(!eps_list.empty(), "eps_list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i)
    require(eps_list[i] > 0.0 && (i == 0 || eps_list[i] < eps_list[i - 1]), "eps_list must be positive and decreasing");
  const Observable wo = perturbation_potential(*m.perturbation, m.dim());

  OnsagerResult r;
  r.eps = eps_list;
  r.eps.push_back(0.0);
  std::vector<Vec> batches;
  for (double eps : r.eps) {
    Model me = m;
    me.potential = m.with_epsilon(eps).effective_potential();
    me.perturbation.reset();
    const Ensemble ens = simulate(me, cfg, InitSpec::gibbs());
    const GKResult gk =
        gk_integral(autocorrelation(ens, apply_generator(me, g), apply_generator(me, wo), max_lag), trunc);
    r.values.push_back(-gk.value);
    r.se.push_back(gk.se);
    batches.push_back(-gk.batch_values);
  }
  const std::size_t n = eps_list.size();
  for (std::size_t i = 0; i < n; ++i) {
    r.gaps.push_back(r.values[i] - r.values[n]);
    const Vec d = batches[i] - batches[n];
    r.gap_se.push_back(replicate_stats(std::span<const double>(d.data(), static_cast<std::size_t>(d.size()))).se);
  }
  r.monotone = true;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(r.gaps[i]) > std::abs(r.gaps[i - 1]) + r.gap_se[i]) r.monotone = false;
  r.final_gap_ok = std::abs(r.gaps[n - 1]) <= std::max(3.0 * r.gap_se[n - 1], 1e-3 * std::abs(r.values[n]));
  return r;
}

}  // namespace lgv
