#include "lgv/response.hpp"

#include <algorithm>
#include <cmath>

#include "lgv/error.hpp"
#include "lgv/parallel.hpp"
#include "lgv/stats.hpp"

namespace lgv {

Mat evaluate_on(const Ensemble& ens, const Observable& f) {
  require(f.n_vars() == ens.state_dim, "observable does not match the ensemble state dimension");
  Mat out(ens.n_paths, ens.n_records);
  parallel_for(static_cast<std::size_t>(ens.n_paths), [&](std::size_t b, std::size_t e) {
    for (auto p = static_cast<long>(b); p < static_cast<long>(e); ++p)
      for (long r = 0; r < ens.n_records; ++r) out(p, r) = f(ens.state(p, r));
  });
  return out;
}

Mat lagged_means(const Mat& later, const Mat& origin, long n_lags) {
  const Eigen::Index nr = origin.cols();
  require(later.rows() == origin.rows() && later.cols() == nr && n_lags < nr, "lagged_means: shape mismatch");
  Mat out(origin.rows(), n_lags + 1);
  parallel_for(static_cast<std::size_t>(origin.rows()), [&](std::size_t b, std::size_t e) {
    for (auto p = static_cast<Eigen::Index>(b); p < static_cast<Eigen::Index>(e); ++p)
      for (long k = 0; k <= n_lags; ++k) {
        double s = 0.0;
        for (Eigen::Index o = 0; o + k < nr; ++o) s += origin(p, o) * later(p, o + k);
        out(p, k) = s / static_cast<double>(nr - k);
      }
  });
  return out;
}

void check_stationary(const Mat& per_record, const std::string& what, int n_batches) {
  const Eigen::Index nr = per_record.cols();
  if (nr < 4) return;
  const Eigen::Index half = nr / 2;
  std::vector<double> drift(static_cast<std::size_t>(per_record.rows()));
  for (Eigen::Index p = 0; p < per_record.rows(); ++p)
    drift[static_cast<std::size_t>(p)] = per_record.row(p).head(half).mean() - per_record.row(p).tail(nr - half).mean();
  const MeanSE d = batch_means(drift, n_batches);
  if (d.se > 0.0 && std::abs(d.mean) > 4.0 * d.se)
    fail(ErrorCode::NotStationary, what + " drifts between the halves of the run (" + std::to_string(d.mean) +
                                       " vs SE " + std::to_string(d.se) + ")");
}

namespace {

constexpr std::uint64_t kIndependentSeedSalt = 0x9E3779B97F4A7C15ULL;

ResponseCurve curve_from_rows(const Mat& per_path, std::vector<double> times, int n_batches) {
  ResponseCurve c;
  c.times = std::move(times);
  c.n_paths = per_path.rows();
  c.batches = batch_rows(per_path, n_batches);
  Vec mean, se;
  column_stats(c.batches, mean, se);
  c.values.assign(mean.data(), mean.data() + mean.size());
  c.se.assign(se.data(), se.data() + se.size());
  return c;
}

std::size_t nearest_index(const std::vector<double>& times, double t) {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - times.begin());
  if (i == times.size()) return times.size() - 1;
  if (i > 0 && t - times[i - 1] < times[i] - t) --i;
  return i;
}

std::size_t matching_index(const std::vector<double>& times, double t) {
  const std::size_t i = nearest_index(times, t);
  const double spacing = times.size() > 1 ? times[1] - times[0] : 1.0;
  require(std::abs(times[i] - t) <= 1e-6 * std::abs(spacing),
          "requested time " + std::to_string(t) + " is not on the record grid (nearest " + std::to_string(times[i]) + ")");
  return i;
}

}  // namespace

ResponseCurve estimate_response(const Model& m, const Observable& phi, const SimConfig& cfg,
                                const ResponseOptions& opt) {
  const double eps = m.epsilon();
  require(eps > 0.0, "estimate_response needs epsilon > 0");
  cfg.validate();
  const Ensemble pert = simulate(m, cfg, InitSpec::gibbs());
  const Mat fp = evaluate_on(pert, phi);
  Mat diff(fp.rows(), fp.cols());
  if (opt.reference_mean) {
    diff = (fp.array() - *opt.reference_mean) / eps;
  } else {
    SimConfig c0 = cfg;
    if (!opt.paired) c0.seed = cfg.seed ^ kIndependentSeedSalt;
    const Ensemble base = simulate(m.unperturbed(), c0, InitSpec::gibbs());
    const Mat f0 = evaluate_on(base, phi);
    // Difference first, then divide: the subtraction is exact for identical paths.
    diff = (fp - f0) / eps;
  }
  ResponseCurve c = curve_from_rows(diff, pert.times, opt.n_batches);
  c.epsilon = eps;
  c.estimator_tag = opt.reference_mean ? "quadrature_reference" : (opt.paired ? "paired_crn" : "independent");
  const double v = c.values.back(), s = c.se.back();
  if (!std::isfinite(v) || !std::isfinite(s)) fail(ErrorCode::BlowUp, "response estimate is not finite");
  if (s > 10.0 * std::abs(v) && s > 0.0)
    fail(ErrorCode::SEOverflow, "response SE exceeds 10x the value at the final time; increase n_paths");
  return c;
}

Observable conjugate_observable(const Model& m) {
  const int n = m.state_dim();
  if (!m.perturbation) return Observable::constant(n, 0.0);
  if (m.kind == DynamicsKind::overdamped) {
    return Observable::function(n, conjugate_observable_overdamped(m.perturbation, m.potential, m.sigma, m.beta),
                                "conjugate");
  }
  const PerturbationSpec pert = *m.perturbation;
  const int d = m.dim();
  const double beta = m.beta;
  return Observable::function(
      n,
      [pert, d, beta](const double* x) {
        double mv[kMaxDim];
        pert.field(x, mv);
        double h = 0.0;
        for (int i = 0; i < d; ++i) h += mv[i] * x[d + i];
        return beta * h;
      },
      "conjugate");
}

ResponseCurve predict_response(const Model& m, const Observable& phi, const SimConfig& cfg,
                               const PredictOptions& opt) {
  cfg.validate();
  const Model m0 = m.unperturbed();
  const Ensemble ens = simulate(m0, cfg, InitSpec::gibbs());
  const Mat h = evaluate_on(ens, conjugate_observable(m));
  Mat f = evaluate_on(ens, phi);
  const long nr = ens.n_records;
  const double spacing = nr > 1 ? ens.times[1] - ens.times[0] : cfg.dt;
  const double max_lag = opt.max_lag > 0.0 ? opt.max_lag : 0.5 * cfg.horizon();
  require(opt.output_every >= 1, "predict_response: output_every must be >= 1");
  const long every = opt.output_every;
  const long n_lags = std::min<long>(nr - 1, std::lround(max_lag / spacing)) / every * every;
  require(n_lags >= 1, "predict_response: horizon too short for one lag");

  if (opt.check_stationarity) check_stationary(h, "conjugate observable", opt.n_batches);

  f.array() -= f.mean();
  Mat cumulative = lagged_means(f, h, n_lags);
  for (Eigen::Index p = 0; p < cumulative.rows(); ++p) {
    double acc = 0.0, prev = cumulative(p, 0);
    cumulative(p, 0) = 0.0;
    for (long k = 1; k <= n_lags; ++k) {
      const double cur = cumulative(p, k);
      acc += 0.5 * spacing * (prev + cur);
      prev = cur;
      cumulative(p, k) = acc;
    }
  }
  const long n_out = n_lags / every;
  Mat reported(cumulative.rows(), n_out + 1);
  std::vector<double> times(static_cast<std::size_t>(n_out + 1));
  for (long k = 0; k <= n_out; ++k) {
    reported.col(k) = cumulative.col(k * every);
    times[static_cast<std::size_t>(k)] = spacing * static_cast<double>(k * every);
  }
  ResponseCurve c = curve_from_rows(reported, std::move(times), opt.n_batches);
  c.estimator_tag = "predictor";
  return c;
}

namespace {

template <class G>
GateauxValue gateaux_on(const Potential& v, const PerturbationSpec& w, const Observable& phi, double beta,
                        const G& fine, const G& coarse) {
  if (!w.is_gradient()) fail(ErrorCode::NonGradientPerturbation, "stationary Gateaux derivative needs W");
  require(phi.n_vars() == v.dim(), "stationary_gateaux: φ must act on q");
  const auto pot = [&v](const double* q) { return v.value(q); };
  const auto wf = [&w](const double* q) { return w.potential(q); };
  const auto phif = [&phi](const double* q) { return phi(q); };
  auto cov = [&](const PointRule& r) {
    const double ew = expectation(r, wf), ephi = expectation(r, phif);
    return beta * expectation(r, [&](const double* q) { return (phi(q) - ephi) * (w.potential(q) - ew); });
  };
  const double fine_v = cov(gibbs_rule(pot, beta, fine));
  const double coarse_v = cov(gibbs_rule(pot, beta, coarse));
  return {fine_v, std::abs(fine_v - coarse_v) / 15.0};
}

}  // namespace

GateauxValue stationary_gateaux(const Potential& v, const PerturbationSpec& w, const Observable& phi, double beta,
                                const Grid1D& grid) {
  require(grid.n % 4 == 0, "stationary_gateaux: grid size must be divisible by 4");
  return gateaux_on(v, w, phi, beta, grid, Grid1D{grid.lo, grid.hi, grid.n / 2});
}

GateauxValue stationary_gateaux(const Potential& v, const PerturbationSpec& w, const Observable& phi, double beta,
                                const Grid2D& grid) {
  require(grid.x.n % 4 == 0 && grid.y.n % 4 == 0, "stationary_gateaux: grid sizes must be divisible by 4");
  return gateaux_on(v, w, phi, beta, grid,
                    Grid2D{Grid1D{grid.x.lo, grid.x.hi, grid.x.n / 2}, Grid1D{grid.y.lo, grid.y.hi, grid.y.n / 2}});
}

double stationary_expectation(const Potential& u, const Observable& phi, double beta, const Grid1D& grid) {
  const auto r = gibbs_rule([&u](const double* q) { return u.value(q); }, beta, grid);
  return expectation(r, [&phi](const double* q) { return phi(q); });
}

bool DoubleLimitResult::pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

namespace {

// Least-squares intercept of y against x, as a linear functional so it can be applied per batch.
std::vector<double> intercept_weights(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sxx = 0.0;
  for (double v : x) {
    sx += v;
    sxx += v * v;
  }
  const double det = n * sxx - sx * sx;
  require(det > 0.0, "need at least two distinct epsilon values");
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = (sxx - sx * x[i]) / det;
  return w;
}

Verdict make_verdict(std::string name, double lhs, double rhs, double se, double floor) {
  return compare(std::move(name), lhs, rhs, std::max(3.0 * se, floor));
}

Grid1D default_grid(const Potential& v, double beta) {
  const GibbsMeasure g = gibbs_auto(v, beta);
  return {g.box_lo[0], g.box_hi[0], 4096};
}

}  // namespace

DoubleLimitResult double_limit_table(const Model& m, const Observable& phi, const std::vector<double>& eps_list,
                                     const std::vector<double>& t_list, const SimConfig& cfg,
                                     const DoubleLimitOptions& opt) {
  require(m.perturbation.has_value(), "double_limit_table needs a perturbation");
  require(eps_list.size() >= 2 && t_list.size() >= 2, "double_limit_table needs two or more eps and t values");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    require(eps_list[i] < eps_list[i - 1] && eps_list[i] > 0.0, "eps_list must be positive and decreasing");
  for (std::size_t i = 1; i < t_list.size(); ++i) require(t_list[i] > t_list[i - 1], "t_list must increase");
  require(t_list.back() <= cfg.horizon() + 1e-12, "t_list exceeds the simulation horizon");

  DoubleLimitResult res;
  res.eps_list = eps_list;
  res.t_list = t_list;
  const auto ne = static_cast<Eigen::Index>(eps_list.size());
  const auto nt = static_cast<Eigen::Index>(t_list.size());
  res.values.resize(ne, nt);
  res.se.resize(ne, nt);

  std::size_t plateau_begin = 2 * t_list.size() / 3;
  if (opt.plateau_start > 0.0)
    plateau_begin = static_cast<std::size_t>(std::lower_bound(t_list.begin(), t_list.end(), opt.plateau_start) -
                                             t_list.begin());
  require(plateau_begin < t_list.size(), "plateau window is empty");
  const auto n_plateau = static_cast<double>(t_list.size() - plateau_begin);

  // Per-ε batch matrices restricted to t_list; batch b holds the same paths for every ε.
  std::vector<Mat> cells;
  for (Eigen::Index i = 0; i < ne; ++i) {
    const ResponseCurve c = estimate_response(m.with_epsilon(eps_list[static_cast<std::size_t>(i)]), phi, cfg);
    Mat b(c.batches.rows(), nt);
    for (Eigen::Index j = 0; j < nt; ++j) {
      const std::size_t k = matching_index(c.times, t_list[static_cast<std::size_t>(j)]);
      b.col(j) = c.batches.col(static_cast<Eigen::Index>(k));
      res.values(i, j) = c.values[k];
      res.se(i, j) = c.se[k];
    }
    cells.push_back(std::move(b));
  }
  const Eigen::Index nb = cells.front().rows();
  const auto iw = intercept_weights(eps_list);

  Vec a1_batches = Vec::Zero(nb);
  for (Eigen::Index i = 0; i < ne; ++i) {
    Vec row = Vec::Zero(nb);
    for (auto j = static_cast<Eigen::Index>(plateau_begin); j < nt; ++j) row += cells[static_cast<std::size_t>(i)].col(j);
    row /= n_plateau;
    const MeanSE s = replicate_stats(std::span<const double>(row.data(), static_cast<std::size_t>(nb)));
    res.row_limits.push_back(s.mean);
    res.row_limit_se.push_back(s.se);
    a1_batches += iw[static_cast<std::size_t>(i)] * row;
  }
  const MeanSE a1 = replicate_stats(std::span<const double>(a1_batches.data(), static_cast<std::size_t>(nb)));
  res.limit_t_then_eps = a1.mean;
  res.limit_t_then_eps_se = a1.se;

  for (Eigen::Index j = 0; j < nt; ++j) {
    Vec col = Vec::Zero(nb);
    for (Eigen::Index i = 0; i < ne; ++i) col += iw[static_cast<std::size_t>(i)] * cells[static_cast<std::size_t>(i)].col(j);
    const MeanSE s = replicate_stats(std::span<const double>(col.data(), static_cast<std::size_t>(nb)));
    res.column_limits.push_back(s.mean);
    res.column_limit_se.push_back(s.se);
  }

  SimConfig pc = opt.predictor_cfg.value_or(cfg);
  if (!opt.predictor_cfg) {
    pc.n_steps = 2 * cfg.n_steps;
    pc.seed = cfg.seed + 1;
  }
  PredictOptions po;
  po.max_lag = t_list.back();
  res.predictor = predict_response(m, phi, pc, po);
  Vec a2_batches = Vec::Zero(res.predictor.batches.rows());
  std::vector<std::size_t> pred_idx;
  for (double t : t_list) pred_idx.push_back(matching_index(res.predictor.times, t));
  for (std::size_t j = plateau_begin; j < t_list.size(); ++j)
    a2_batches += res.predictor.batches.col(static_cast<Eigen::Index>(pred_idx[j]));
  a2_batches /= n_plateau;
  const MeanSE a2 =
      replicate_stats(std::span<const double>(a2_batches.data(), static_cast<std::size_t>(a2_batches.size())));
  res.limit_eps_then_t = a2.mean;
  res.limit_eps_then_t_se = a2.se;

  const bool gradient_w =
      m.perturbation->is_gradient() && m.rotation == 0.0 && m.dim() == 1 && phi.n_vars() == m.dim();
  const double floor = opt.abs_floor;
  if (gradient_w) {
    const Grid1D grid = opt.gateaux_grid ? *opt.gateaux_grid : default_grid(m.potential, m.beta);
    const Potential v0 = m.potential;
    const double base = stationary_expectation(v0, phi, m.beta, grid);
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
      const double shifted = stationary_expectation(m.with_epsilon(eps_list[i]).effective_potential(), phi, m.beta, grid);
      res.verdicts.push_back(make_verdict("a:eps=" + std::to_string(eps_list[i]), res.row_limits[i],
                                          (shifted - base) / eps_list[i], res.row_limit_se[i], floor));
    }
    res.gateaux = stationary_gateaux(v0, *m.perturbation, phi, m.beta, grid).value;
  }
  for (std::size_t j = 0; j < t_list.size(); ++j) {
    const double se = std::hypot(res.column_limit_se[j], res.predictor.se[pred_idx[j]]);
    res.verdicts.push_back(make_verdict("b:t=" + std::to_string(t_list[j]), res.column_limits[j],
                                        res.predictor.values[pred_idx[j]], se, floor));
  }
  res.verdicts.push_back(make_verdict("c:iterated_limits", res.limit_t_then_eps, res.limit_eps_then_t,
                                      std::hypot(a1.se, a2.se), floor));
  if (res.gateaux) {
    res.verdicts.push_back(make_verdict("c:t_then_eps_vs_gateaux", res.limit_t_then_eps, *res.gateaux, a1.se, floor));
    res.verdicts.push_back(make_verdict("c:eps_then_t_vs_gateaux", res.limit_eps_then_t, *res.gateaux, a2.se, floor));
  }
  return res;
}

}  // namespace lgv
