#include "lgv/revcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgv/error.hpp"
#include "lgv/fp.hpp"
#include "lgv/greenkubo.hpp"
#include "lgv/stats.hpp"

namespace lgv {

namespace {

constexpr double kFamilyLevel = 0.01;  // distributional tests, before Bonferroni correction
constexpr long kMinPhaseSamples = 100000;

Verdict summary(const std::string& name, const std::vector<Verdict>& details) {
  require(!details.empty(), "no comparisons for " + name);
  // Report the comparison closest to (or furthest past) its tolerance.
  const Verdict* worst = &details.front();
  auto excess = [](const Verdict& v) {
    const double gap = std::abs(v.lhs - v.rhs);
    return v.tolerance > 0.0 ? gap / v.tolerance : (gap > 0.0 ? INFINITY : 0.0);
  };
  for (const auto& v : details)
    if (excess(v) > excess(*worst)) worst = &v;
  Verdict s = *worst;
  s.name = name;
  s.pass = std::all_of(details.begin(), details.end(), [](const Verdict& v) { return v.pass; });
  return s;
}

}  // namespace

std::vector<Verdict> correlation_symmetry_test(const Ensemble& ens, const Model& m, const std::vector<TestPair>& pairs,
                                               const std::vector<double>& lags) {
  require(!pairs.empty() && !lags.empty(), "correlation symmetry needs test pairs and lags");
  require(ens.n_records >= 2, "correlation symmetry needs at least two records");
  const auto parity = momentum_parity(m);
  const double spacing = ens.times[1] - ens.times[0];
  const double max_lag = *std::max_element(lags.begin(), lags.end());
  const double z = bonferroni_z(static_cast<int>(pairs.size() * lags.size()));
  std::vector<Verdict> out;
  for (const auto& [a, b] : pairs) {
    const CorrelationSeries forward = autocorrelation(ens, a, b, max_lag);
    const CorrelationSeries reverse = autocorrelation(ens, b.flipped(parity), a.flipped(parity), max_lag);
    std::vector<Verdict> per_lag;
    for (double t : lags) {
      const auto k = static_cast<Eigen::Index>(std::lround(t / spacing));
      require(k < static_cast<Eigen::Index>(forward.values.size()), "lag beyond the ensemble horizon");
      const Vec d = forward.batches.col(k) - reverse.batches.col(k);
      const double se = replicate_stats(std::span<const double>(d.data(), static_cast<std::size_t>(d.size()))).se;
      per_lag.push_back(compare("", forward.values[static_cast<std::size_t>(k)],
                                reverse.values[static_cast<std::size_t>(k)], z * se));
    }
    out.push_back(summary("correlation_symmetry[" + a.tag() + ", " + b.tag() + "]", per_lag));
  }
  return out;
}

std::vector<Verdict> generator_symmetry_quadrature(const Model& m, const PointRule& rho, const std::vector<TestPair>& pairs,
                                                   double tolerance) {
  const auto parity = momentum_parity(m);
  require(rho.points.cols() == m.state_dim(), "quadrature rule does not match the state dimension");
  std::vector<Verdict> out;
  for (const auto& [a, b] : pairs) {
    const Observable lb = apply_generator(m, b);
    const Observable af = a.flipped(parity), bf = b.flipped(parity);
    const Observable laf = apply_generator(m, af);
    const double lhs = expectation(rho, [&](const double* x) { return a(x) * lb(x); });
    const double rhs = expectation(rho, [&](const double* x) { return laf(x) * bf(x); });
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    out.push_back(compare("generator_symmetry[" + a.tag() + ", " + b.tag() + "]", lhs, rhs, tolerance * scale));
  }
  return out;
}

PointRule stationary_rule(const Model& m, int gh_nodes, double q_step, int velocity_nodes) {
  if (const auto g = linear_stationary(m)) return gaussian_rule(g->mean, g->cov, gh_nodes);
  if (!m.is_gradient())
    fail(ErrorCode::InvalidArgument, "no closed-form stationary law for a non-linear, non-gradient model");
  const int d = m.dim();
  require(d <= 2, "stationary quadrature supports d <= 2");
  const Potential u = m.effective_potential();
  const GibbsMeasure gm = gibbs_auto(u, m.beta);
  auto axis = [&](int k) {
    auto n = static_cast<std::size_t>(std::ceil((gm.box_hi[k] - gm.box_lo[k]) / q_step));
    n += n % 2;
    return Grid1D{gm.box_lo[k], gm.box_hi[k], n};
  };
  const auto pot = [&u](const double* q) { return u.value(q); };
  PointRule rule = d == 1 ? gibbs_rule(pot, m.beta, axis(0)) : gibbs_rule(pot, m.beta, Grid2D{axis(0), axis(1)});
  // Nodes below 1e-16 of the peak weight change no expectation of a polynomial test pair at
  // double precision; dropping them keeps the tensor with the velocity rule small.
  {
    const double cut = 1e-16 * rule.weights.maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < rule.weights.size(); ++i)
      if (rule.weights[i] > cut) keep.push_back(i);
    PointRule trimmed{Mat(keep.size(), rule.points.cols()), Vec(keep.size())};
    for (std::size_t r = 0; r < keep.size(); ++r) {
      trimmed.points.row(r) = rule.points.row(keep[r]);
      trimmed.weights[r] = rule.weights[keep[r]];
    }
    rule = std::move(trimmed);
  }
  const int extra = m.state_dim() - d;
  if (extra > 0) {
    const PointRule velocities =
        gaussian_rule(Vec::Zero(extra), Mat::Identity(extra, extra) / m.beta, velocity_nodes);
    rule = tensor(rule, velocities);
  }
  return rule;
}

Verdict flux_check(const Model& m, double h, double half_width) {
  require(m.kind == DynamicsKind::overdamped, "flux_check applies to overdamped dynamics");
  const auto n = static_cast<std::size_t>(std::lround(2.0 * half_width / h));
  const Grid1D axis{-half_width, half_width, n};
  FluxField flux;
  if (m.dim() == 1) {
    flux = probability_flux(stationary_solve(assemble_overdamped_fp(m, axis)), m);
  } else {
    require(m.dim() == 2, "flux_check supports d <= 2");
    DensityField rho;
    rho.axes = {axis, axis};
    rho.values.resize(n * n);
    const auto lin = linear_stationary(m);
    std::optional<Potential> u;
    if (!lin) {
      if (!m.is_gradient()) fail(ErrorCode::InvalidArgument, "no closed-form stationary density for this model");
      u = m.effective_potential();
    }
    Mat prec;
    if (lin) prec = lin->cov.inverse();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double q[2] = {axis.center(i), axis.center(j)};
        double e;
        if (lin) {
          const Vec x = Eigen::Map<const Vec>(q, 2) - lin->mean;
          e = -0.5 * x.dot(prec * x);
        } else {
          e = -m.beta * u->value(q);
        }
        rho.values[i * n + j] = std::exp(e);
      }
    rho.normalize();
    flux = probability_flux(rho, m);
  }
  Verdict v = compare("zero_flux", flux.max_abs(), 0.0, 10.0 * h * h);
  v.pass = v.lhs < v.tolerance;
  return v;
}

namespace {

// Interior edges splitting the sample into `bins` equally populated bins.
std::vector<double> quantile_edges(std::vector<double> x, int bins) {
  std::sort(x.begin(), x.end());
  std::vector<double> e;
  for (int k = 1; k < bins; ++k) e.push_back(x[x.size() * static_cast<std::size_t>(k) / static_cast<std::size_t>(bins)]);
  return e;
}

int bin_of(const std::vector<double>& edges, double v) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

constexpr int kBins = 8;

// χ² over mirrored cells (x bin, ±p bin); p edges symmetric about 0.
double evenness_p_value(const Mat& s, int ix, int ip) {
  std::vector<double> absp(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index r = 0; r < s.rows(); ++r) absp[static_cast<std::size_t>(r)] = std::abs(s(r, ip));
  const auto half = quantile_edges(absp, kBins / 2);
  std::vector<double> xs(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index r = 0; r < s.rows(); ++r) xs[static_cast<std::size_t>(r)] = s(r, ix);
  const auto xe = quantile_edges(xs, kBins);
  const int np = kBins / 2;
  std::vector<double> pos(kBins * np, 0.0), neg(kBins * np, 0.0);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const int bx = bin_of(xe, s(r, ix));
    const double p = s(r, ip);
    if (p == 0.0) continue;
    const int bp = bin_of(half, std::abs(p));
    (p > 0.0 ? pos : neg)[static_cast<std::size_t>(bx * np + bp)] += 1.0;
  }
  double chi2 = 0.0;
  int dof = 0;
  for (std::size_t c = 0; c < pos.size(); ++c) {
    const double tot = pos[c] + neg[c];
    if (tot < 10.0) continue;
    chi2 += (pos[c] - neg[c]) * (pos[c] - neg[c]) / tot;
    ++dof;
  }
  return dof > 0 ? chi2_sf(chi2, dof) : 1.0;
}

struct GTest {
  double mutual_information = 0.0;
  double dof = 1.0;
};

GTest independence(const Mat& s, int ia, int ib) {
  std::vector<double> a(static_cast<std::size_t>(s.rows())), b(a.size());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    a[static_cast<std::size_t>(r)] = s(r, ia);
    b[static_cast<std::size_t>(r)] = s(r, ib);
  }
  const auto ea = quantile_edges(a, kBins), eb = quantile_edges(b, kBins);
  std::vector<double> joint(kBins * kBins, 0.0), ma(kBins, 0.0), mb(kBins, 0.0);
  for (std::size_t r = 0; r < a.size(); ++r) {
    const int i = bin_of(ea, a[r]), j = bin_of(eb, b[r]);
    joint[static_cast<std::size_t>(i * kBins + j)] += 1.0;
    ma[static_cast<std::size_t>(i)] += 1.0;
    mb[static_cast<std::size_t>(j)] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (int i = 0; i < kBins; ++i)
    for (int j = 0; j < kBins; ++j) {
      const double o = joint[static_cast<std::size_t>(i * kBins + j)];
      if (o > 0.0) mi += o / n * std::log(o * n / (ma[static_cast<std::size_t>(i)] * mb[static_cast<std::size_t>(j)]));
    }
  const auto used = [](const std::vector<double>& m) {
    return static_cast<double>(std::count_if(m.begin(), m.end(), [](double c) { return c > 0.0; }));
  };
  return {mi, std::max(1.0, (used(ma) - 1.0) * (used(mb) - 1.0))};
}

}  // namespace

std::vector<Verdict> evenness_and_separation_test(const Mat& samples, const Model& m) {
  require(m.kind != DynamicsKind::overdamped, "evenness and separation apply to kinetic states");
  require(samples.cols() == m.state_dim(), "samples do not match the state dimension");
  if (samples.rows() < kMinPhaseSamples)
    fail(ErrorCode::InsufficientSamples, "evenness and separation need at least 1e5 phase-space points, got " +
                                             std::to_string(samples.rows()));
  const int d = m.dim(), sd = m.state_dim();
  std::vector<int> even, odd;  // q and z are even, p is odd
  for (int k = 0; k < d; ++k) even.push_back(k);
  for (int k = 2 * d; k < sd; ++k) even.push_back(k);
  for (int k = d; k < 2 * d; ++k) odd.push_back(k);

  std::vector<Verdict> out;
  {
    const int mcount = static_cast<int>(even.size() * odd.size());
    const double level = kFamilyLevel / mcount;
    double worst = 1.0;
    for (int e : even)
      for (int o : odd) worst = std::min(worst, evenness_p_value(samples, e, o));
    Verdict v = compare("evenness_in_p", worst, 1.0, 1.0 - level);
    v.pass = worst >= level;
    out.push_back(v);
  }
  {
    std::vector<std::pair<int, int>> pairs;
    for (int e : even)
      for (int o : odd) pairs.emplace_back(e, o);
    for (int i = 2 * d; i < sd; ++i)
      for (int k = 0; k < d; ++k) pairs.emplace_back(k, i);
    const double level = kFamilyLevel / static_cast<double>(pairs.size());
    const double n = static_cast<double>(samples.rows());
    Verdict worst{"separation_of_variables", 0.0, 0.0, 0.0, true};
    double worst_ratio = -1.0;
    for (auto [i, j] : pairs) {
      const GTest g = independence(samples, i, j);
      const double threshold = chi2_isf(level, g.dof) / (2.0 * n);
      const double ratio = g.mutual_information / threshold;
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst.lhs = g.mutual_information;
        worst.tolerance = threshold;
      }
    }
    worst.pass = worst.lhs <= worst.tolerance;
    out.push_back(worst);
  }
  {
    std::vector<int> gaussian(odd);
    for (int k = 2 * d; k < sd; ++k) gaussian.push_back(k);
    const double level = kFamilyLevel / static_cast<double>(gaussian.size());
    const double sdev = 1.0 / std::sqrt(m.beta);
    double worst = 1.0;
    for (int k : gaussian) {
      std::vector<double> x(static_cast<std::size_t>(samples.rows()));
      for (Eigen::Index r = 0; r < samples.rows(); ++r) x[static_cast<std::size_t>(r)] = samples(r, k);
      worst = std::min(worst, ks_test(std::move(x), [sdev](double v) { return normal_cdf(v / sdev); }).p_value);
    }
    Verdict v = compare("maxwellian_marginals", worst, 1.0, 1.0 - level);
    v.pass = worst >= level;
    out.push_back(v);
  }
  return out;
}

Mat phase_samples(const Ensemble& ens, long record_gap) {
  std::vector<long> records{ens.n_records - 1};
  if (record_gap > 0)
    for (long r = ens.n_records - 1 - record_gap; r >= 0; r -= record_gap) records.push_back(r);
  Mat s(ens.n_paths * static_cast<long>(records.size()), ens.state_dim);
  Eigen::Index row = 0;
  for (long r : records)
    for (long p = 0; p < ens.n_paths; ++p, ++row)
      for (int k = 0; k < ens.state_dim; ++k) s(row, k) = ens.state(p, r)[k];
  return s;
}

Verdict potential_condition_test(const Model& m, double h, double half_width) {
  const int d = m.dim();
  if (d == 1) return compare("potential_condition", 0.0, 0.0, 10.0 * h);
  require(d == 2, "potential condition test supports d <= 2");
  const Mat ainv = m.sigma.a_inv();
  auto field = [&](double x, double y, double* f) {
    const double q[2] = {x, y};
    if (m.kind == DynamicsKind::overdamped) {
      double b[2];
      m.drift(q, b);
      f[0] = ainv(0, 0) * b[0] + ainv(0, 1) * b[1];
      f[1] = ainv(1, 0) * b[0] + ainv(1, 1) * b[1];
    } else {
      m.force(q, f);
    }
  };
  const long n = std::lround(half_width / h);
  double worst = 0.0;
  for (long i = -n + 1; i < n; ++i)
    for (long j = -n + 1; j < n; ++j) {
      const double x = static_cast<double>(i) * h, y = static_cast<double>(j) * h;
      double fxp[2], fxm[2], fyp[2], fym[2];
      field(x + h, y, fxp);
      field(x - h, y, fxm);
      field(x, y + h, fyp);
      field(x, y - h, fym);
      const double curl = (fxp[1] - fxm[1]) / (2.0 * h) - (fyp[0] - fym[0]) / (2.0 * h);
      worst = std::max(worst, std::abs(curl));
    }
  Verdict v = compare("potential_condition", worst, 0.0, 10.0 * h);
  v.pass = v.lhs < v.tolerance;
  return v;
}

bool ReversibilityReport::overall() const {
  return std::all_of(checks.begin(), checks.end(), [](const Verdict& v) { return v.pass; });
}

std::vector<TestPair> default_test_pairs(const Model& m) {
  const int d = m.dim(), sd = m.state_dim();
  auto obs = [&](const std::string& e) { return Observable::parse(e, d, sd); };
  const std::string q1 = d == 1 ? "q" : "q1", q2 = d == 1 ? "q" : "q2";
  std::vector<TestPair> pairs;
  if (d == 1) {
    pairs.push_back({obs("q"), obs("q^3")});
    pairs.push_back({obs("q^2"), obs("q")});
  } else {
    pairs.push_back({obs("q1"), obs("q2")});
    pairs.push_back({obs("q1"), obs("q1^3")});
    pairs.push_back({obs("q1*q2"), obs("q2^2")});
  }
  if (m.kind != DynamicsKind::overdamped) {
    const std::string p1 = d == 1 ? "p" : "p1", p2 = d == 1 ? "p" : "p2";
    pairs.push_back({obs(q1), obs(p2)});
    pairs.push_back({obs(q1 + "*" + p1), obs(q2 + "^2")});
  }
  if (m.kind == DynamicsKind::gle_augmented || m.kind == DynamicsKind::gle_convolution) {
    const std::string z1 = d == 1 ? "z" : "z1", z2 = d == 1 ? "z" : "z2";
    pairs.push_back({obs(q1), obs(z2)});
    pairs.push_back({obs((d == 1 ? std::string("p") : std::string("p1")) + "*" + z1), obs(q2)});
  }
  return pairs;
}

ReversibilityReport check_reversibility(const Model& model, std::string model_tag, const RevcheckOptions& opt,
                                        const std::vector<TestPair>& test_pairs) {
  Model m = model;
  if (m.kind == DynamicsKind::gle_convolution) m.kind = DynamicsKind::gle_augmented;
  ReversibilityReport rep;
  rep.dynamics = m.kind;
  rep.model_tag = std::move(model_tag);
  const auto pairs = test_pairs.empty() ? default_test_pairs(m) : test_pairs;

  SimConfig cfg;
  cfg.dt = opt.dt > 0.0                               ? opt.dt
           : m.kind == DynamicsKind::underdamped     ? 0.02
           : m.kind == DynamicsKind::overdamped      ? 0.01
                                                     : 0.0025;
  cfg.n_steps = std::lround(opt.horizon / cfg.dt);
  cfg.record_stride = std::lround(opt.record_spacing / cfg.dt);
  cfg.n_steps -= cfg.n_steps % cfg.record_stride;
  cfg.n_paths = opt.n_paths;
  cfg.seed = opt.seed;
  // Start in the stationary law: exact Gaussian for linear models, Gibbs of V − εW otherwise.
  InitSpec init = InitSpec::gibbs();
  Model sim = m;
  if (const auto g = linear_stationary(m)) {
    init = InitSpec::gaussian(g->mean, g->cov);
  } else {
    require(m.is_gradient(), "check_reversibility needs a linear or a gradient model");
    sim.potential = m.effective_potential();
    sim.perturbation.reset();
  }
  const Ensemble ens = simulate(sim, cfg, init);

  auto add = [&](const std::string& name, std::vector<Verdict> details) {
    rep.checks.push_back(summary(name, details));
    rep.details.insert(rep.details.end(), details.begin(), details.end());
  };
  add("correlation_symmetry", correlation_symmetry_test(ens, sim, pairs, opt.lags));
  const bool gaussian = linear_stationary(m).has_value();
  add("generator_symmetry", generator_symmetry_quadrature(sim, stationary_rule(sim, opt.gh_nodes, opt.q_step, opt.velocity_nodes), pairs,
                                                          gaussian ? 1e-8 : 1e-6));
  if (m.kind == DynamicsKind::overdamped)
    add("zero_flux", {flux_check(sim, opt.flux_h, opt.flux_half_width)});
  else
    add("evenness_and_separation", evenness_and_separation_test(phase_samples(ens), sim));
  add("potential_condition", {potential_condition_test(sim, opt.curl_h, opt.curl_half_width)});
  return rep;
}

bool BatteryEntry::consistent() const {
  return std::all_of(report.checks.begin(), report.checks.end(),
                     [&](const Verdict& v) { return v.pass == expected_reversible; });
}

std::vector<BatteryEntry> reversibility_battery(const RevcheckOptions& opt) {
  const Potential v = Potential::quadratic(2, 1.0);
  struct Case {
    std::string tag;
    Potential potential;
    double rotation;
    bool reversible;
  };
  const std::vector<Case> cases{
      {"gradient", v, 0.0, true},
      {"gradient+bump", v.plus_bump(Bump{{0.5, 0.0}, 2.5, 1.0}, -0.5), 0.0, true},
      {"rotational", v, 0.3, false},
  };
  std::vector<BatteryEntry> out;
  std::uint64_t seed = opt.seed;
  for (DynamicsKind k : {DynamicsKind::overdamped, DynamicsKind::underdamped, DynamicsKind::gle_augmented})
    for (const auto& c : cases) {
      Model m;
      m.kind = k;
      m.potential = c.potential;
      m.sigma = DiffusionMatrix::identity(2);
      m.rotation = c.rotation;
      RevcheckOptions o = opt;
      o.seed = seed++;
      out.push_back({check_reversibility(m, c.tag, o), c.reversible});
    }
  return out;
}

}  // namespace lgv
