#include "lgv/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lgv/error.hpp"
#include "lgv/parallel.hpp"

namespace lgv {

void SimConfig::validate() const {
  require(dt > 0 && std::isfinite(dt), "dt must be positive");
  require(n_steps > 0, "n_steps must be positive");
  require(n_paths > 0, "n_paths must be positive");
  require(burn_in_steps >= 0, "burn_in_steps must be non-negative");
  require(record_stride > 0 && n_steps % record_stride == 0, "record_stride must divide n_steps");
}

InitSpec InitSpec::at(std::vector<double> x) {
  InitSpec s;
  s.kind = Kind::point;
  s.point = std::move(x);
  return s;
}

InitSpec InitSpec::gaussian(Vec mean, Mat cov) {
  InitSpec s;
  s.kind = Kind::gaussian;
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  return s;
}

// ---- Noise bank -------------------------------------------------------------------------

NoiseBank NoiseBank::generate(std::uint64_t seed, long n_paths, long n_steps, int dim) {
  require(n_paths > 0 && n_steps > 0 && dim > 0, "noise bank dimensions must be positive");
  NoiseBank b{n_paths, n_steps, dim, std::vector<double>(static_cast<std::size_t>(n_paths) * n_steps * dim)};
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t path = lo; path < hi; ++path) {
      RandomStream rs(seed, path, Stream::increments);
      double* out = b.xi.data() + path * n_steps * dim;
      for (long k = 0; k < n_steps * dim; ++k) out[k] = rs.normal();
    }
  });
  return b;
}

NoiseBank NoiseBank::coarsened() const {
  require(n_steps % 2 == 0, "coarsening needs an even number of steps");
  NoiseBank c{n_paths, n_steps / 2, dim, std::vector<double>(static_cast<std::size_t>(n_paths) * (n_steps / 2) * dim)};
  const double s = 1.0 / std::sqrt(2.0);
  for (long path = 0; path < n_paths; ++path)
    for (long k = 0; k < c.n_steps; ++k)
      for (int i = 0; i < dim; ++i)
        c.xi[(static_cast<std::size_t>(path) * c.n_steps + k) * dim + i] =
            (at(path, 2 * k)[i] + at(path, 2 * k + 1)[i]) * s;
  return c;
}

// ---- Gibbs sampling ---------------------------------------------------------------------

GibbsSampler::GibbsSampler(GibbsMeasure measure) : m_(std::move(measure)) {
  const int d = m_.dim();
  exact_ = m_.potential.is_pure_quadratic();
  if (exact_) return;
  require(d <= 2 && !m_.box_lo.empty(), "rejection sampling needs a normalized d <= 2 measure");
  for (int k = 0; k < d; ++k) {
    env_mean_.push_back(m_.mean[k]);
    env_sd_.push_back(1.25 * std::sqrt(m_.variance[k]));
  }
  // Envelope bound: max of log(target/envelope) over a fine scan of the quadrature box.
  const int n = d == 1 ? 8192 : 400;
  double best = -std::numeric_limits<double>::infinity();
  double q[2];
  auto log_ratio = [&](const double* x) {
    double le = 0.0;
    for (int k = 0; k < d; ++k) le -= 0.5 * std::pow((x[k] - env_mean_[k]) / env_sd_[k], 2);
    return -m_.beta * m_.potential.value(x) - le;
  };
  if (d == 1) {
    for (int i = 0; i <= n; ++i) {
      q[0] = m_.box_lo[0] + (m_.box_hi[0] - m_.box_lo[0]) * i / n;
      best = std::max(best, log_ratio(q));
    }
  } else {
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        q[0] = m_.box_lo[0] + (m_.box_hi[0] - m_.box_lo[0]) * i / n;
        q[1] = m_.box_lo[1] + (m_.box_hi[1] - m_.box_lo[1]) * j / n;
        best = std::max(best, log_ratio(q));
      }
  }
  log_bound_ = best + std::log(1.05);
}

void GibbsSampler::sample(RandomStream& rs, double* x) const {
  const int d = m_.dim();
  if (exact_) {
    const double sd = std::sqrt(m_.variance[0]);
    for (int k = 0; k < d; ++k) x[k] = sd * rs.normal();
  } else {
    long attempts = 0;
    for (;;) {
      ++attempts;
      double le = 0.0;
      for (int k = 0; k < d; ++k) {
        const double xi = rs.normal();
        x[k] = env_mean_[k] + env_sd_[k] * xi;
        le -= 0.5 * xi * xi;
      }
      const double log_accept = -m_.beta * m_.potential.value(x) - le - log_bound_;
      if (std::log(rs.uniform_open_low()) < log_accept) break;
      if (attempts >= 10'000'000)
        fail(ErrorCode::EnvelopeRejectionStall, "Gibbs rejection sampler acceptance rate < 1e-4");
    }
  }
  const double sp = 1.0 / std::sqrt(m_.beta);
  for (int k = d; k < m_.state_dim(); ++k) x[k] = sp * rs.normal();
}

std::vector<double> sample_gibbs(const GibbsMeasure& measure, long n, std::uint64_t seed) {
  require(n > 0, "sample count must be positive");
  const GibbsSampler sampler(measure);
  const int sd = measure.state_dim();
  std::vector<double> out(static_cast<std::size_t>(n) * sd);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      RandomStream rs(seed, i, Stream::initial);
      sampler.sample(rs, out.data() + i * sd);
    }
  });
  return out;
}

// ---- Shared path driver -----------------------------------------------------------------

namespace {

GibbsKind gibbs_kind_for(DynamicsKind k) {
  switch (k) {
    case DynamicsKind::overdamped: return GibbsKind::config_space;
    case DynamicsKind::underdamped: return GibbsKind::phase_space;
    default: return GibbsKind::gle_space;
  }
}

struct Initializer {
  InitSpec spec;
  int state_dim;
  std::optional<GibbsSampler> sampler;
  Mat chol;

  Initializer(const Model& m, const InitSpec& s) : spec(s), state_dim(m.state_dim()) {
    switch (s.kind) {
      case InitSpec::Kind::point:
        require(static_cast<int>(s.point.size()) == state_dim, "point init must give the full state");
        break;
      case InitSpec::Kind::gaussian: {
        require(s.mean.size() == state_dim && s.cov.rows() == state_dim && s.cov.cols() == state_dim,
                "gaussian init must give full-state mean and covariance");
        Eigen::LLT<Mat> llt(s.cov);
        require(llt.info() == Eigen::Success, "gaussian init covariance must be SPD");
        chol = llt.matrixL();
        break;
      }
      case InitSpec::Kind::gibbs:
        sampler.emplace(gibbs_auto(m.potential, m.beta, gibbs_kind_for(m.kind)));
        break;
    }
  }

  void draw(std::uint64_t seed, long path, double* x) const {
    switch (spec.kind) {
      case InitSpec::Kind::point: std::copy(spec.point.begin(), spec.point.end(), x); return;
      case InitSpec::Kind::gaussian: {
        RandomStream rs(seed, path, Stream::initial);
        Vec xi(state_dim);
        for (int k = 0; k < state_dim; ++k) xi(k) = rs.normal();
        Eigen::Map<Vec>(x, state_dim) = spec.mean + chol * xi;
        return;
      }
      case InitSpec::Kind::gibbs: {
        RandomStream rs(seed, path, Stream::initial);
        sampler->sample(rs, x);
        return;
      }
    }
  }
};

void check_finite(const double* x, int n, long path, long step) {
  for (int i = 0; i < n; ++i)
    if (!(std::abs(x[i]) <= kBlowUpThreshold))
      fail(ErrorCode::BlowUp, "state exceeded 1e8 on path " + std::to_string(path) + " at step " +
                                  std::to_string(step) + " (dt too large for the drift?)");
}

// Stepper contract: reset(x) once per path, then step(x, xi, k) advances x by one dt using the
// standard normals xi (null under zero_noise).
template <class MakeStepper>
Ensemble drive(const Model& m, const SimConfig& cfg, const InitSpec& init, DynamicsKind tag, const NoiseBank* bank,
               MakeStepper make) {
  m.validate();
  cfg.validate();
  const int d = m.dim();
  const int sd = m.state_dim();
  if (bank && (bank->n_steps != cfg.total_steps() || bank->n_paths < cfg.n_paths || bank->dim != d))
    fail(ErrorCode::NoiseStreamMismatch, "noise bank has " + std::to_string(bank->n_steps) + " steps, run needs " +
                                             std::to_string(cfg.total_steps()));
  const Initializer initializer(m, init);
  Ensemble e;
  e.n_paths = cfg.n_paths;
  e.n_records = cfg.n_records();
  e.dim = d;
  e.state_dim = sd;
  e.tag = tag;
  e.epsilon = m.epsilon();
  e.seed = cfg.seed;
  e.dt = cfg.dt;
  e.record_stride = cfg.record_stride;
  for (long r = 0; r < e.n_records; ++r) e.times.push_back(static_cast<double>(r * cfg.record_stride) * cfg.dt);
  e.states.assign(static_cast<std::size_t>(e.n_paths) * e.n_records * sd, 0.0);

  parallel_for(static_cast<std::size_t>(cfg.n_paths), [&](std::size_t lo, std::size_t hi) {
    std::vector<double> x(sd), xi(d);
    auto stepper = make();
    for (std::size_t path = lo; path < hi; ++path) {
      const long pl = static_cast<long>(path);
      RandomStream rs(cfg.seed, path, Stream::increments);
      initializer.draw(cfg.seed, pl, x.data());
      stepper.reset(x.data());
      long rec = 0;
      for (long k = 0; k <= cfg.total_steps(); ++k) {
        if (k >= cfg.burn_in_steps && (k - cfg.burn_in_steps) % cfg.record_stride == 0)
          std::copy(x.begin(), x.end(), e.state(pl, rec++));
        if (k == cfg.total_steps()) break;
        const double* noise = nullptr;
        if (!cfg.zero_noise) {
          if (bank) {
            noise = bank->at(pl, k);
          } else {
            for (int i = 0; i < d; ++i) xi[i] = rs.normal();
            noise = xi.data();
          }
        }
        stepper.step(x.data(), noise, k);
        check_finite(x.data(), sd, pl, k);
      }
    }
  });
  return e;
}

struct OverdampedStepper {
  const Model* m;
  Mat noise_factor;  // √(2dt/β) σ
  double dt;
  void reset(const double*) {}
  void step(double* q, const double* xi, long) {
    const int d = m->dim();
    double b[kMaxDim];
    m->drift(q, b);
    for (int i = 0; i < d; ++i) {
      double s = dt * b[i];
      if (xi)
        for (int j = 0; j < d; ++j) s += noise_factor(i, j) * xi[j];
      q[i] += s;
    }
  }
};

struct BaoabStepper {
  const Model* m;
  Mat decay, noise_factor;
  double dt;
  double f[kMaxDim];
  void reset(const double* x) { m->force(x, f); }
  void step(double* x, const double* xi, long) {
    const int d = m->dim();
    double* q = x;
    double* p = x + d;
    double tmp[kMaxDim];
    for (int i = 0; i < d; ++i) p[i] += 0.5 * dt * f[i];
    for (int i = 0; i < d; ++i) q[i] += 0.5 * dt * p[i];
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += decay(i, j) * p[j];
      if (xi)
        for (int j = 0; j < d; ++j) s += noise_factor(i, j) * xi[j];
      tmp[i] = s;
    }
    for (int i = 0; i < d; ++i) p[i] = tmp[i];
    for (int i = 0; i < d; ++i) q[i] += 0.5 * dt * p[i];
    m->force(q, f);
    for (int i = 0; i < d; ++i) p[i] += 0.5 * dt * f[i];
  }
};

struct GleAugmentedStepper {
  const Model* m;
  double dt, noise_scale;
  void reset(const double*) {}
  void step(double* x, const double* xi, long) {
    const int d = m->dim();
    double* q = x;
    double* p = x + d;
    double* z = x + 2 * d;
    double f[kMaxDim];
    m->force(q, f);
    for (int i = 0; i < d; ++i) {
      const double q0 = q[i], p0 = p[i], z0 = z[i];
      q[i] = q0 + dt * p0;
      p[i] = p0 + dt * (f[i] + z0);
      z[i] = z0 - dt * (m->alpha * z0 + p0) + (xi ? noise_scale * xi[i] : 0.0);
    }
  }
};

struct GleConvolutionStepper {
  const Model* m;
  double dt, decay, noise_scale;
  std::vector<double> history;  // p at every past step, [k][i]
  std::vector<double> forcing;  // f
  void reset(const double* x) {
    const int d = m->dim();
    history.assign(x + d, x + 2 * d);
    forcing.assign(x + 2 * d, x + 3 * d);
  }
  // Trapezoid of ∫₀^{t_n} e^{−α(t_n−s)} p(s) ds over the stored history.
  double memory(int i, long n) const {
    const int d = m->dim();
    if (n == 0) return 0.0;
    double s = 0.5 * history[static_cast<std::size_t>(n) * d + i];
    double w = decay;
    for (long k = n - 1; k >= 1; --k, w *= decay) s += w * history[static_cast<std::size_t>(k) * d + i];
    s += 0.5 * w * history[i];
    return dt * s;
  }
  void step(double* x, const double* xi, long n) {
    const int d = m->dim();
    double* q = x;
    double* p = x + d;
    double* z = x + 2 * d;
    double f[kMaxDim];
    m->force(q, f);
    for (int i = 0; i < d; ++i) {
      const double q0 = q[i], p0 = p[i];
      const double mem = memory(i, n);
      q[i] = q0 + dt * p0;
      p[i] = p0 + dt * (f[i] - mem + forcing[i]);
      forcing[i] = decay * forcing[i] + (xi ? noise_scale * xi[i] : 0.0);
    }
    history.insert(history.end(), p, p + d);
    for (int i = 0; i < d; ++i) z[i] = forcing[i] - memory(i, n + 1);
  }
};

}  // namespace

Ensemble simulate_overdamped(const Model& m, const SimConfig& cfg, const InitSpec& init) {
  require(m.kind == DynamicsKind::overdamped, "simulate_overdamped needs an overdamped model");
  const Mat factor = std::sqrt(2.0 * cfg.dt / m.beta) * m.sigma.sigma();
  return drive(m, cfg, init, DynamicsKind::overdamped, nullptr,
               [&] { return OverdampedStepper{&m, factor, cfg.dt}; });
}

Ensemble simulate_underdamped(const Model& m, const SimConfig& cfg, const InitSpec& init) {
  require(m.kind == DynamicsKind::underdamped, "simulate_underdamped needs an underdamped model");
  const double dt = cfg.dt, beta = m.beta;
  const Mat decay = symmetric_function(m.sigma.a(), [dt](double l) { return std::exp(-l * dt); });
  const Mat noise = symmetric_function(
      m.sigma.a(), [dt, beta](double l) { return std::sqrt(std::max(0.0, -std::expm1(-2.0 * l * dt)) / beta); });
  return drive(m, cfg, init, DynamicsKind::underdamped, nullptr, [&] {
    BaoabStepper s{&m, decay, noise, dt, {}};
    return s;
  });
}

Ensemble simulate_gle_augmented(const Model& m, const SimConfig& cfg, const InitSpec& init, const NoiseBank* noise) {
  require(m.kind == DynamicsKind::gle_augmented || m.kind == DynamicsKind::gle_convolution,
          "simulate_gle_augmented needs a GLE model");
  const double scale = std::sqrt(2.0 * m.alpha * cfg.dt / m.beta);
  return drive(m, cfg, init, DynamicsKind::gle_augmented, noise,
               [&] { return GleAugmentedStepper{&m, cfg.dt, scale}; });
}

Ensemble simulate_gle_convolution(const Model& m, const SimConfig& cfg, const InitSpec& init,
                                  const NoiseBank* noise) {
  require(m.kind == DynamicsKind::gle_augmented || m.kind == DynamicsKind::gle_convolution,
          "simulate_gle_convolution needs a GLE model");
  const double decay = std::exp(-m.alpha * cfg.dt);
  const double scale = std::sqrt(-std::expm1(-2.0 * m.alpha * cfg.dt) / m.beta);
  return drive(m, cfg, init, DynamicsKind::gle_convolution, noise,
               [&] { return GleConvolutionStepper{&m, cfg.dt, decay, scale, {}, {}}; });
}

GleComparison compare_gle_forms(const Model& m, double dt, double horizon, long n_paths, std::uint64_t seed) {
  require(dt > 0.0 && horizon > 0.0 && n_paths > 0, "comparison needs positive dt, horizon and paths");
  const long coarse_steps = std::lround(horizon / dt);
  require(coarse_steps > 0 && std::abs(static_cast<double>(coarse_steps) * dt - horizon) < 1e-9 * horizon,
          "horizon must be a multiple of dt");
  const NoiseBank fine = NoiseBank::generate(seed, n_paths, 2 * coarse_steps, m.dim());
  const NoiseBank coarse = fine.coarsened();
  auto gap = [&](double h, long steps, const NoiseBank& bank, long stride) {
    SimConfig cfg;
    cfg.dt = h;
    cfg.n_steps = steps;
    cfg.n_paths = n_paths;
    cfg.seed = seed;
    cfg.record_stride = stride;
    const Ensemble a = simulate_gle_augmented(m, cfg, InitSpec::gibbs(), &bank);
    const Ensemble c = simulate_gle_convolution(m, cfg, InitSpec::gibbs(), &bank);
    double worst = 0.0;
    for (long p = 0; p < n_paths; ++p)
      for (long r = 0; r < a.n_records; ++r)
        for (int i = 0; i < a.dim; ++i) worst = std::max(worst, std::abs(a.state(p, r)[i] - c.state(p, r)[i]));
    return worst;
  };
  // Both runs record on the coarse grid.
  return {dt, gap(dt, coarse_steps, coarse, 1), gap(dt / 2.0, 2 * coarse_steps, fine, 2)};
}

Ensemble simulate(const Model& m, const SimConfig& cfg, const InitSpec& init) {
  switch (m.kind) {
    case DynamicsKind::overdamped: return simulate_overdamped(m, cfg, init);
    case DynamicsKind::underdamped: return simulate_underdamped(m, cfg, init);
    case DynamicsKind::gle_augmented: return simulate_gle_augmented(m, cfg, init);
    case DynamicsKind::gle_convolution: return simulate_gle_convolution(m, cfg, init);
  }
  fail(ErrorCode::Internal, "unknown dynamics");
}

}  // namespace lgv
