#include "lgv/model.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lgv/error.hpp"
#include "lgv/quadrature.hpp"

namespace lgv {

// ---- Bump -------------------------------------------------------------------------------

double Bump::shape(const double* q, double* s_out) const {
  double s = 0.0;
  for (std::size_t i = 0; i < center.size(); ++i) s += (q[i] - center[i]) * (q[i] - center[i]);
  s /= radius * radius;
  if (s_out) *s_out = s;
  if (s >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s));
}

double Bump::value(const double* q) const { return amplitude * shape(q); }

void Bump::gradient(const double* q, double* g) const {
  double s;
  const double w = amplitude * shape(q, &s);
  const std::size_t d = center.size();
  if (w == 0.0) {
    std::fill(g, g + d, 0.0);
    return;
  }
  const double u = 1.0 / (1.0 - s);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < d; ++i) g[i] = -w * u * u * 2.0 * (q[i] - center[i]) / r2;
}

void Bump::hessian(const double* q, double* h) const {
  double s;
  const double w = amplitude * shape(q, &s);
  const std::size_t d = center.size();
  std::fill(h, h + d * d, 0.0);
  if (w == 0.0) return;
  const double u = 1.0 / (1.0 - s);
  const double r2 = radius * radius;
  const double c1 = w * (u * u * u * u - 2.0 * u * u * u);
  for (std::size_t i = 0; i < d; ++i) {
    const double si = 2.0 * (q[i] - center[i]) / r2;
    for (std::size_t j = 0; j < d; ++j) h[i * d + j] = c1 * si * 2.0 * (q[j] - center[j]) / r2;
    h[i * d + i] -= w * u * u * 2.0 / r2;
  }
}

// ---- Potential --------------------------------------------------------------------------

struct Potential::Table {
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
  double q0, q1, v0, v1, d0, d1;
};

Potential Potential::quadratic(int dim, double k) {
  require(dim >= 1 && dim <= kMaxDim, "potential dimension must be in [1, 8]");
  Potential p;
  p.kind_ = PotentialKind::quadratic;
  p.dim_ = dim;
  p.k_ = k;
  return p;
}

Potential Potential::double_well(int dim, double a, double b) {
  require(dim >= 1 && dim <= kMaxDim, "potential dimension must be in [1, 8]");
  Potential p;
  p.kind_ = PotentialKind::double_well;
  p.dim_ = dim;
  p.a_ = a;
  p.b_ = b;
  return p;
}

Potential Potential::tabulated(const std::vector<double>& q, const std::vector<double>& v) {
  require(q.size() == v.size() && q.size() >= 4, "tabulated potential needs at least 4 (q, V) rows");
  const double h = (q.back() - q.front()) / static_cast<double>(q.size() - 1);
  require(h > 0, "tabulated potential grid must be increasing");
  for (std::size_t i = 1; i < q.size(); ++i)
    require(std::abs(q[i] - q[i - 1] - h) <= 1e-6 * h,
            "tabulated potential grid must be uniform");
  for (double x : v) require(std::isfinite(x), "tabulated potential values must be finite");
  Potential p;
  p.kind_ = PotentialKind::tabulated;
  p.dim_ = 1;
  auto t = std::make_shared<Table>(Table{
      boost::math::interpolators::cardinal_cubic_b_spline<double>(v.begin(), v.end(), q.front(), h), q.front(), q.back(), 0, 0, 0, 0});
  t->v0 = t->spline(t->q0);
  t->v1 = t->spline(t->q1);
  t->d0 = t->spline.prime(t->q0);
  t->d1 = t->spline.prime(t->q1);
  p.table_ = std::move(t);
  return p;
}

Potential Potential::zero(int dim) {
  require(dim >= 1 && dim <= kMaxDim, "potential dimension must be in [1, 8]");
  Potential p;
  p.kind_ = PotentialKind::zero;
  p.dim_ = dim;
  return p;
}

Potential Potential::custom(int dim, CustomPotential fns) {
  require(dim >= 1 && dim <= kMaxDim, "potential dimension must be in [1, 8]");
  require(fns.value && fns.gradient, "custom potential needs value and gradient callbacks");
  Potential p;
  p.kind_ = PotentialKind::custom;
  p.dim_ = dim;
  p.custom_ = std::make_shared<CustomPotential>(std::move(fns));
  return p;
}

Potential Potential::plus_bump(const Bump& w, double coef) const {
  require(static_cast<int>(w.center.size()) == dim_, "bump center dimension mismatch");
  Potential p = *this;
  p.extras_.push_back({true, w, {}, coef});
  return p;
}

Potential Potential::plus_linear(const std::vector<double>& g, double coef) const {
  require(static_cast<int>(g.size()) == dim_, "linear term dimension mismatch");
  Potential p = *this;
  p.extras_.push_back({false, {}, g, coef});
  return p;
}

bool Potential::has_hessian() const { return kind_ != PotentialKind::custom || static_cast<bool>(custom_->hessian); }

std::string Potential::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case PotentialKind::quadratic: os << "quadratic(k=" << k_ << ")"; break;
    case PotentialKind::double_well: os << "double_well(a=" << a_ << ",b=" << b_ << ")"; break;
    case PotentialKind::tabulated: os << "tabulated"; break;
    case PotentialKind::zero: os << "zero"; break;
    case PotentialKind::custom: os << "custom"; break;
  }
  for (const auto& t : extras_) os << (t.is_bump ? " + bump" : " + linear") << "*" << t.coef;
  os << " [d=" << dim_ << "]";
  return os.str();
}

double Potential::value(const double* q) const {
  double v = 0.0;
  switch (kind_) {
    case PotentialKind::quadratic:
      for (int i = 0; i < dim_; ++i) v += 0.5 * k_ * q[i] * q[i];
      break;
    case PotentialKind::double_well:
      for (int i = 0; i < dim_; ++i) {
        const double x2 = q[i] * q[i];
        v += a_ * x2 * x2 - b_ * x2;
      }
      break;
    case PotentialKind::tabulated: {
      const Table& t = *table_;
      if (q[0] < t.q0) v = t.v0 + t.d0 * (q[0] - t.q0);
      else if (q[0] > t.q1) v = t.v1 + t.d1 * (q[0] - t.q1);
      else v = t.spline(q[0]);
      break;
    }
    case PotentialKind::zero: break;
    case PotentialKind::custom: v = custom_->value(q); break;
  }
  for (const auto& t : extras_) {
    if (t.is_bump) {
      v += t.coef * t.bump.value(q);
    } else {
      for (int i = 0; i < dim_; ++i) v += t.coef * t.linear[i] * q[i];
    }
  }
  return v;
}

void Potential::gradient(const double* q, double* g) const {
  switch (kind_) {
    case PotentialKind::quadratic:
      for (int i = 0; i < dim_; ++i) g[i] = k_ * q[i];
      break;
    case PotentialKind::double_well:
      for (int i = 0; i < dim_; ++i) g[i] = 4.0 * a_ * q[i] * q[i] * q[i] - 2.0 * b_ * q[i];
      break;
    case PotentialKind::tabulated: {
      const Table& t = *table_;
      g[0] = q[0] < t.q0 ? t.d0 : (q[0] > t.q1 ? t.d1 : t.spline.prime(q[0]));
      break;
    }
    case PotentialKind::zero: std::fill(g, g + dim_, 0.0); break;
    case PotentialKind::custom: custom_->gradient(q, g); break;
  }
  double tmp[kMaxDim];
  for (const auto& t : extras_) {
    if (t.is_bump) {
      t.bump.gradient(q, tmp);
      for (int i = 0; i < dim_; ++i) g[i] += t.coef * tmp[i];
    } else {
      for (int i = 0; i < dim_; ++i) g[i] += t.coef * t.linear[i];
    }
  }
}

void Potential::hessian(const double* q, double* h) const {
  const int d = dim_;
  std::fill(h, h + d * d, 0.0);
  switch (kind_) {
    case PotentialKind::quadratic:
      for (int i = 0; i < d; ++i) h[i * d + i] = k_;
      break;
    case PotentialKind::double_well:
      for (int i = 0; i < d; ++i) h[i * d + i] = 12.0 * a_ * q[i] * q[i] - 2.0 * b_;
      break;
    case PotentialKind::tabulated: {
      const Table& t = *table_;
      h[0] = (q[0] < t.q0 || q[0] > t.q1) ? 0.0 : t.spline.double_prime(q[0]);
      break;
    }
    case PotentialKind::zero: break;
    case PotentialKind::custom:
      if (!custom_->hessian) fail(ErrorCode::MissingHessian, "custom potential has no Hessian callback");
      custom_->hessian(q, h);
      break;
  }
  double tmp[kMaxDim * kMaxDim];
  for (const auto& t : extras_) {
    if (!t.is_bump) continue;
    t.bump.hessian(q, tmp);
    for (int i = 0; i < d * d; ++i) h[i] += t.coef * tmp[i];
  }
}

// ---- PerturbationSpec -------------------------------------------------------------------

PerturbationSpec PerturbationSpec::bump(std::vector<double> center, double radius, double amplitude,
                                        double epsilon) {
  PerturbationSpec p;
  p.form = PerturbationForm::potential_bump;
  p.center = std::move(center);
  p.radius = radius;
  p.amplitude = amplitude;
  p.epsilon = epsilon;
  require(radius > 0, "perturbation radius must be positive");
  return p;
}

PerturbationSpec PerturbationSpec::linear(std::vector<double> direction, double amplitude, double epsilon) {
  PerturbationSpec p;
  p.form = PerturbationForm::linear_override;
  p.direction = std::move(direction);
  p.center.assign(p.direction.size(), 0.0);
  p.amplitude = amplitude;
  p.epsilon = epsilon;
  p.radius = std::numeric_limits<double>::infinity();
  p.analytic_override = true;
  return p;
}

PerturbationSpec PerturbationSpec::field(std::vector<double> center, double radius, double amplitude,
                                         std::vector<double> direction, double swirl, double epsilon) {
  PerturbationSpec p;
  p.form = PerturbationForm::general_field;
  p.center = std::move(center);
  p.radius = radius;
  p.amplitude = amplitude;
  p.direction = std::move(direction);
  p.swirl = swirl;
  p.epsilon = epsilon;
  require(radius > 0, "perturbation radius must be positive");
  require(p.direction.size() == p.center.size(), "field direction dimension mismatch");
  require(swirl == 0.0 || p.center.size() == 2, "swirl fields need d = 2");
  return p;
}

int PerturbationSpec::dim() const { return static_cast<int>(center.size()); }

Bump PerturbationSpec::as_bump() const { return Bump{center, radius, amplitude}; }

double PerturbationSpec::potential(const double* q) const {
  switch (form) {
    case PerturbationForm::potential_bump: return as_bump().value(q);
    case PerturbationForm::linear_override: {
      double v = 0.0;
      for (std::size_t i = 0; i < direction.size(); ++i) v += amplitude * direction[i] * q[i];
      return v;
    }
    case PerturbationForm::general_field: break;
  }
  fail(ErrorCode::NonGradientPerturbation, "general_field perturbation has no potential");
}

void PerturbationSpec::field(const double* q, double* m) const {
  const int d = dim();
  switch (form) {
    case PerturbationForm::potential_bump: as_bump().gradient(q, m); return;
    case PerturbationForm::linear_override:
      for (int i = 0; i < d; ++i) m[i] = amplitude * direction[i];
      return;
    case PerturbationForm::general_field: {
      const double phi = amplitude * Bump{center, radius, 1.0}.shape(q);
      for (int i = 0; i < d; ++i) m[i] = phi * direction[i];
      if (swirl != 0.0) {
        m[0] += -phi * swirl * (q[1] - center[1]);
        m[1] += phi * swirl * (q[0] - center[0]);
      }
      return;
    }
  }
}

void PerturbationSpec::field_jacobian(const double* q, double* j) const {
  const int d = dim();
  switch (form) {
    case PerturbationForm::potential_bump: as_bump().hessian(q, j); return;
    case PerturbationForm::linear_override: std::fill(j, j + d * d, 0.0); return;
    case PerturbationForm::general_field: {
      const Bump unit{center, radius, 1.0};
      const double phi = amplitude * unit.shape(q);
      double gphi[kMaxDim];
      unit.gradient(q, gphi);
      for (int b = 0; b < d; ++b) gphi[b] *= amplitude;
      double v[kMaxDim];
      for (int a = 0; a < d; ++a) v[a] = direction[a];
      if (swirl != 0.0) {
        v[0] += -swirl * (q[1] - center[1]);
        v[1] += swirl * (q[0] - center[0]);
      }
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) j[a * d + b] = gphi[b] * v[a];
      if (swirl != 0.0) {
        j[0 * d + 1] += -phi * swirl;
        j[1 * d + 0] += phi * swirl;
      }
      return;
    }
  }
}

void PerturbationSpec::potential_hessian(const double* q, double* h) const {
  if (!is_gradient()) fail(ErrorCode::NonGradientPerturbation, "general_field perturbation has no potential");
  field_jacobian(q, h);
}

// ---- DiffusionMatrix --------------------------------------------------------------------

DiffusionMatrix::DiffusionMatrix(Mat sigma) : sigma_(std::move(sigma)) {
  require(sigma_.rows() == sigma_.cols() && sigma_.rows() >= 1, "sigma must be a square matrix");
  if (!(std::abs(sigma_.determinant()) > 1e-12)) fail(ErrorCode::SingularSigma, "sigma is singular (|det| <= 1e-12)");
  a_ = sigma_ * sigma_.transpose();
  a_ = 0.5 * (a_ + a_.transpose());
  a_inv_ = a_.inverse();
}

DiffusionMatrix DiffusionMatrix::diagonal(const std::vector<double>& s) {
  Mat m = Mat::Zero(s.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) m(i, i) = s[i];
  return DiffusionMatrix(m);
}

// ---- GibbsMeasure -----------------------------------------------------------------------

int GibbsMeasure::state_dim() const {
  switch (kind) {
    case GibbsKind::config_space: return dim();
    case GibbsKind::phase_space: return 2 * dim();
    case GibbsKind::gle_space: return 3 * dim();
  }
  return dim();
}

double GibbsMeasure::config_density(const double* q) const { return std::exp(-beta * potential.value(q) - logZ); }

double GibbsMeasure::log_density(const double* x) const {
  const int d = dim();
  double lp = -beta * potential.value(x) - logZ;
  const int blocks = state_dim() / d - 1;
  for (int i = d; i < d + blocks * d; ++i) lp += -0.5 * beta * x[i] * x[i];
  lp -= 0.5 * blocks * d * std::log(2.0 * std::numbers::pi / beta);
  return lp;
}

double GibbsMeasure::density(const double* x) const {
  if (kind == GibbsKind::config_space) return config_density(x);
  // Factorized evaluation keeps the config factor bit-identical to config_density.
  const int d = dim();
  double g = 1.0;
  for (int i = d; i < state_dim(); ++i) g *= std::exp(-0.5 * beta * x[i] * x[i]) / std::sqrt(2.0 * std::numbers::pi / beta);
  return config_density(x) * g;
}

GibbsMeasure GibbsMeasure::with_kind(GibbsKind k) const {
  GibbsMeasure m = *this;
  m.kind = k;
  return m;
}

namespace {

// Mass beyond an edge, from the local exponential decay of the integrand at the boundary.
double edge_tail(double f_edge, double f_inner, double h) {
  if (f_edge == 0.0) return 0.0;
  const double kappa = std::log(f_inner / f_edge) / h;
  if (!(kappa > 0.0)) return std::numeric_limits<double>::infinity();
  return f_edge / kappa;
}

void check_beta(double beta) { require(beta > 0 && std::isfinite(beta), "beta must be positive"); }

}  // namespace

GibbsMeasure gibbs_normalize(const Potential& v, double beta, const Grid1D& grid, GibbsKind kind) {
  check_beta(beta);
  require(v.dim() == 1, "1D grid needs a 1D potential");
  const auto w = simpson_weights(grid);
  std::vector<double> u(grid.n + 1);
  double umin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= grid.n; ++i) {
    const double q = grid.node(i);
    u[i] = beta * v.value(&q);
    umin = std::min(umin, u[i]);
  }
  double z = 0, m1 = 0, m2 = 0;
  std::vector<double> f(grid.n + 1);
  for (std::size_t i = 0; i <= grid.n; ++i) {
    f[i] = std::exp(-(u[i] - umin));
    const double q = grid.node(i);
    z += w[i] * f[i];
    m1 += w[i] * f[i] * q;
    m2 += w[i] * f[i] * q * q;
  }
  const double tail = edge_tail(f[0], f[1], grid.h()) + edge_tail(f[grid.n], f[grid.n - 1], grid.h());
  if (!(tail <= 1e-6 * z))
    fail(ErrorCode::NonConfining, "Gibbs weight does not decay inside the grid (tail fraction > 1e-6)");
  GibbsMeasure m;
  m.potential = v;
  m.beta = beta;
  m.kind = kind;
  m.logZ = std::log(z) - umin;
  m.mean = {m1 / z};
  m.variance = {m2 / z - (m1 / z) * (m1 / z)};
  m.box_lo = {grid.lo};
  m.box_hi = {grid.hi};
  double mass = 0;
  for (std::size_t i = 0; i <= grid.n; ++i) {
    const double q = grid.node(i);
    mass += w[i] * m.config_density(&q);
  }
  m.mass_error = std::abs(mass - 1.0);
  return m;
}

GibbsMeasure gibbs_normalize(const Potential& v, double beta, const Grid2D& grid, GibbsKind kind) {
  check_beta(beta);
  require(v.dim() == 2, "2D grid needs a 2D potential");
  const auto wx = simpson_weights(grid.x);
  const auto wy = simpson_weights(grid.y);
  const std::size_t nx = grid.x.n + 1, ny = grid.y.n + 1;
  std::vector<double> u(nx * ny);
  double umin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double q[2] = {grid.x.node(i), grid.y.node(j)};
      u[i * ny + j] = beta * v.value(q);
      umin = std::min(umin, u[i * ny + j]);
    }
  double z = 0, m1[2] = {0, 0}, m2[2] = {0, 0};
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double f = std::exp(-(u[i * ny + j] - umin)) * wx[i] * wy[j];
      const double q[2] = {grid.x.node(i), grid.y.node(j)};
      z += f;
      for (int k = 0; k < 2; ++k) {
        m1[k] += f * q[k];
        m2[k] += f * q[k] * q[k];
      }
    }
  // Edge tails: integrate the 1D tail estimate along each boundary line.
  double tail = 0;
  auto f_at = [&](std::size_t i, std::size_t j) { return std::exp(-(u[i * ny + j] - umin)); };
  for (std::size_t j = 0; j < ny; ++j) {
    tail += wy[j] * edge_tail(f_at(0, j), f_at(1, j), grid.x.h());
    tail += wy[j] * edge_tail(f_at(nx - 1, j), f_at(nx - 2, j), grid.x.h());
  }
  for (std::size_t i = 0; i < nx; ++i) {
    tail += wx[i] * edge_tail(f_at(i, 0), f_at(i, 1), grid.y.h());
    tail += wx[i] * edge_tail(f_at(i, ny - 1), f_at(i, ny - 2), grid.y.h());
  }
  if (!(tail <= 1e-6 * z))
    fail(ErrorCode::NonConfining, "Gibbs weight does not decay inside the grid (tail fraction > 1e-6)");
  GibbsMeasure m;
  m.potential = v;
  m.beta = beta;
  m.kind = kind;
  m.logZ = std::log(z) - umin;
  for (int k = 0; k < 2; ++k) {
    m.mean.push_back(m1[k] / z);
    m.variance.push_back(m2[k] / z - (m1[k] / z) * (m1[k] / z));
  }
  m.box_lo = {grid.x.lo, grid.y.lo};
  m.box_hi = {grid.x.hi, grid.y.hi};
  double mass = 0;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double q[2] = {grid.x.node(i), grid.y.node(j)};
      mass += wx[i] * wy[j] * m.config_density(q);
    }
  m.mass_error = std::abs(mass - 1.0);
  return m;
}

namespace {

// Walks outward along one axis until βU exceeds its running minimum by `gap`.
double axis_extent(const Potential& v, double beta, int axis, double sign, double gap) {
  double q[kMaxDim] = {0};
  double running_min = std::numeric_limits<double>::infinity();
  const double step = 0.05;
  for (int k = 0; k <= 40000; ++k) {
    q[axis] = sign * k * step;
    const double u = beta * v.value(q);
    running_min = std::min(running_min, u);
    if (u - running_min > gap && k > 0) return q[axis];
  }
  fail(ErrorCode::NonConfining, "potential does not grow along a coordinate axis within |q| <= 2000");
}

}  // namespace

GibbsMeasure gibbs_auto(const Potential& v, double beta, GibbsKind kind) {
  check_beta(beta);
  const int d = v.dim();
  if (v.is_pure_quadratic()) {
    if (!(v.stiffness() > 0)) fail(ErrorCode::NonConfining, "quadratic potential needs positive stiffness");
    GibbsMeasure m;
    m.potential = v;
    m.beta = beta;
    m.kind = kind;
    m.logZ = 0.5 * d * std::log(2.0 * std::numbers::pi / (beta * v.stiffness()));
    m.mean.assign(d, 0.0);
    m.variance.assign(d, 1.0 / (beta * v.stiffness()));
    const double r = 10.0 / std::sqrt(beta * v.stiffness());
    m.box_lo.assign(d, -r);
    m.box_hi.assign(d, r);
    return m;
  }
  require(d <= 2, "non-quadratic Gibbs measures are supported for d <= 2 only");
  std::vector<Grid1D> axes;
  for (int a = 0; a < d; ++a) {
    const double lo = axis_extent(v, beta, a, -1.0, 40.0), hi = axis_extent(v, beta, a, 1.0, 40.0);
    const double pad = 0.1 * (hi - lo);
    axes.emplace_back(lo - pad, hi + pad, d == 1 ? 4096 : 512);
  }
  if (d == 1) return gibbs_normalize(v, beta, axes[0], kind);
  return gibbs_normalize(v, beta, Grid2D{axes[0], axes[1]}, kind);
}

// ---- Conjugate observable ---------------------------------------------------------------

ScalarField conjugate_observable_overdamped(const std::optional<PerturbationSpec>& m, const Potential& v,
                                            const DiffusionMatrix& sigma, double beta) {
  if (!m || m->amplitude == 0.0) return [](const double*) { return 0.0; };
  const int d = v.dim();
  require(m->dim() == d && sigma.dim() == d, "conjugate observable: dimension mismatch");
  const PerturbationSpec pert = *m;
  const Mat a = sigma.a();
  const Potential pot = v;
  return [pert, a, pot, beta, d](const double* q) {
    double mv[kMaxDim], gv[kMaxDim], jac[kMaxDim * kMaxDim];
    pert.field(q, mv);
    pot.gradient(q, gv);
    pert.field_jacobian(q, jac);
    double h = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) h += beta * a(i, j) * mv[j] * gv[i] - a(i, j) * jac[j * d + i];
    return h;
  };
}

// ---- Assumption probes ------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> probe_sphere(int d, double r) {
  std::vector<std::vector<double>> pts;
  if (d == 1) return {{r}, {-r}};
  if (d == 2) {
    for (int k = 0; k < 64; ++k) {
      const double t = 2.0 * std::numbers::pi * k / 64.0;
      pts.push_back({r * std::cos(t), r * std::sin(t)});
    }
    return pts;
  }
  // Axis points and cube diagonals.
  for (int a = 0; a < d; ++a)
    for (double s : {-1.0, 1.0}) {
      std::vector<double> p(d, 0.0);
      p[a] = s * r;
      pts.push_back(p);
    }
  for (int mask = 0; mask < (1 << d); ++mask) {
    std::vector<double> p(d);
    for (int a = 0; a < d; ++a) p[a] = ((mask >> a) & 1 ? 1.0 : -1.0) * r / std::sqrt(static_cast<double>(d));
    pts.push_back(p);
  }
  return pts;
}

struct ProbeValues {
  double max_I = -std::numeric_limits<double>::infinity();
  double min_II = std::numeric_limits<double>::infinity();
};

ProbeValues probe(const Potential& v, const DiffusionMatrix& sigma, double alpha, double r, bool check_II) {
  const int d = v.dim();
  ProbeValues out;
  for (const auto& q : probe_sphere(d, r)) {
    Vec g(d);
    v.gradient(q.data(), g.data());
    const double norm = Eigen::Map<const Vec>(q.data(), d).norm();
    const double qg = Eigen::Map<const Vec>(q.data(), d).dot(g);
    out.max_I = std::max(out.max_I, -qg / std::pow(norm, alpha + 1.0));
    if (check_II) {
      Mat h(d, d);
      v.hessian(q.data(), h.data());  // symmetric, so storage order is irrelevant
      const double val = (sigma.sigma().transpose() * g).squaredNorm() - 2.0 * (sigma.a() * h).trace();
      out.min_II = std::min(out.min_II, val);
    }
  }
  return out;
}

}  // namespace

AssumptionReport verify_assumptions(const Potential& v, const DiffusionMatrix& sigma, double alpha,
                                    double probe_radius, bool check_II) {
  require(probe_radius >= 5.0, "probe_radius must be >= 5");
  require(alpha > 0, "alpha must be positive");
  require(sigma.dim() == v.dim(), "sigma dimension mismatch");
  if (check_II && !v.has_hessian()) fail(ErrorCode::MissingHessian, "assumption (II) needs the Hessian of V");
  const auto inner = probe(v, sigma, alpha, probe_radius, check_II);
  const auto outer = probe(v, sigma, alpha, 2.0 * probe_radius, check_II);
  AssumptionReport r;
  r.alpha = alpha;
  r.radius = probe_radius;
  r.probe_I = inner.max_I;
  r.probe_I_outer = outer.max_I;
  r.pass_I = inner.max_I < 0 && outer.max_I < 0 && std::abs(outer.max_I) >= 0.5 * std::abs(inner.max_I);
  r.checked_II = check_II;
  if (check_II) {
    r.probe_II = inner.min_II;
    r.probe_II_outer = outer.min_II;
    r.pass_II = inner.min_II > 0 && outer.min_II > 0 && outer.min_II >= 0.5 * inner.min_II;
  }
  return r;
}

// ---- Model ------------------------------------------------------------------------------

const char* dynamics_tag(DynamicsKind k) {
  switch (k) {
    case DynamicsKind::overdamped: return "overdamped";
    case DynamicsKind::underdamped: return "underdamped";
    case DynamicsKind::gle_augmented: return "gle_augmented";
    case DynamicsKind::gle_convolution: return "gle_convolution";
  }
  return "overdamped";
}

DynamicsKind parse_dynamics_tag(const std::string& s) {
  if (s == "overdamped") return DynamicsKind::overdamped;
  if (s == "underdamped") return DynamicsKind::underdamped;
  if (s == "gle" || s == "gle_augmented") return DynamicsKind::gle_augmented;
  if (s == "gle_convolution") return DynamicsKind::gle_convolution;
  fail(ErrorCode::InvalidArgument, "unknown dynamics tag '" + s + "'");
}

int Model::state_dim() const {
  switch (kind) {
    case DynamicsKind::overdamped: return dim();
    case DynamicsKind::underdamped: return 2 * dim();
    case DynamicsKind::gle_augmented:
    case DynamicsKind::gle_convolution: return 3 * dim();
  }
  return dim();
}

Model Model::with_epsilon(double eps) const {
  Model m = *this;
  if (m.perturbation) m.perturbation->epsilon = eps;
  return m;
}

Model Model::unperturbed() const { return with_epsilon(0.0); }

bool Model::is_gradient() const { return rotation == 0.0 && (!perturbation || perturbation->is_gradient() || epsilon() == 0.0); }

Potential Model::effective_potential() const {
  if (!perturbation || epsilon() == 0.0) return potential;
  const auto& p = *perturbation;
  if (!p.is_gradient()) fail(ErrorCode::NonGradientPerturbation, "effective potential needs a gradient perturbation");
  if (p.form == PerturbationForm::potential_bump) return potential.plus_bump(p.as_bump(), -p.epsilon);
  std::vector<double> g(p.direction.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = p.amplitude * p.direction[i];
  return potential.plus_linear(g, -p.epsilon);
}

void Model::force(const double* q, double* f) const {
  const int d = dim();
  potential.gradient(q, f);
  for (int i = 0; i < d; ++i) f[i] = -f[i];
  if (perturbation && perturbation->epsilon != 0.0) {
    double m[kMaxDim];
    perturbation->field(q, m);
    for (int i = 0; i < d; ++i) f[i] += perturbation->epsilon * m[i];
  }
  if (rotation != 0.0) {
    f[0] += -rotation * q[1];
    f[1] += rotation * q[0];
  }
}

void Model::drift(const double* q, double* b) const {
  const int d = dim();
  double f[kMaxDim];
  potential.gradient(q, f);
  for (int i = 0; i < d; ++i) f[i] = -f[i];
  if (perturbation && perturbation->epsilon != 0.0) {
    double m[kMaxDim];
    perturbation->field(q, m);
    for (int i = 0; i < d; ++i) f[i] += perturbation->epsilon * m[i];
  }
  const Mat& a = sigma.a();
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += a(i, j) * f[j];
    b[i] = s;
  }
  if (rotation != 0.0) {
    b[0] += -rotation * q[1];
    b[1] += rotation * q[0];
  }
}

void Model::validate() const {
  const int d = dim();
  require(sigma.dim() == d, "sigma dimension must match the potential dimension");
  require(beta > 0 && std::isfinite(beta), "beta must be positive");
  require(alpha > 0 && std::isfinite(alpha), "alpha must be positive");
  require(rotation == 0.0 || d == 2, "rotation requires d = 2");
  if (perturbation) {
    require(perturbation->dim() == d, "perturbation dimension must match the potential dimension");
    require(perturbation->epsilon >= 0.0, "epsilon must be non-negative");
  }
}

std::optional<GaussianState> linear_stationary(const Model& m) {
  m.validate();
  if (!m.potential.is_pure_quadratic()) return std::nullopt;
  if (m.perturbation && m.epsilon() != 0.0 && m.perturbation->form != PerturbationForm::linear_override)
    return std::nullopt;
  const int d = m.dim(), n = m.state_dim();
  // Affine vector field x ↦ Bx + c, read off by evaluating the drift (or force) at 0 and eᵢ.
  Mat fq(d, d);
  Vec f0(d);
  std::vector<double> e(d, 0.0), v(d);
  auto eval = [&](const double* q, double* out) {
    if (m.kind == DynamicsKind::overdamped)
      m.drift(q, out);
    else
      m.force(q, out);
  };
  eval(e.data(), v.data());
  for (int i = 0; i < d; ++i) f0(i) = v[i];
  for (int j = 0; j < d; ++j) {
    e[j] = 1.0;
    eval(e.data(), v.data());
    for (int i = 0; i < d; ++i) fq(i, j) = v[i] - f0(i);
    e[j] = 0.0;
  }
  Mat b = Mat::Zero(n, n), q = Mat::Zero(n, n);
  Vec c = Vec::Zero(n);
  const Mat id = Mat::Identity(d, d);
  switch (m.kind) {
    case DynamicsKind::overdamped:
      b = fq;
      c = f0;
      q = 2.0 / m.beta * m.sigma.a();
      break;
    case DynamicsKind::underdamped:
      b.block(0, d, d, d) = id;
      b.block(d, 0, d, d) = fq;
      b.block(d, d, d, d) = -m.sigma.a();
      c.segment(d, d) = f0;
      q.block(d, d, d, d) = 2.0 / m.beta * m.sigma.a();
      break;
    default:
      b.block(0, d, d, d) = id;
      b.block(d, 0, d, d) = fq;
      b.block(d, 2 * d, d, d) = id;
      b.block(2 * d, d, d, d) = -id;
      b.block(2 * d, 2 * d, d, d) = -m.alpha * id;
      c.segment(d, d) = f0;
      q.block(2 * d, 2 * d, d, d) = 2.0 * m.alpha / m.beta * id;
      break;
  }
  Eigen::EigenSolver<Mat> es(b);
  if (es.eigenvalues().real().maxCoeff() >= 0.0) fail(ErrorCode::NonConfining, "linear model has no stationary law");
  return GaussianState{-b.partialPivLu().solve(c), lyapunov(b, q)};
}

}  // namespace lgv
