#include "lgv/fp.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "lgv/error.hpp"
#include "lgv/quadrature.hpp"
#include "lgv/stats.hpp"

namespace lgv {

// ---- DensityField -----------------------------------------------------------------------

double DensityField::cell_volume() const {
  double v = 1.0;
  for (const auto& a : axes) v *= a.h();
  return v;
}

double DensityField::mass() const {
  double s = 0.0;
  for (double x : values) s += x;
  return s * cell_volume();
}

void DensityField::normalize() {
  const double m = mass();
  require(m > 0 && std::isfinite(m), "density has non-positive mass");
  for (double& x : values) x /= m;
}

DensityField discrete_gibbs(const Potential& u, double beta, const Grid1D& g) {
  require(u.dim() == 1, "discrete_gibbs needs a 1D potential");
  DensityField f{{g}, std::vector<double>(g.n), 0.0, 0};
  std::vector<double> e(g.n);
  double emin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.n; ++i) {
    const double q = g.center(i);
    e[i] = beta * u.value(&q);
    emin = std::min(emin, e[i]);
  }
  for (std::size_t i = 0; i < g.n; ++i) f.values[i] = std::exp(-(e[i] - emin));
  f.normalize();
  return f;
}

DensityField discrete_phase_gibbs(const Potential& u, double beta, const Grid2D& g) {
  require(u.dim() == 1, "discrete_phase_gibbs needs a 1D potential");
  DensityField f{{g.x, g.y}, std::vector<double>(g.size()), 0.0, 0};
  std::vector<double> e(g.size());
  double emin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.x.n; ++i) {
    const double q = g.x.center(i);
    const double vq = u.value(&q);
    for (std::size_t j = 0; j < g.y.n; ++j) {
      const double p = g.y.center(j);
      e[g.index(i, j)] = beta * (vq + 0.5 * p * p);
      emin = std::min(emin, e[g.index(i, j)]);
    }
  }
  for (std::size_t k = 0; k < g.size(); ++k) f.values[k] = std::exp(-(e[k] - emin));
  f.normalize();
  return f;
}

// ---- Tridiagonal operators --------------------------------------------------------------

void TridiagonalOperator::apply(const double* x, double* y) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += lower[i] * x[i - 1];
    if (i + 1 < n) s += upper[i] * x[i + 1];
    y[i] = s;
  }
}

double TridiagonalOperator::norm_inf() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m = std::max(m, std::abs(lower[i]) + std::abs(diag[i]) + std::abs(upper[i]));
  return m;
}

std::vector<double> TridiagonalOperator::column_sums() const {
  const std::size_t n = size();
  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) {
    double off = 0.0;
    if (j > 0) off += upper[j - 1];
    if (j + 1 < n) off += lower[j + 1];
    s[j] = off + diag[j];
  }
  return s;
}

Residual residual(const TridiagonalOperator& a, const DensityField& rho) {
  std::vector<double> y(a.size());
  a.apply(rho.values.data(), y.data());
  Residual r;
  double xmax = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    r.absolute = std::max(r.absolute, std::abs(y[i]));
    xmax = std::max(xmax, std::abs(rho.values[i]));
  }
  r.relative = r.absolute / (a.norm_inf() * xmax);
  return r;
}

double bernoulli(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
  return x / std::expm1(x);
}

namespace {

// βU at cell centres, built so that consecutive differences are the SG face jumps.
std::vector<double> cell_potential(const Model& m, const Grid1D& g) {
  std::vector<double> u(g.n);
  const double eps = m.epsilon();
  const auto& pert = m.perturbation;
  const bool field = pert && eps != 0.0 && !pert->is_gradient();
  const GaussRule gl = gauss_legendre(8);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double q = g.center(i);
    u[i] = m.beta * m.potential.value(&q);
    if (pert && eps != 0.0 && !field) u[i] -= m.beta * eps * pert->potential(&q);
  }
  if (field) {
    // Subtract β ε ∫_{c₀}^{cᵢ} M, accumulated face by face.
    double acc = 0.0;
    for (std::size_t i = 1; i < g.n; ++i) {
      const double a = g.center(i - 1), b = g.center(i);
      double integral = 0.0;
      for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
        const double q = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[k];
        double mv;
        pert->field(&q, &mv);
        integral += 0.5 * (b - a) * gl.weights[k] * mv;
      }
      acc += integral;
      u[i] -= m.beta * eps * acc;
    }
  }
  return u;
}

void check_1d_model(const Model& m) {
  m.validate();
  require(m.dim() == 1 && m.sigma.dim() == 1, "1D Fokker-Planck needs d = 1 and scalar sigma");
}

// Thomas algorithm; sub[0] and sup[n−1] are ignored.
void thomas(const std::vector<double>& sub, const std::vector<double>& dia, const std::vector<double>& sup,
            std::vector<double>& rhs) {
  const std::size_t n = dia.size();
  std::vector<double> c(n);
  double b = dia[0];
  if (b == 0.0) fail(ErrorCode::LinearSolveFailure, "zero pivot in tridiagonal solve");
  c[0] = n > 1 ? sup[0] / b : 0.0;
  rhs[0] /= b;
  for (std::size_t i = 1; i < n; ++i) {
    b = dia[i] - sub[i] * c[i - 1];
    if (b == 0.0 || !std::isfinite(b)) fail(ErrorCode::LinearSolveFailure, "zero pivot in tridiagonal solve");
    c[i] = i + 1 < n ? sup[i] / b : 0.0;
    rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / b;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

TridiagonalOperator sg_operator(const Grid1D& g, const std::vector<double>& u, double diff) {
  const std::size_t n = g.n;
  require(n >= 3, "Fokker-Planck grid needs at least 3 cells");
  TridiagonalOperator a{g, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const double c = diff / (g.h() * g.h());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = u[i + 1] - u[i];
    if (!(std::abs(d) <= 50.0))
      fail(ErrorCode::GridTooCoarse, "cell Peclet number exceeds 50; refine the grid");
    a.lower[i + 1] = c * bernoulli(d);
    a.upper[i] = c * bernoulli(-d);
  }
  for (std::size_t i = 0; i < n; ++i) a.diag[i] = -((i + 1 < n ? a.lower[i + 1] : 0.0) + (i > 0 ? a.upper[i - 1] : 0.0));
  return a;
}

void cn_tridiagonal(const TridiagonalOperator& a, const double* x, double* y, double theta_dt) {
  const std::size_t n = a.size();
  std::vector<double> rhs(n), sub(n), dia(n), sup(n);
  a.apply(x, rhs.data());
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = x[i] + theta_dt * rhs[i];
    sub[i] = -theta_dt * a.lower[i];
    dia[i] = 1.0 - theta_dt * a.diag[i];
    sup[i] = -theta_dt * a.upper[i];
  }
  thomas(sub, dia, sup, rhs);
  std::copy(rhs.begin(), rhs.end(), y);
}

long clip_negative(std::vector<double>& v) {
  double vmax = 0.0;
  for (double x : v) vmax = std::max(vmax, x);
  long n = 0;
  for (double& x : v)
    if (x < -1e-14 * vmax) {
      x = 0.0;
      ++n;
    }
  return n;
}

}  // namespace

TridiagonalOperator assemble_overdamped_fp(const Model& m, const Grid1D& g) {
  check_1d_model(m);
  const double diff = m.sigma.a()(0, 0) / m.beta;
  return sg_operator(g, cell_potential(m, g), diff);
}

DensityField step_fp(const TridiagonalOperator& a, const DensityField& rho, double dt) {
  require(dt > 0, "dt must be positive");
  require(rho.size() == a.size(), "density and operator sizes differ");
  DensityField out = rho;
  cn_tridiagonal(a, rho.values.data(), out.values.data(), 0.5 * dt);
  out.time = rho.time + dt;
  out.clipped += clip_negative(out.values);
  return out;
}

DensityField stationary_solve(const TridiagonalOperator& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    if ((i > 0 && !(a.lower[i] > 0)) || (i + 1 < n && !(a.upper[i] > 0)))
      fail(ErrorCode::InvalidArgument, "operator is not irreducible (non-positive off-diagonal)");
  }
  const double shift = 1e-9 * a.norm_inf();
  std::vector<double> sub = a.lower, dia(n), sup = a.upper;
  for (std::size_t i = 0; i < n; ++i) dia[i] = a.diag[i] - shift;
  DensityField f{{a.grid}, std::vector<double>(n, 1.0), 0.0, 0};
  f.normalize();
  for (int it = 0; it < 200; ++it) {
    std::vector<double> x = f.values;
    thomas(sub, dia, sup, x);
    double s = 0.0;
    for (double v : x) s += v;
    const double scale = 1.0 / (s * a.grid.h());
    double change = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] *= scale;
      change = std::max(change, std::abs(x[i] - f.values[i]));
      vmax = std::max(vmax, std::abs(x[i]));
    }
    f.values = std::move(x);
    if (change <= 1e-15 * vmax) {
      for (double v : f.values)
        if (!(v > 0)) fail(ErrorCode::NonConvergence, "stationary solve produced a non-positive density");
      return f;
    }
  }
  fail(ErrorCode::NonConvergence, "stationary inverse iteration did not converge in 200 iterations");
}

// ---- Probability flux -------------------------------------------------------------------

double FluxField::max_abs() const {
  double m = 0.0;
  for (double v : jx) m = std::max(m, std::abs(v));
  for (double v : jy) m = std::max(m, std::abs(v));
  return m;
}

double FluxField::angular_moment() const {
  require(axes.size() == 2, "angular moment needs a 2D flux");
  const Grid1D &gx = axes[0], &gy = axes[1];
  const std::size_t nx = gx.n, ny = gy.n;
  double s = 0.0;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double jl = i > 0 ? jx[(i - 1) * ny + j] : 0.0;
      const double jr = i + 1 < nx ? jx[i * ny + j] : 0.0;
      const double jd = j > 0 ? jy[i * (ny - 1) + j - 1] : 0.0;
      const double ju = j + 1 < ny ? jy[i * (ny - 1) + j] : 0.0;
      s += gx.center(i) * 0.5 * (jd + ju) - gy.center(j) * 0.5 * (jl + jr);
    }
  return s * gx.h() * gy.h();
}

FluxField probability_flux(const DensityField& rho, const Model& m) {
  m.validate();
  require(m.kind == DynamicsKind::overdamped, "probability_flux is defined for the overdamped generator");
  FluxField out;
  out.axes = rho.axes;
  if (rho.axes.size() == 1) {
    require(m.dim() == 1, "1D density needs a 1D model");
    const Grid1D& g = rho.axes[0];
    const auto u = cell_potential(m, g);
    const double diff = m.sigma.a()(0, 0) / m.beta;
    out.jx.resize(g.n - 1);
    for (std::size_t i = 0; i + 1 < g.n; ++i) {
      const double d = u[i + 1] - u[i];
      out.jx[i] = diff / g.h() * (bernoulli(d) * rho.values[i] - bernoulli(-d) * rho.values[i + 1]);
    }
    return out;
  }
  require(rho.axes.size() == 2 && m.dim() == 2, "2D density needs a 2D model");
  const Grid1D &gx = rho.axes[0], &gy = rho.axes[1];
  const std::size_t nx = gx.n, ny = gy.n;
  const Mat d = m.sigma.a() / m.beta;
  auto r = [&](long i, long j) {
    if (i < 0 || j < 0 || i >= static_cast<long>(nx) || j >= static_cast<long>(ny)) return 0.0;
    return rho.values[static_cast<std::size_t>(i) * ny + j];
  };
  out.jx.resize((nx - 1) * ny);
  out.jy.resize(nx * (ny - 1));
  for (long i = 0; i + 1 < static_cast<long>(nx); ++i)
    for (long j = 0; j < static_cast<long>(ny); ++j) {
      const double q[2] = {gx.node(i + 1), gy.center(j)};
      double b[2];
      m.drift(q, b);
      const double pe = -b[0] * gx.h() / d(0, 0);
      double flux = d(0, 0) / gx.h() * (bernoulli(pe) * r(i, j) - bernoulli(-pe) * r(i + 1, j));
      if (d(0, 1) != 0.0) {
        const double dy = (r(i, j + 1) + r(i + 1, j + 1) - r(i, j - 1) - r(i + 1, j - 1)) / (4.0 * gy.h());
        flux -= d(0, 1) * dy;
      }
      out.jx[i * ny + j] = flux;
    }
  for (long i = 0; i < static_cast<long>(nx); ++i)
    for (long j = 0; j + 1 < static_cast<long>(ny); ++j) {
      const double q[2] = {gx.center(i), gy.node(j + 1)};
      double b[2];
      m.drift(q, b);
      const double pe = -b[1] * gy.h() / d(1, 1);
      double flux = d(1, 1) / gy.h() * (bernoulli(pe) * r(i, j) - bernoulli(-pe) * r(i, j + 1));
      if (d(1, 0) != 0.0) {
        const double dx = (r(i + 1, j) + r(i + 1, j + 1) - r(i - 1, j) - r(i - 1, j + 1)) / (4.0 * gx.h());
        flux -= d(1, 0) * dx;
      }
      out.jy[i * (ny - 1) + j] = flux;
    }
  return out;
}

// ---- Kinetic operator -------------------------------------------------------------------

namespace {

double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

// Upwind face value between cells k and k+1 of a line x[0..n), velocity c.
inline double face_value(const double* x, std::size_t stride, std::size_t n, std::size_t k, double c, bool lim) {
  auto at = [&](std::size_t i) { return x[i * stride]; };
  if (c >= 0.0) {
    if (k == 0) return at(0);
    if (lim) return at(k) + 0.5 * minmod(at(k) - at(k - 1), at(k + 1) - at(k));
    return 1.5 * at(k) - 0.5 * at(k - 1);
  }
  if (k + 2 >= n) return at(k + 1);
  if (lim) return at(k + 1) - 0.5 * minmod(at(k + 2) - at(k + 1), at(k + 1) - at(k));
  return 1.5 * at(k + 1) - 0.5 * at(k + 2);
}

// Linear second-order upwind fluxes along one contiguous line with constant velocity c (per h).
void line_fluxes_linear(const double* x, double* out, std::size_t n, double c) {
  if (c >= 0.0) {
    double f = c * x[0];
    out[0] -= f;
    out[1] += f;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      f = c * (1.5 * x[j] - 0.5 * x[j - 1]);
      out[j] -= f;
      out[j + 1] += f;
    }
  } else {
    for (std::size_t j = 0; j + 2 < n; ++j) {
      const double f = c * (1.5 * x[j + 1] - 0.5 * x[j + 2]);
      out[j] -= f;
      out[j + 1] += f;
    }
    const double f = c * x[n - 1];
    out[n - 2] -= f;
    out[n - 1] += f;
  }
}

void transport_apply(const KineticOperator& k, const double* x, double* y) {
  const Grid2D& g = k.grid;
  const std::size_t nx = g.x.n, ny = g.y.n;
  const double hq = g.x.h(), hp = g.y.h();
  std::fill(y, y + g.size(), 0.0);
  std::vector<double> vel(ny), flux(ny);
  for (std::size_t j = 0; j < ny; ++j) vel[j] = g.y.center(j) / hq;
  // Cells [0, j0) have p < 0, [j0, ny) have p >= 0.
  std::size_t j0 = 0;
  while (j0 < ny && g.y.center(j0) < 0.0) ++j0;
  // q-direction: velocity p_j; faces between rows i and i+1 are handled a whole row at a time.
  for (std::size_t i = 0; i + 1 < nx; ++i) {
    const double* r0 = x + i * ny;
    const double* r1 = r0 + ny;
    const double* rm = i > 0 ? r0 - ny : nullptr;
    const double* r2 = i + 2 < nx ? r1 + ny : nullptr;
    if (k.limited) {
      for (std::size_t j = 0; j < ny; ++j) {
        double face;
        if (j >= j0) face = rm ? r0[j] + 0.5 * minmod(r0[j] - rm[j], r1[j] - r0[j]) : r0[j];
        else face = r2 ? r1[j] - 0.5 * minmod(r2[j] - r1[j], r1[j] - r0[j]) : r1[j];
        flux[j] = vel[j] * face;
      }
    } else {
      if (r2)
        for (std::size_t j = 0; j < j0; ++j) flux[j] = vel[j] * (1.5 * r1[j] - 0.5 * r2[j]);
      else
        for (std::size_t j = 0; j < j0; ++j) flux[j] = vel[j] * r1[j];
      if (rm)
        for (std::size_t j = j0; j < ny; ++j) flux[j] = vel[j] * (1.5 * r0[j] - 0.5 * rm[j]);
      else
        for (std::size_t j = j0; j < ny; ++j) flux[j] = vel[j] * r0[j];
    }
    double* y0 = y + i * ny;
    double* y1 = y0 + ny;
    for (std::size_t j = 0; j < ny; ++j) {
      y0[j] -= flux[j];
      y1[j] += flux[j];
    }
  }
  // p-direction: velocity F(q_i), contiguous lines.
  for (std::size_t i = 0; i < nx; ++i) {
    const double c = k.force[i] / hp;
    const double* line = x + i * ny;
    double* out = y + i * ny;
    if (!k.limited) {
      line_fluxes_linear(line, out, ny, c);
      continue;
    }
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      const double f = c * face_value(line, 1, ny, j, c, true);
      out[j] -= f;
      out[j + 1] += f;
    }
  }
}

using Triplets = std::vector<Eigen::Triplet<double>>;

// Linear second-order upwind transport as matrix triplets.
void transport_triplets(const KineticOperator& k, Triplets& t) {
  const Grid2D& g = k.grid;
  const std::size_t nx = g.x.n, ny = g.y.n;
  auto add_face = [&](std::size_t lo_cell, std::size_t hi_cell, const std::vector<std::pair<std::size_t, double>>& w,
                      double c_over_h) {
    for (const auto& [col, wt] : w) {
      t.emplace_back(static_cast<int>(lo_cell), static_cast<int>(col), -c_over_h * wt);
      t.emplace_back(static_cast<int>(hi_cell), static_cast<int>(col), c_over_h * wt);
    }
  };
  auto stencil = [](std::size_t n, std::size_t kf, double c, auto idx) {
    std::vector<std::pair<std::size_t, double>> w;
    if (c >= 0.0) {
      if (kf == 0) w = {{idx(0), 1.0}};
      else w = {{idx(kf), 1.5}, {idx(kf - 1), -0.5}};
    } else {
      if (kf + 2 >= n) w = {{idx(kf + 1), 1.0}};
      else w = {{idx(kf + 1), 1.5}, {idx(kf + 2), -0.5}};
    }
    return w;
  };
  for (std::size_t j = 0; j < ny; ++j) {
    const double c = g.y.center(j);
    auto idx = [&](std::size_t i) { return i * ny + j; };
    for (std::size_t i = 0; i + 1 < nx; ++i) add_face(idx(i), idx(i + 1), stencil(nx, i, c, idx), c / g.x.h());
  }
  for (std::size_t i = 0; i < nx; ++i) {
    const double c = k.force[i];
    auto idx = [&](std::size_t jj) { return i * ny + jj; };
    for (std::size_t j = 0; j + 1 < ny; ++j) add_face(idx(j), idx(j + 1), stencil(ny, j, c, idx), c / g.y.h());
  }
}

}  // namespace

void KineticOperator::apply(const double* x, double* y) const {
  transport_apply(*this, x, y);
  const std::size_t nx = grid.x.n, ny = grid.y.n;
  std::vector<double> tmp(ny);
  for (std::size_t i = 0; i < nx; ++i) {
    collision.apply(x + i * ny, tmp.data());
    for (std::size_t j = 0; j < ny; ++j) y[i * ny + j] += tmp[j];
  }
}

Eigen::SparseMatrix<double, Eigen::RowMajor> KineticOperator::matrix() const {
  require(!limited, "the limited transport operator is nonlinear and has no matrix");
  Triplets t;
  transport_triplets(*this, t);
  const std::size_t nx = grid.x.n, ny = grid.y.n;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const int r = static_cast<int>(i * ny + j);
      t.emplace_back(r, r, collision.diag[j]);
      if (j > 0) t.emplace_back(r, r - 1, collision.lower[j]);
      if (j + 1 < ny) t.emplace_back(r, r + 1, collision.upper[j]);
    }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<int>(size()), static_cast<int>(size()));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

double KineticOperator::max_transport_dt(double courant) const {
  double fmax = 0.0;
  for (double f : force) fmax = std::max(fmax, std::abs(f));
  const double pmax = std::max(std::abs(grid.y.lo), std::abs(grid.y.hi));
  // The second-order upwind symbol reaches 4c/h in magnitude; SSP-RK3 is stable to about 2.5.
  const double speed = 4.0 * (pmax / grid.x.h() + fmax / grid.y.h());
  return courant * 2.5 / speed;
}

KineticOperator assemble_kinetic_fp(const Model& m, const Grid2D& g, bool minmod_limiter) {
  m.validate();
  require(m.dim() == 1 && m.sigma.dim() == 1, "kinetic Fokker-Planck needs d = 1 (grid is (q, p))");
  require(g.x.n >= 4 && g.y.n >= 4, "kinetic grid needs at least 4 cells per axis");
  KineticOperator k;
  k.grid = g;
  k.limited = minmod_limiter;
  for (std::size_t i = 0; i < g.x.n; ++i) {
    const double q = g.x.center(i);
    double f;
    m.force(&q, &f);
    k.force.push_back(f);
  }
  const double gamma = m.sigma.a()(0, 0);
  std::vector<double> u(g.y.n);
  for (std::size_t j = 0; j < g.y.n; ++j) u[j] = 0.5 * m.beta * g.y.center(j) * g.y.center(j);
  k.collision = sg_operator(g.y, u, gamma / m.beta);
  return k;
}

std::vector<double> kinetic_column_sums(const KineticOperator& k) {
  const auto a = k.matrix();
  std::vector<double> s(k.size(), 0.0);
  for (int r = 0; r < a.outerSize(); ++r)
    for (decltype(a)::InnerIterator it(a, r); it; ++it) s[it.col()] += it.value();
  return s;
}

double kinetic_residual_inf(const KineticOperator& k, const DensityField& rho) {
  std::vector<double> y(k.size());
  k.apply(rho.values.data(), y.data());
  double r = 0.0;
  for (double v : y) r = std::max(r, std::abs(v));
  return r;
}

namespace {

// Strang-split kinetic stepper with the collision half-step factorized once.
class KineticIntegrator {
 public:
  KineticIntegrator(const KineticOperator& k, double dt) : k_(k), dt_(dt) {
    require(dt > 0, "dt must be positive");
    const auto& c = k.collision;
    const std::size_t ny = c.size();
    const double th = 0.25 * dt;
    sub_.resize(ny);
    inv_.resize(ny);
    sup_.resize(ny);
    for (std::size_t j = 0; j < ny; ++j) {
      sub_[j] = -th * c.lower[j];
      const double d = 1.0 - th * c.diag[j];
      sup_[j] = -th * c.upper[j];
      const double piv = j == 0 ? d : d - sub_[j] * sup_[j - 1] * inv_[j - 1];
      if (piv == 0.0) fail(ErrorCode::LinearSolveFailure, "zero pivot in collision solve");
      inv_[j] = 1.0 / piv;
    }
    const std::size_t n = k.size();
    l_.resize(n);
    u1_.resize(n);
    u2_.resize(n);
    rhs_.resize(ny);
  }

  void step(std::vector<double>& u) {
    const std::size_t n = u.size();
    half_collision(u);
    transport_apply(k_, u.data(), l_.data());
    for (std::size_t i = 0; i < n; ++i) u1_[i] = u[i] + dt_ * l_[i];
    transport_apply(k_, u1_.data(), l_.data());
    for (std::size_t i = 0; i < n; ++i) u2_[i] = 0.75 * u[i] + 0.25 * (u1_[i] + dt_ * l_[i]);
    transport_apply(k_, u2_.data(), l_.data());
    for (std::size_t i = 0; i < n; ++i) u[i] = u[i] / 3.0 + 2.0 / 3.0 * (u2_[i] + dt_ * l_[i]);
    half_collision(u);
  }

 private:
  void half_collision(std::vector<double>& u) {
    const auto& c = k_.collision;
    const std::size_t nx = k_.grid.x.n, ny = k_.grid.y.n;
    const double th = 0.25 * dt_;
    for (std::size_t i = 0; i < nx; ++i) {
      double* x = u.data() + i * ny;
      c.apply(x, rhs_.data());
      for (std::size_t j = 0; j < ny; ++j) rhs_[j] = x[j] + th * rhs_[j];
      // Forward sweep with cached pivots, then back substitution.
      x[0] = rhs_[0] * inv_[0];
      for (std::size_t j = 1; j < ny; ++j) x[j] = (rhs_[j] - sub_[j] * x[j - 1]) * inv_[j];
      for (std::size_t j = ny - 1; j-- > 0;) x[j] -= sup_[j] * inv_[j] * x[j + 1];
    }
  }

  const KineticOperator& k_;
  double dt_;
  std::vector<double> sub_, inv_, sup_, l_, u1_, u2_, rhs_;
};

}  // namespace

DensityField step_kinetic(const KineticOperator& k, const DensityField& rho, double dt) {
  require(rho.size() == k.size(), "density and operator sizes differ");
  KineticIntegrator integ(k, dt);
  DensityField out = rho;
  integ.step(out.values);
  out.time = rho.time + dt;
  return out;
}

DensityField kinetic_stationary(const KineticOperator& k) {
  using ColMat = Eigen::SparseMatrix<double>;
  ColMat a = k.matrix();
  double norm = 0.0;
  {
    std::vector<double> rows(k.size(), 0.0);
    for (int c = 0; c < a.outerSize(); ++c)
      for (ColMat::InnerIterator it(a, c); it; ++it) rows[it.row()] += std::abs(it.value());
    for (double v : rows) norm = std::max(norm, v);
  }
  ColMat shift(a.rows(), a.cols());
  shift.setIdentity();
  a -= (1e-9 * norm) * shift;
  a.makeCompressed();
  Eigen::SparseLU<ColMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailure, "sparse LU of the kinetic operator failed");
  DensityField f{{k.grid.x, k.grid.y}, std::vector<double>(k.size(), 1.0), 0.0, 0};
  f.normalize();
  for (int it = 0; it < 200; ++it) {
    Vec x = lu.solve(Eigen::Map<const Vec>(f.values.data(), f.size()));
    if (lu.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailure, "sparse LU solve failed");
    const double scale = 1.0 / (x.sum() * f.cell_volume());
    x *= scale;
    double change = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      change = std::max(change, std::abs(x(i) - f.values[i]));
      vmax = std::max(vmax, std::abs(x(i)));
    }
    std::copy(x.data(), x.data() + x.size(), f.values.begin());
    if (change <= 1e-13 * vmax) return f;
  }
  fail(ErrorCode::NonConvergence, "kinetic inverse iteration did not converge in 200 iterations");
}

// ---- Distances and rate fits ------------------------------------------------------------

const char* norm_name(NormTag t) {
  switch (t) {
    case NormTag::l1: return "l1";
    case NormTag::l2_weighted: return "l2_weighted";
    case NormTag::relative_entropy: return "relative_entropy";
  }
  return "l1";
}

double distance(const DensityField& rho, const DensityField& rho_inf, NormTag tag) {
  require(rho.size() == rho_inf.size(), "distance: size mismatch");
  const double vol = rho.cell_volume();
  double vmax = 0.0;
  for (double v : rho_inf.values) vmax = std::max(vmax, v);
  const double thr = 1e-14 * vmax;
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double a = rho.values[i], b = rho_inf.values[i];
    switch (tag) {
      case NormTag::l1: s += std::abs(a - b); break;
      case NormTag::l2_weighted:
        if (b > thr) s += (a - b) * (a - b) / b;
        break;
      case NormTag::relative_entropy:
        if (b > thr && a > 0) s += a * std::log(a / b);
        break;
    }
  }
  s *= vol;
  return tag == NormTag::l2_weighted ? std::sqrt(s) : s;
}

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& value, const std::vector<double>& se,
                 const std::string& norm, const RateFitOptions& opt) {
  require(t.size() == value.size() && !t.empty(), "fit_rate: t and value must have equal non-zero length");
  require(se.empty() || se.size() == t.size(), "fit_rate: se length mismatch");
  const double t_start = opt.t_min >= 0 ? opt.t_min : t.front() + opt.transient_fraction * (t.back() - t.front());
  const double t_stop = opt.t_max >= 0 ? opt.t_max : t.back();
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_start - 1e-12) continue;
    if (t[i] > t_stop + 1e-12) break;
    const bool floor_hit = !(value[i] > opt.absolute_floor) || (!se.empty() && value[i] < 3.0 * se[i]);
    if (floor_hit) break;
    x.push_back(t[i]);
    y.push_back(std::log(value[i]));
  }
  if (x.size() < 10) fail(ErrorCode::WindowTooShort, "rate fit window has fewer than 10 points");
  const LinearFit f = linear_fit(x, y);
  RateFit r;
  r.rate = -f.slope;
  r.intercept = f.intercept;
  r.r_squared = f.r_squared;
  r.t_lo = x.front();
  r.t_hi = x.back();
  r.n_points = static_cast<int>(x.size());
  r.norm = norm;
  return r;
}

namespace {

void push_distances(DecaySeries& s, const DensityField& rho, const DensityField& inf) {
  s.t.push_back(rho.time);
  s.l1.push_back(distance(rho, inf, NormTag::l1));
  s.l2_weighted.push_back(distance(rho, inf, NormTag::l2_weighted));
  s.entropy.push_back(distance(rho, inf, NormTag::relative_entropy));
}

}  // namespace

DecaySeries decay_1d(const TridiagonalOperator& a, DensityField rho, const DensityField& rho_inf, double dt,
                     double t_end, int sample_every) {
  DecaySeries s;
  push_distances(s, rho, rho_inf);
  const long steps = std::lround(t_end / dt);
  for (long k = 1; k <= steps; ++k) {
    rho = step_fp(a, rho, dt);
    if (k % sample_every == 0) push_distances(s, rho, rho_inf);
  }
  return s;
}

DecaySeries decay_kinetic(const KineticOperator& k, DensityField rho, const DensityField& rho_inf, double dt,
                          double t_end, int sample_every) {
  DecaySeries s;
  push_distances(s, rho, rho_inf);
  const long steps = std::lround(t_end / dt);
  KineticIntegrator integ(k, dt);
  for (long n = 1; n <= steps; ++n) {
    integ.step(rho.values);
    rho.time = static_cast<double>(n) * dt;
    if (n % sample_every == 0) push_distances(s, rho, rho_inf);
  }
  return s;
}

}  // namespace lgv
