#pragma once

#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "lgv/grid.hpp"
#include "lgv/model.hpp"

namespace lgv {

// Cell-averaged density on a 1D or 2D grid (axes.size() ∈ {1, 2}); values row-major as in Grid2D.
struct DensityField {
  std::vector<Grid1D> axes;
  std::vector<double> values;
  double time = 0.0;
  long clipped = 0;  // cells clipped to 0 after a negative excursion

  double cell_volume() const;
  double mass() const;
  void normalize();
  std::size_t size() const { return values.size(); }
};

// Cell-evaluated exp(−βU) normalized to unit discrete mass.
DensityField discrete_gibbs(const Potential& u, double beta, const Grid1D& g);
// Phase-space Gibbs exp(−β(U(q) + p²/2)) on a (q, p) grid.
DensityField discrete_phase_gibbs(const Potential& u, double beta, const Grid2D& g);

// Tridiagonal generator: (Aρ)ᵢ = lower[i]ρᵢ₋₁ + diag[i]ρᵢ + upper[i]ρᵢ₊₁.
struct TridiagonalOperator {
  Grid1D grid;
  std::vector<double> lower, diag, upper;

  std::size_t size() const { return diag.size(); }
  void apply(const double* x, double* y) const;
  double norm_inf() const;
  // Off-diagonals summed first, then the diagonal: exact zeros for a conservative operator.
  std::vector<double> column_sums() const;
};

// Normwise backward error ‖Aρ‖∞ / (‖A‖∞‖ρ‖∞) and the plain ‖Aρ‖∞.
struct Residual {
  double absolute = 0.0;
  double relative = 0.0;
};
Residual residual(const TridiagonalOperator& a, const DensityField& rho);

double bernoulli(double x);

// Scharfetter–Gummel finite volume for ∂ρ = ∂_q(D(∂_q ρ + ρ ∂_q U)), D = σ²/β, U = β(V − εW)
// (gradient forms) or βV − βε∫M (general fields, face integrals by Gauss–Legendre).
TridiagonalOperator assemble_overdamped_fp(const Model& m, const Grid1D& g);

// Crank–Nicolson step.
DensityField step_fp(const TridiagonalOperator& a, const DensityField& rho, double dt);

// Shifted inverse iteration for the kernel vector; positive, unit mass.
DensityField stationary_solve(const TridiagonalOperator& a);

// Face fluxes of j = bρ − β⁻¹σσᵀ∇ρ. 1D: n−1 interior faces. 2D: x-faces ((nx−1)·ny, index
// i·ny + j for the face between cells i and i+1) then y-faces (nx·(ny−1), index i·(ny−1) + j).
// Normal components are exponentially fitted; cross-diffusion uses central differences.
struct FluxField {
  std::vector<Grid1D> axes;
  std::vector<double> jx, jy;

  double max_abs() const;
  // ∫ (q₁ j₂ − q₂ j₁) dq from cell-centred averages of the face fluxes (2D only).
  double angular_moment() const;
};
FluxField probability_flux(const DensityField& rho, const Model& m);

// Kinetic operator on a (q, p) grid for d = 1: transport −p∂_qρ − ∂_p(Fρ) by linear second-order
// upwind fluxes (optionally minmod-limited) and the collision ∂_p(σ²(pρ + β⁻¹∂_pρ)) by
// Scharfetter–Gummel in p. No-flux boundaries.
struct KineticOperator {
  Grid2D grid;
  Eigen::SparseMatrix<double, Eigen::RowMajor> transport;
  // Collision is block-diagonal over q: one tridiagonal operator in p, shared by every row.
  TridiagonalOperator collision;
  bool limited = false;
  std::vector<double> force;  // F at q centres

  std::size_t size() const { return grid.size(); }
  void apply(const double* x, double* y) const;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix() const;
  // Explicit transport step at `courant` times the SSP-RK3 stability bound.
  double max_transport_dt(double courant = 0.8) const;
};
KineticOperator assemble_kinetic_fp(const Model& m, const Grid2D& g, bool minmod = false);
// Strang splitting: half collision (CN), SSP-RK3 transport, half collision (CN).
DensityField step_kinetic(const KineticOperator& k, const DensityField& rho, double dt);
double kinetic_residual_inf(const KineticOperator& k, const DensityField& rho);
// Kernel of the assembled operator by shifted inverse iteration with a sparse LU factorization.
DensityField kinetic_stationary(const KineticOperator& k);
std::vector<double> kinetic_column_sums(const KineticOperator& k);

enum class NormTag { l1, l2_weighted, relative_entropy };
const char* norm_name(NormTag t);
// Weighted norms skip cells where ρ∞ < 1e−14·max ρ∞.
double distance(const DensityField& rho, const DensityField& rho_inf, NormTag tag);

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int n_points = 0;
  std::string norm;
};

struct RateFitOptions {
  double transient_fraction = 0.1;
  double absolute_floor = 1e3 * 2.220446049250313e-16;
  double t_min = -1.0;  // explicit window start (overrides the transient fraction when ≥ 0)
  double t_max = -1.0;
};

// Least-squares fit of log(value) against t on the auto-selected window; se may be empty.
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& value, const std::vector<double>& se = {},
                 const std::string& norm = "l1", const RateFitOptions& opt = {});

struct DecaySeries {
  std::vector<double> t, l1, l2_weighted, entropy;
};
DecaySeries decay_1d(const TridiagonalOperator& a, DensityField rho, const DensityField& rho_inf, double dt,
                     double t_end, int sample_every = 1);
DecaySeries decay_kinetic(const KineticOperator& k, DensityField rho, const DensityField& rho_inf, double dt,
                          double t_end, int sample_every = 1);

}  // namespace lgv
