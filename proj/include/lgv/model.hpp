#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lgv/grid.hpp"
#include "lgv/linalg.hpp"

namespace lgv {

inline constexpr int kMaxDim = 8;

// Mollifier bump A·exp(−1/(1 − |q−c|²/r²)) on the open ball, exactly 0 outside.
struct Bump {
  std::vector<double> center;
  double radius = 1.0;
  double amplitude = 1.0;

  // Shape factor without the amplitude, plus s = |q−c|²/r².
  double shape(const double* q, double* s_out = nullptr) const;
  double value(const double* q) const;
  void gradient(const double* q, double* g) const;
  void hessian(const double* q, double* h) const;  // d×d row-major
};

enum class PotentialKind { quadratic, double_well, tabulated, zero, custom };

struct CustomPotential {
  std::function<double(const double*)> value;
  std::function<void(const double*, double*)> gradient;
  std::function<void(const double*, double*)> hessian;  // may be empty
};

// Base potential plus optional additive bump and linear terms. Immutable; cheap to copy.
class Potential {
 public:
  static Potential quadratic(int dim, double k);
  // Σᵢ a qᵢ⁴ − b qᵢ².
  static Potential double_well(int dim, double a, double b);
  // 1D cubic B-spline through uniformly spaced samples; linear continuation outside the table.
  static Potential tabulated(const std::vector<double>& q, const std::vector<double>& v);
  static Potential zero(int dim);
  static Potential custom(int dim, CustomPotential fns);

  Potential plus_bump(const Bump& w, double coef) const;
  Potential plus_linear(const std::vector<double>& g, double coef) const;

  int dim() const { return dim_; }
  PotentialKind kind() const { return kind_; }
  bool is_analytic() const { return kind_ == PotentialKind::quadratic || kind_ == PotentialKind::double_well; }
  bool has_hessian() const;
  bool has_extras() const { return !extras_.empty(); }
  // Pure quadratic without extra terms: Gibbs is an exact Gaussian.
  bool is_pure_quadratic() const { return kind_ == PotentialKind::quadratic && extras_.empty(); }
  double stiffness() const { return k_; }
  std::string describe() const;

  double value(const double* q) const;
  void gradient(const double* q, double* g) const;
  void hessian(const double* q, double* h) const;

 private:
  struct Term {
    bool is_bump = true;
    Bump bump;
    std::vector<double> linear;
    double coef = 0.0;
  };
  struct Table;

  PotentialKind kind_ = PotentialKind::zero;
  int dim_ = 1;
  double k_ = 0.0, a_ = 0.0, b_ = 0.0;
  std::shared_ptr<const Table> table_;
  std::shared_ptr<const CustomPotential> custom_;
  std::vector<Term> extras_;
};

enum class PerturbationForm { potential_bump, general_field, linear_override };

// εM with M = ∇W (potential_bump, linear_override) or a compactly supported non-gradient field.
// general_field: M(q) = A·φ(q)·(direction + swirl·J(q−c)), φ the unit-amplitude bump shape,
// J the 2D rotation by π/2 (swirl requires d = 2).
struct PerturbationSpec {
  PerturbationForm form = PerturbationForm::potential_bump;
  std::vector<double> center;
  double radius = 1.0;
  double amplitude = 1.0;
  double epsilon = 0.0;
  std::vector<double> direction;
  double swirl = 0.0;
  // Non-compact closed-form perturbations (W = a·q) are oracle-only.
  bool analytic_override = false;

  static PerturbationSpec bump(std::vector<double> center, double radius, double amplitude, double epsilon);
  static PerturbationSpec linear(std::vector<double> direction, double amplitude, double epsilon);
  static PerturbationSpec field(std::vector<double> center, double radius, double amplitude,
                                std::vector<double> direction, double swirl, double epsilon);

  int dim() const;
  bool is_gradient() const { return form != PerturbationForm::general_field; }
  Bump as_bump() const;
  double potential(const double* q) const;              // W; gradient forms only
  void field(const double* q, double* m) const;         // M (ε not applied)
  void field_jacobian(const double* q, double* j) const;  // j[a·d+b] = ∂M_a/∂q_b
  void potential_hessian(const double* q, double* h) const;
};

class DiffusionMatrix {
 public:
  DiffusionMatrix() : DiffusionMatrix(Mat::Identity(1, 1)) {}
  explicit DiffusionMatrix(Mat sigma);
  static DiffusionMatrix identity(int d) { return DiffusionMatrix(Mat::Identity(d, d)); }
  static DiffusionMatrix diagonal(const std::vector<double>& s);

  int dim() const { return static_cast<int>(sigma_.rows()); }
  const Mat& sigma() const { return sigma_; }
  const Mat& a() const { return a_; }  // σσᵀ
  const Mat& a_inv() const { return a_inv_; }

 private:
  Mat sigma_, a_, a_inv_;
};

enum class GibbsKind { config_space, phase_space, gle_space };

// ρ ∝ exp(−β H) with H = U(q) [+ |p|²/2 [+ |z|²/2]]. logZ refers to the config-space factor.
struct GibbsMeasure {
  Potential potential;
  double beta = 1.0;
  double logZ = 0.0;
  GibbsKind kind = GibbsKind::config_space;
  // Config-space moments from the normalizing quadrature; used by samplers.
  std::vector<double> mean;
  std::vector<double> variance;
  // Bounding box of the quadrature grid per axis.
  std::vector<double> box_lo, box_hi;
  double mass_error = 0.0;

  int dim() const { return potential.dim(); }
  int state_dim() const;
  double config_density(const double* q) const;
  double density(const double* x) const;
  double log_density(const double* x) const;
  GibbsMeasure with_kind(GibbsKind k) const;
};

GibbsMeasure gibbs_normalize(const Potential& v, double beta, const Grid1D& grid,
                             GibbsKind kind = GibbsKind::config_space);
GibbsMeasure gibbs_normalize(const Potential& v, double beta, const Grid2D& grid,
                             GibbsKind kind = GibbsKind::config_space);
// Chooses a grid covering βU − min βU ≤ 40 per axis (d ≤ 2), or the closed form for pure quadratics.
GibbsMeasure gibbs_auto(const Potential& v, double beta, GibbsKind kind = GibbsKind::config_space);

using ScalarField = std::function<double(const double*)>;

// h = β σσᵀM·∇V − ∇·(σσᵀM): E_ρ₀[h(q₀)φ(q_s)] = ∫ σσᵀM·∇(e^{sL₀}φ) ρ₀.
ScalarField conjugate_observable_overdamped(const std::optional<PerturbationSpec>& m, const Potential& v,
                                            const DiffusionMatrix& sigma, double beta = 1.0);

struct AssumptionReport {
  double alpha = 1.0;
  double radius = 0.0;
  // (I): max over the probe sphere of −q·∇V/|q|^{α+1}, at R and 2R.
  double probe_I = 0.0;
  double probe_I_outer = 0.0;
  bool pass_I = false;
  // (II): min over the probe sphere of |σᵀ∇V|² − 2 tr(σσᵀ∇²V), at R and 2R.
  bool checked_II = false;
  double probe_II = 0.0;
  double probe_II_outer = 0.0;
  bool pass_II = false;
};

// Finite-radius probes only. A clause passes when it has the right sign at R and does not
// lose more than half its magnitude between R and 2R; no limit statement is certified.
AssumptionReport verify_assumptions(const Potential& v, const DiffusionMatrix& sigma, double alpha,
                                    double probe_radius, bool check_II = true);

enum class DynamicsKind { overdamped, underdamped, gle_augmented, gle_convolution };
const char* dynamics_tag(DynamicsKind k);
DynamicsKind parse_dynamics_tag(const std::string& s);

// Everything needed to define one dynamics. Overdamped drift: σσᵀ(−∇V + εM) + ωJq.
// Underdamped and GLE force: −∇V + εM + ωJq. Rotation requires d = 2.
struct Model {
  DynamicsKind kind = DynamicsKind::overdamped;
  Potential potential = Potential::quadratic(1, 1.0);
  DiffusionMatrix sigma;
  double beta = 1.0;
  double alpha = 1.0;
  double rotation = 0.0;
  std::optional<PerturbationSpec> perturbation;

  int dim() const { return potential.dim(); }
  int state_dim() const;
  double epsilon() const { return perturbation ? perturbation->epsilon : 0.0; }
  Model with_epsilon(double eps) const;
  Model unperturbed() const;
  bool is_gradient() const;
  // V − εW; requires a gradient-form perturbation.
  Potential effective_potential() const;
  void force(const double* q, double* f) const;
  void drift(const double* q, double* b) const;  // overdamped drift
  void validate() const;
};

struct GaussianState {
  Vec mean;
  Mat cov;
};

// Exact stationary law of a linear model (pure quadratic V, perturbation absent or linear,
// any rotation) from the Lyapunov equation BS + SBᵀ + Q = 0; nullopt for non-linear models.
std::optional<GaussianState> linear_stationary(const Model& m);

}  // namespace lgv
