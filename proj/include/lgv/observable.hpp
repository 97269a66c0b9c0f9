#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lgv/model.hpp"

namespace lgv {

// Sparse multivariate polynomial over n state variables.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  Polynomial() = default;
  explicit Polynomial(int n_vars) : n_(n_vars) {}
  static Polynomial constant(int n_vars, double c);
  static Polynomial variable(int n_vars, int i);

  int n_vars() const { return n_; }
  int degree() const;
  const std::map<Exponents, double>& terms() const { return terms_; }
  void add_term(const Exponents& e, double c);

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double c) const;
  Polynomial pow(int k) const;
  Polynomial derivative(int i) const;

  double operator()(const double* x) const;

 private:
  int n_ = 0;
  std::map<Exponents, double> terms_;
};

// Parses e.g. "0.25*q^4 - q^2/2", "q1*p2 + 3", "(q+p)^2". Variables: q, p, z (index 1 when d = 1)
// or q1..qd, p1..pd, z1..zd; p and z require the matching state layout.
Polynomial parse_polynomial(const std::string& expr, int dim, int state_dim);

// Scalar function on the state vector (q[, p[, z]]). Immutable; copies share the implementation.
class Observable {
 public:
  struct Impl {
    virtual ~Impl() = default;
    virtual double value(const double* x) const = 0;
    virtual bool differentiable() const { return false; }
    virtual void gradient(const double* x, double* g) const;
    virtual void hessian(const double* x, double* h) const;  // n×n row-major
  };

  Observable() = default;
  Observable(std::shared_ptr<const Impl> impl, int n_vars, std::string tag)
      : impl_(std::move(impl)), n_(n_vars), tag_(std::move(tag)) {}

  static Observable polynomial(const Polynomial& p, std::string tag = "");
  static Observable parse(const std::string& expr, int dim, int state_dim);
  static Observable constant(int n_vars, double c);
  static Observable coordinate(int n_vars, int i);
  // Bump in the first b.center.size() coordinates.
  static Observable bump(int n_vars, const Bump& b);
  static Observable function(int n_vars, ScalarField f, std::string tag);

  double operator()(const double* x) const { return impl_->value(x); }
  bool differentiable() const { return impl_->differentiable(); }
  void gradient(const double* x, double* g) const { impl_->gradient(x, g); }
  void hessian(const double* x, double* h) const { impl_->hessian(x, h); }
  int n_vars() const { return n_; }
  const std::string& tag() const { return tag_; }
  bool valid() const { return static_cast<bool>(impl_); }

  Observable operator*(const Observable& o) const;
  Observable operator+(const Observable& o) const;
  Observable scaled(double c) const;
  Observable shifted(double c) const;
  // x ↦ f(Px) with P = diag(parity).
  Observable flipped(const std::vector<double>& parity) const;

 private:
  std::shared_ptr<const Impl> impl_;
  int n_ = 0;
  std::string tag_;
};

// W as an observable on the first d state components; gradient-form perturbations only.
Observable perturbation_potential(const PerturbationSpec& w, int n_vars);

// Momentum (and for GLE the p block only; z is even) sign flip for the model's state layout.
std::vector<double> momentum_parity(const Model& m);

// L f for the model's generator, applied analytically from f's gradient and Hessian:
//   overdamped   b·∇f + β⁻¹ a:∇²f
//   underdamped  p·∇_q f + F·∇_p f − (a p)·∇_p f + β⁻¹ a:∇²_p f
//   GLE          p·∇_q f + (F + z)·∇_p f − (αz + p)·∇_z f + αβ⁻¹ Δ_z f
Observable apply_generator(const Model& m, const Observable& f);

// Γ(g, h) = L(gh) − gLh − hLg = 2β⁻¹ ∇gᵀ a ∇h for the overdamped generator
// (gradients in p for the underdamped generator).
Observable carre_du_champ(const Model& m, const Observable& g, const Observable& h);

}  // namespace lgv
