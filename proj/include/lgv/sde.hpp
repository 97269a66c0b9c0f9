#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lgv/model.hpp"
#include "lgv/rng.hpp"

namespace lgv {

inline constexpr double kBlowUpThreshold = 1e8;

struct SimConfig {
  double dt = 1e-3;
  long n_steps = 1000;
  long n_paths = 100;
  std::uint64_t seed = 0;
  long burn_in_steps = 0;
  long record_stride = 1;
  // Deterministic limit: drops every noise term (σ → 0 substitute).
  bool zero_noise = false;

  double horizon() const { return dt * static_cast<double>(n_steps); }
  long n_records() const { return n_steps / record_stride + 1; }
  long total_steps() const { return burn_in_steps + n_steps; }
  void validate() const;
};

// gibbs: q ~ Gibbs of the unperturbed potential, p and z ~ N(0, β⁻¹ I).
// point: a fixed full state. gaussian: full-state N(mean, cov).
struct InitSpec {
  enum class Kind { gibbs, point, gaussian } kind = Kind::gibbs;
  std::vector<double> point;
  Vec mean;
  Mat cov;

  static InitSpec gibbs() { return {}; }
  static InitSpec at(std::vector<double> x);
  static InitSpec gaussian(Vec mean, Mat cov);
};

struct Ensemble {
  std::vector<double> times;
  std::vector<double> states;  // [path][record][component]
  long n_paths = 0;
  long n_records = 0;
  int dim = 1;
  int state_dim = 1;
  DynamicsKind tag = DynamicsKind::overdamped;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  long record_stride = 1;

  const double* state(long path, long record) const {
    return states.data() + (static_cast<std::size_t>(path) * n_records + record) * state_dim;
  }
  double* state(long path, long record) {
    return states.data() + (static_cast<std::size_t>(path) * n_records + record) * state_dim;
  }
};

// Pre-drawn standard normals, [path][step][component]. Lets two integrators, or two step
// sizes, consume the same Brownian path.
struct NoiseBank {
  long n_paths = 0;
  long n_steps = 0;
  int dim = 1;
  std::vector<double> xi;

  static NoiseBank generate(std::uint64_t seed, long n_paths, long n_steps, int dim);
  // Increments of the same Brownian path at twice the step: (ξ₂ₙ + ξ₂ₙ₊₁)/√2.
  NoiseBank coarsened() const;
  const double* at(long path, long step) const {
    return xi.data() + (static_cast<std::size_t>(path) * n_steps + step) * dim;
  }
};

// Euler–Maruyama for dq = [σσᵀ(−∇V + εM) + ωJq] dt + √(2/β) σ dB.
Ensemble simulate_overdamped(const Model& m, const SimConfig& cfg, const InitSpec& init);
// BAOAB; the OU substep is exact: p ← e^{−σσᵀdt} p + (β⁻¹(I − e^{−2σσᵀdt}))^{1/2} ξ.
Ensemble simulate_underdamped(const Model& m, const SimConfig& cfg, const InitSpec& init);
// Euler–Maruyama on (q, p, z).
Ensemble simulate_gle_augmented(const Model& m, const SimConfig& cfg, const InitSpec& init,
                                const NoiseBank* noise = nullptr);
// q̇ = p, ṗ = F(q) − ∫₀ᵗ e^{−α(t−s)} p(s) ds + f(t), f exact OU with f(0) = z(0);
// memory integral by trapezoid over the full history. The reported z is f − memory.
Ensemble simulate_gle_convolution(const Model& m, const SimConfig& cfg, const InitSpec& init,
                                  const NoiseBank* noise = nullptr);
// Pathwise gap between the augmented and convolution GLE forms driven by one Brownian path:
// max over paths and records of |q_aug − q_conv| at step dt and at dt/2.
struct GleComparison {
  double dt = 0.0;
  double gap_coarse = 0.0;
  double gap_fine = 0.0;
  double ratio() const { return gap_fine > 0.0 ? gap_coarse / gap_fine : 0.0; }
};
GleComparison compare_gle_forms(const Model& m, double dt, double horizon, long n_paths, std::uint64_t seed);

// Dispatches on m.kind.
Ensemble simulate(const Model& m, const SimConfig& cfg, const InitSpec& init);

// n samples of the full state (config Gibbs × Gaussian momenta); sample i uses path stream i.
std::vector<double> sample_gibbs(const GibbsMeasure& measure, long n, std::uint64_t seed);

// Reusable sampler; exact for pure quadratics, Gaussian-envelope rejection otherwise.
class GibbsSampler {
 public:
  explicit GibbsSampler(GibbsMeasure measure);
  void sample(RandomStream& rs, double* x) const;
  const GibbsMeasure& measure() const { return m_; }
  bool exact() const { return exact_; }

 private:
  GibbsMeasure m_;
  bool exact_ = false;
  std::vector<double> env_mean_, env_sd_;
  double log_bound_ = 0.0;
};

}  // namespace lgv
