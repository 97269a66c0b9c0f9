#pragma once

#include <functional>
#include <vector>

#include "lgv/grid.hpp"
#include "lgv/linalg.hpp"

namespace lgv {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Weight e^{−x²/2}/√(2π): the rule integrates E[f(ξ)], ξ ~ N(0,1), exactly for deg f ≤ 2n−1.
GaussRule gauss_hermite(int n);
// Weight 1 on [−1, 1].
GaussRule gauss_legendre(int n);

// Composite Simpson weights on the n+1 nodes of the grid (n even).
std::vector<double> simpson_weights(const Grid1D& g);

// Tensor rule over points in R^k: nodes are rows of `points`.
struct PointRule {
  Mat points;
  Vec weights;
};

// Expectation rule for N(mean, cov) built from a Cholesky factor of cov.
PointRule gaussian_rule(const Vec& mean, const Mat& cov, int n_per_dim);
// Simpson nodes of a 1D or 2D grid weighted by exp(−βV)/Z: Σ wᵢ f(xᵢ) ≈ E_ρ[f].
PointRule gibbs_rule(const std::function<double(const double*)>& potential, double beta, const Grid1D& g);
PointRule gibbs_rule(const std::function<double(const double*)>& potential, double beta, const Grid2D& g);
double expectation(const PointRule& r, const std::function<double(const double*)>& f);

// Tensor product of two rules: points concatenated coordinatewise, weights multiplied.
PointRule tensor(const PointRule& a, const PointRule& b);

}  // namespace lgv
