#include "lgv/quadrature.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "lgv/error.hpp"

namespace lgv {

namespace {

// Golub–Welsch: nodes are eigenvalues of the Jacobi matrix, weights are μ₀·v₀².
GaussRule golub_welsch(const Vec& diag, const Vec& offdiag, double mu0) {
  const auto n = diag.size();
  Mat j = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    j(i, i) = diag(i);
    if (i + 1 < n) j(i, i + 1) = j(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(j);
  if (es.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailure, "Golub-Welsch eigensolve failed");
  GaussRule r;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.nodes.push_back(es.eigenvalues()(i));
    const double v = es.eigenvectors()(0, i);
    r.weights.push_back(mu0 * v * v);
  }
  return r;
}

}  // namespace

GaussRule gauss_hermite(int n) {
  require(n >= 1, "gauss_hermite order must be positive");
  Vec off(std::max(0, n - 1));
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  return golub_welsch(Vec::Zero(n), off, 1.0);
}

GaussRule gauss_legendre(int n) {
  require(n >= 1, "gauss_legendre order must be positive");
  Vec off(std::max(0, n - 1));
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(Vec::Zero(n), off, 2.0);
}

std::vector<double> simpson_weights(const Grid1D& g) {
  require(g.n >= 2 && g.n % 2 == 0, "Simpson quadrature needs an even number of intervals");
  std::vector<double> w(g.n + 1);
  const double h = g.h();
  for (std::size_t i = 0; i <= g.n; ++i) w[i] = (i == 0 || i == g.n) ? h / 3 : (i % 2 ? 4 * h / 3 : 2 * h / 3);
  return w;
}

PointRule gaussian_rule(const Vec& mean, const Mat& cov, int n_per_dim) {
  const auto d = mean.size();
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "Gaussian rule covariance is not SPD");
  const Mat l = llt.matrixL();
  const GaussRule gh = gauss_hermite(n_per_dim);
  Eigen::Index total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= n_per_dim;
  PointRule r{Mat(total, d), Vec(total)};
  Vec xi(d);
  for (Eigen::Index idx = 0; idx < total; ++idx) {
    Eigen::Index rem = idx;
    double w = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto m = rem % n_per_dim;
      rem /= n_per_dim;
      xi(k) = gh.nodes[m];
      w *= gh.weights[m];
    }
    r.points.row(idx) = (mean + l * xi).transpose();
    r.weights(idx) = w;
  }
  return r;
}

namespace {

PointRule normalize_gibbs(Mat points, const std::vector<double>& log_w_minus_u) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_w_minus_u) m = std::max(m, v);
  Vec w(static_cast<Eigen::Index>(log_w_minus_u.size()));
  for (std::size_t i = 0; i < log_w_minus_u.size(); ++i) w(static_cast<Eigen::Index>(i)) = std::exp(log_w_minus_u[i] - m);
  w /= w.sum();
  return {std::move(points), std::move(w)};
}

}  // namespace

PointRule gibbs_rule(const std::function<double(const double*)>& potential, double beta, const Grid1D& g) {
  const auto w = simpson_weights(g);
  Mat pts(static_cast<Eigen::Index>(g.n + 1), 1);
  std::vector<double> lw(g.n + 1);
  for (std::size_t i = 0; i <= g.n; ++i) {
    const double q = g.node(i);
    pts(static_cast<Eigen::Index>(i), 0) = q;
    lw[i] = std::log(w[i]) - beta * potential(&q);
  }
  return normalize_gibbs(std::move(pts), lw);
}

PointRule gibbs_rule(const std::function<double(const double*)>& potential, double beta, const Grid2D& g) {
  const auto wx = simpson_weights(g.x);
  const auto wy = simpson_weights(g.y);
  const std::size_t nx = g.x.n + 1, ny = g.y.n + 1;
  Mat pts(static_cast<Eigen::Index>(nx * ny), 2);
  std::vector<double> lw(nx * ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double q[2] = {g.x.node(i), g.y.node(j)};
      const auto k = static_cast<Eigen::Index>(i * ny + j);
      pts(k, 0) = q[0];
      pts(k, 1) = q[1];
      lw[i * ny + j] = std::log(wx[i] * wy[j]) - beta * potential(q);
    }
  return normalize_gibbs(std::move(pts), lw);
}

double expectation(const PointRule& r, const std::function<double(const double*)>& f) {
  double s = 0.0;
  const Eigen::Index d = r.points.cols();
  std::vector<double> x(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < r.points.rows(); ++i) {
    if (r.weights(i) == 0.0) continue;
    for (Eigen::Index k = 0; k < d; ++k) x[static_cast<std::size_t>(k)] = r.points(i, k);
    s += r.weights(i) * f(x.data());
  }
  return s;
}

PointRule tensor(const PointRule& a, const PointRule& b) {
  const auto na = a.points.rows(), nb = b.points.rows();
  PointRule r{Mat(na * nb, a.points.cols() + b.points.cols()), Vec(na * nb)};
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < nb; ++j) {
      const auto k = i * nb + j;
      r.points.row(k) << a.points.row(i), b.points.row(j);
      r.weights(k) = a.weights(i) * b.weights(j);
    }
  return r;
}

}  // namespace lgv
