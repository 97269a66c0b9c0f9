#include "lgv/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "lgv/error.hpp"

namespace lgv {

Mat symmetric_function(const Mat& a, const std::function<double(double)>& f) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (es.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailure, "symmetric eigendecomposition failed");
  Vec d = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Mat expm(const Mat& a) { return a.exp(); }

namespace {

// Column-major vec: vec(A S Bᵀ) = (B ⊗ A) vec(S).
Mat kron(const Mat& a, const Mat& b) {
  Mat k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

Mat solve_vec(const Mat& op, const Mat& rhs, Eigen::Index n) {
  Eigen::FullPivLU<Mat> lu(op);
  if (!lu.isInvertible()) fail(ErrorCode::LinearSolveFailure, "Lyapunov operator is singular");
  Vec s = lu.solve(Eigen::Map<const Vec>(rhs.data(), rhs.size()));
  Mat out = Eigen::Map<Mat>(s.data(), n, n);
  return 0.5 * (out + out.transpose());
}

}  // namespace

Mat lyapunov(const Mat& b, const Mat& q) {
  const auto n = b.rows();
  const Mat id = Mat::Identity(n, n);
  return solve_vec(kron(id, b) + kron(b, id), -q, n);
}

Mat discrete_lyapunov(const Mat& a, const Mat& q) {
  const auto n = a.rows();
  return solve_vec(Mat::Identity(n * n, n * n) - kron(a, a), q, n);
}

}  // namespace lgv
