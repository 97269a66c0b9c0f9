#pragma once

#include <Eigen/Dense>
#include <functional>

namespace lgv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// f(A) for symmetric A through its eigendecomposition.
Mat symmetric_function(const Mat& a, const std::function<double(double)>& f);

Mat expm(const Mat& a);

// Solves B S + S Bᵀ + Q = 0 (continuous Lyapunov equation); B must be Hurwitz.
Mat lyapunov(const Mat& b, const Mat& q);

// Solves S = A S Aᵀ + Q (discrete Lyapunov equation); A must be Schur stable.
Mat discrete_lyapunov(const Mat& a, const Mat& q);

}  // namespace lgv
