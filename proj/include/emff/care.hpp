#pragma once

#include <Eigen/Dense>

namespace emff {

struct CareSolution {
  Eigen::MatrixXd P;     // symmetric positive-semidefinite
  Eigen::MatrixXd gain;  // K = -Wmu^-1 G^T P, stabilizing
  double residual_norm;  // Frobenius norm of the Riccati residual
};

// Solves F^T P + P F + Wz - P G Wmu^-1 G^T P = 0 for the stabilizing P via a
// matrix-sign-function iteration on the associated Hamiltonian, using only
// matrix inversion and norms. (F, G) must be stabilizable and Wmu symmetric
// positive definite. The returned gain places the closed-loop spectrum of
// F + G*gain in the open left half-plane.
//
// Throws Error("care_no_convergence") if the sign iteration stalls and
// Error("care_unstabilizable") if no symmetric solution with a small residual
// can be extracted.
CareSolution solve_care(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G,
                        const Eigen::MatrixXd& Wz, const Eigen::MatrixXd& Wmu,
                        double tol = 1e-10, int max_iter = 200);

}  // namespace emff
