#include "emff/care.hpp"

#include <cmath>

#include "emff/error.hpp"

namespace emff {

namespace {

Eigen::MatrixXd riccati_residual(const Eigen::MatrixXd& F,
                                 const Eigen::MatrixXd& S,
                                 const Eigen::MatrixXd& Wz,
                                 const Eigen::MatrixXd& P) {
  return F.transpose() * P + P * F + Wz - P * S * P;
}

}  // namespace

CareSolution solve_care(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G,
                        const Eigen::MatrixXd& Wz, const Eigen::MatrixXd& Wmu,
                        double tol, int max_iter) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n || G.rows() != n || Wz.rows() != n || Wz.cols() != n ||
      Wmu.rows() != G.cols() || Wmu.cols() != G.cols())
    throw Error("care_unstabilizable", "inconsistent dimensions");

  const Eigen::MatrixXd S =
      G * Wmu.ldlt().solve(G.transpose());  // G Wmu^-1 G^T

  // Hamiltonian of the Riccati equation; its stable invariant subspace is
  // spanned by [I; P].
  Eigen::MatrixXd H(2 * n, 2 * n);
  H << F, -S, -Wz, -F.transpose();

  // Newton iteration for sign(H) with determinant scaling.
  Eigen::MatrixXd Z = H;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Z);
    const Eigen::MatrixXd Zinv = lu.inverse();
    // |det Z|^(-1/2n) scaling accelerates convergence for badly scaled H.
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < 2 * n; ++i)
      log_det += std::log(std::abs(lu.matrixLU()(i, i)));
    const double c = std::exp(-log_det / (2.0 * n));
    const Eigen::MatrixXd Znext = 0.5 * (c * Z + (1.0 / c) * Zinv);
    const double delta = (Znext - Z).norm();
    Z = Znext;
    if (delta <= 1e-14 * Z.norm() + 1e-300) {
      converged = true;
      break;
    }
  }
  if (!converged || !Z.allFinite())
    throw Error("care_no_convergence", "matrix sign iteration did not settle");

  // (sign(H) + I) [I; P] = 0  =>  stacked least squares for P.
  Eigen::MatrixXd lhs(2 * n, n), rhs(2 * n, n);
  lhs.topRows(n) = Z.topRightCorner(n, n);
  lhs.bottomRows(n) = Z.bottomRightCorner(n, n) + Eigen::MatrixXd::Identity(n, n);
  rhs.topRows(n) = -(Z.topLeftCorner(n, n) + Eigen::MatrixXd::Identity(n, n));
  rhs.bottomRows(n) = -Z.bottomLeftCorner(n, n);
  Eigen::MatrixXd P = lhs.colPivHouseholderQr().solve(rhs);
  P = 0.5 * (P + P.transpose()).eval();

  // One Newton defect-correction step: solve the Lyapunov equation
  // Acl^T X + X Acl = -res for the correction, again via the sign function.
  const double scale = 1.0 + P.norm();
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::MatrixXd res = riccati_residual(F, S, Wz, P);
    if (res.norm() <= 0.01 * tol * scale) break;
    const Eigen::MatrixXd Acl = F - S * P;
    Eigen::MatrixXd M(2 * n, 2 * n);
    M << Acl, Eigen::MatrixXd::Zero(n, n), -res, -Acl.transpose();
    Eigen::MatrixXd W = M;
    for (int it = 0; it < max_iter; ++it) {
      const Eigen::MatrixXd Wnext = 0.5 * (W + W.inverse());
      const double delta = (Wnext - W).norm();
      W = Wnext;
      if (delta <= 1e-14 * W.norm() + 1e-300) break;
    }
    if (!W.allFinite()) break;
    // sign([Acl 0; -res -Acl^T]) = [-I 0; -2X I] for X solving
    // Acl^T X + X Acl + res = 0.
    const Eigen::MatrixXd X = -0.5 * W.bottomLeftCorner(n, n);
    P = (P + 0.5 * (X + X.transpose())).eval();
  }

  CareSolution sol;
  sol.P = P;
  sol.residual_norm = riccati_residual(F, S, Wz, P).norm();
  sol.gain = -Wmu.ldlt().solve(G.transpose() * P);
  if (!(sol.residual_norm <= tol * scale) || !P.allFinite())
    throw Error("care_unstabilizable",
                "Riccati residual floor not reached; (F, G) may not be "
                "stabilizable");
  return sol;
}

}  // namespace emff
