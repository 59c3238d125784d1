#pragma once

#include <Eigen/Dense>
#include <utility>

namespace emff {

struct PsiParams {
  double eps1 = 1e-3;
  double eps2 = 1e-6;
};

enum class AllocationBranch { generic, axial, zero_force };

// Moment amplitude pair realizing a prescribed pair force exactly.
struct AllocationResult {
  Eigen::Vector3d c1;
  Eigen::Vector3d c2;
  Eigen::Matrix3d rotation;
  AllocationBranch branch;
};

// Rotation whose first row is rhat; when [r]x f_star != 0 the remaining rows
// are the normalized component of f_star orthogonal to r and the normalized
// [r]x f_star. The degenerate branch keeps only the rhat row.
Eigen::Matrix3d pair_rotation(const Eigen::Vector3d& r,
                              const Eigen::Vector3d& f_star);

// Closed-form (c1, c2) with f(r, c1, c2) = f_star (signed square-root
// construction, exact on every branch).
AllocationResult amplitude_pair(const Eigen::Vector3d& r,
                                const Eigen::Vector3d& f_star);

// Smooth upper bound on the squared amplitude norms realized for the
// prescribed force |r|^4 zeta:
// psi = -(|r|^3 r.z/4) tanh(|r|^3 r.z / eps1) + sqrt(|r|^6 Phi1(r,z)^2 + eps2).
double psi(const Eigen::Vector3d& r, const Eigen::Vector3d& zeta,
           const PsiParams& params);

// Analytic gradients of psi with respect to r and zeta.
void psi_gradients(const Eigen::Vector3d& r, const Eigen::Vector3d& zeta,
                   const PsiParams& params, Eigen::Vector3d* dpsi_dr,
                   Eigen::Vector3d* dpsi_dzeta);

// Amplitudes (p_ij, p_ji) realizing the prescribed force |r_ij|^4 zeta_ij for
// the ordered pair (i, j); the construction is anchored at the (min, max)
// index ordering so both directions agree.
std::pair<Eigen::Vector3d, Eigen::Vector3d> allocate_pair(
    const Eigen::Vector3d& r_ij, const Eigen::Vector3d& zeta_ij, int i, int j);

}  // namespace emff
