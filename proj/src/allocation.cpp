#include "emff/allocation.hpp"

#include <cmath>

#include "emff/error.hpp"

namespace emff {

namespace {

// Values within 1e-15 (relative to |r||f|) of zero are treated as exactly
// zero so the sgn-based branches do not chatter on rounding noise.
int sign_of_alignment(double r_dot_f, double scale) {
  if (std::abs(r_dot_f) <= 1e-15 * scale) return 0;
  return r_dot_f > 0.0 ? 1 : -1;
}

// The radicands are differences of same-magnitude terms, so rounding noise
// scales with the terms themselves; anything more negative than that noise
// floor indicates a real construction error.
double safe_sqrt(double radicand, double scale) {
  if (radicand < -1e-9 * scale - 1e-12)
    throw Error("allocation_internal_error",
                "negative radicand in amplitude construction");
  return std::sqrt(std::max(radicand, 0.0));
}

double phi1(const Eigen::Vector3d& r, const Eigen::Vector3d& f) {
  return std::sqrt(r.cross(f).squaredNorm() +
                   r.squaredNorm() * f.squaredNorm());
}

}  // namespace

Eigen::Matrix3d pair_rotation(const Eigen::Vector3d& r,
                              const Eigen::Vector3d& f_star) {
  const double rn = r.norm();
  if (rn <= 0.0) throw Error("zero_baseline", "zero relative position");
  Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
  R.row(0) = r.transpose() / rn;
  const Eigen::Vector3d cross = r.cross(f_star);
  const double cn = cross.norm();
  if (cn > 1e-12 * rn * f_star.norm()) {
    // Component of f_star orthogonal to r, normalized; |r^T r f - r^T f r| =
    // |r| |[r]x f|.
    R.row(1) =
        (r.squaredNorm() * f_star - r.dot(f_star) * r).transpose() / (rn * cn);
    R.row(2) = cross.transpose() / cn;
  }
  return R;
}

AllocationResult amplitude_pair(const Eigen::Vector3d& r,
                                const Eigen::Vector3d& f_star) {
  const double rn = r.norm();
  if (rn <= 0.0) throw Error("zero_baseline", "zero relative position");

  AllocationResult out;
  out.rotation = pair_rotation(r, f_star);

  const double rf = r.dot(f_star);
  const int sgn = sign_of_alignment(rf, rn * f_star.norm());
  const double abs_rf = (sgn == 0) ? 0.0 : std::abs(rf);
  const double p1 = phi1(r, f_star);
  const double p2 = (2 - sgn * sgn) * p1;

  const double scale = (abs_rf + 2.0 * p1) / rn;
  const double ax = -0.5 * sgn * safe_sqrt((abs_rf + p1) / rn, scale);
  const double ay = safe_sqrt((-abs_rf + p2) / rn, scale) / std::sqrt(2.0);
  const double bx = 0.5 * safe_sqrt((abs_rf + p2) / rn, scale);
  const double by = -sgn * safe_sqrt((-abs_rf + p1) / rn, scale) / std::sqrt(2.0);

  out.c1 = out.rotation.transpose() * Eigen::Vector3d(ax, ay, 0.0);
  out.c2 = out.rotation.transpose() * Eigen::Vector3d(bx, by, 0.0);

  if (p1 == 0.0)
    out.branch = AllocationBranch::zero_force;
  else if (r.cross(f_star).norm() <= 1e-12 * rn * f_star.norm())
    out.branch = AllocationBranch::axial;
  else
    out.branch = AllocationBranch::generic;
  return out;
}

double psi(const Eigen::Vector3d& r, const Eigen::Vector3d& zeta,
           const PsiParams& params) {
  const double rn = r.norm();
  const double g = rn * rn * rn * r.dot(zeta);
  const double s = std::pow(rn, 6) * phi1(r, zeta) * phi1(r, zeta);
  return -0.25 * g * std::tanh(g / params.eps1) + std::sqrt(s + params.eps2);
}

void psi_gradients(const Eigen::Vector3d& r, const Eigen::Vector3d& zeta,
                   const PsiParams& params, Eigen::Vector3d* dpsi_dr,
                   Eigen::Vector3d* dpsi_dzeta) {
  const double rn = r.norm();
  const double rn2 = rn * rn;
  const double rz = r.dot(zeta);
  const double g = rn2 * rn * rz;

  const double th = std::tanh(g / params.eps1);
  const double sech2 = 1.0 - th * th;
  const double dpsi_dg = -0.25 * (th + (g / params.eps1) * sech2);
  const Eigen::Vector3d dg_dr = 3.0 * rn * rz * r + rn2 * rn * zeta;
  const Eigen::Vector3d dg_dz = rn2 * rn * r;

  // |r|^6 Phi1^2 = 2|r|^8 |z|^2 - |r|^6 (r.z)^2
  const double rn6 = rn2 * rn2 * rn2;
  const double s = 2.0 * rn6 * rn2 * zeta.squaredNorm() - rn6 * rz * rz;
  const Eigen::Vector3d ds_dr = 16.0 * rn6 * zeta.squaredNorm() * r -
                                6.0 * rn2 * rn2 * rz * rz * r -
                                2.0 * rn6 * rz * zeta;
  const Eigen::Vector3d ds_dz = 4.0 * rn6 * rn2 * zeta - 2.0 * rn6 * rz * r;
  const double root = std::sqrt(s + params.eps2);

  *dpsi_dr = dpsi_dg * dg_dr + ds_dr / (2.0 * root);
  *dpsi_dzeta = dpsi_dg * dg_dz + ds_dz / (2.0 * root);
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> allocate_pair(
    const Eigen::Vector3d& r_ij, const Eigen::Vector3d& zeta_ij, int i, int j) {
  // Anchor at the (min, max) ordering; f_ji = -f_ij and r_ji = -r_ij, so the
  // swapped pair sees a consistent construction.
  const bool forward = i < j;
  const Eigen::Vector3d r = forward ? r_ij : Eigen::Vector3d(-r_ij);
  const Eigen::Vector3d zeta = forward ? zeta_ij : Eigen::Vector3d(-zeta_ij);
  const double rn = r.norm();
  if (rn <= 0.0) throw Error("zero_baseline", "zero relative position");
  const Eigen::Vector3d f_star = std::pow(rn, 4) * zeta;
  const AllocationResult res = amplitude_pair(r, f_star);
  return forward ? std::make_pair(res.c1, res.c2)
                 : std::make_pair(res.c2, res.c1);
}

}  // namespace emff
