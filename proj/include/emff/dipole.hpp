#pragma once

#include <Eigen/Dense>
#include <vector>

#include "emff/pairs.hpp"

namespace emff {

// c0 = 3*mu0/(4*pi) with mu0 = 4*pi*1e-7 H/m, so exactly 3e-7 N m^2/A^2.
inline constexpr double kDipoleConstant = 3e-7;

// Pairwise distances below this abort a step instead of being clamped; the
// safety filter is supposed to keep satellites apart.
inline constexpr double kMinSeparation = 1e-6;  // m

struct SatelliteParams {
  double mass = 15.0;                 // kg
  double turns = 400.0;               // coil winding count
  double coil_area = 0.0625 * M_PI;   // m^2
  double coil_resistance = 3.2735;    // Ohm
  double coil_inductance = 0.2;       // H
  double power_cap = 1e4;             // W
};

struct Environment {
  enum class Kind { deep_space, leo };
  Kind kind = Kind::deep_space;
  double mu_g = 6.67e-11;   // N m^2 / kg^2
  double earth_mass = 5.9e24;  // kg
};

// Stacked inertial state [r_1; ...; r_n; v_1; ...; v_n].
struct InertialState {
  double t = 0.0;
  int n = 0;
  Eigen::VectorXd x;  // 6n

  InertialState() = default;
  InertialState(int n_sat, Eigen::VectorXd stacked);

  Eigen::Vector3d r(int i) const { return x.segment<3>(3 * i); }
  Eigen::Vector3d v(int i) const { return x.segment<3>(3 * (n + i)); }
  Eigen::Vector3d r_rel(int i, int j) const { return r(i) - r(j); }
};

// Per-period sinusoidal amplitudes: for each unordered pair p=(i,j), i<j, the
// amplitudes p_ij (applied by satellite i) and p_ji, sharing frequency
// omega(p) from the table.
struct AmplitudeSchedule {
  PairTable table;
  long period_index = 0;
  std::vector<Eigen::Vector3d> p_low;   // p_ij with i < j
  std::vector<Eigen::Vector3d> p_high;  // p_ji

  explicit AmplitudeSchedule(const PairTable& t)
      : table(t),
        p_low(t.count(), Eigen::Vector3d::Zero()),
        p_high(t.count(), Eigen::Vector3d::Zero()) {}

  // Amplitude applied by satellite i toward satellite j.
  const Eigen::Vector3d& amplitude(int i, int j) const {
    return i < j ? p_low[table.index(i, j)] : p_high[table.index(i, j)];
  }
};

// Unit-free part of the dipole interaction:
// (u_j . rhat) u_i + (u_i . rhat) u_j + [(u_i . u_j) - 5 (u_i . rhat)(u_j . rhat)] rhat.
Eigen::Vector3d dipole_force_shape(const Eigen::Vector3d& r,
                                   const Eigen::Vector3d& u_i,
                                   const Eigen::Vector3d& u_j);

// Force on satellite i from satellite j: c0 |r_ij|^-4 * shape. Antisymmetric
// under swapping the pair.
Eigen::Vector3d intersatellite_force(const Eigen::Vector3d& r_ij,
                                     const Eigen::Vector3d& u_i,
                                     const Eigen::Vector3d& u_j);

// Magnetic moment of satellite i at time t under the piecewise-sinusoidal
// schedule: sum over j != i of p_ij sin(omega_ij t).
Eigen::Vector3d moment_waveform(const AmplitudeSchedule& sched, int i, double t);

// Newtonian gravity on one satellite; identically zero in deep space.
Eigen::Vector3d gravity(const Environment& env, const SatelliteParams& params,
                        const Eigen::Vector3d& r);

// Full nonlinear dynamics with sinusoidal moments: returns d/dt of the
// stacked state.
Eigen::VectorXd full_rhs(const InertialState& state,
                         const AmplitudeSchedule& sched, const Environment& env,
                         const SatelliteParams& params);

// Time-averaged surrogate: vdot_i = (c0/2m) sum_j |r_ij|^-4 f(r_ij, p_ij, p_ji)
// with the amplitudes taken directly from `sched` (no sinusoids).
Eigen::VectorXd averaged_rhs(const InertialState& state,
                             const AmplitudeSchedule& sched,
                             const Environment& env,
                             const SatelliteParams& params);

// Both sides of the period-averaging identity for one pair at fixed r:
// lhs = quadrature average of f(r, p_ij sin(w t), p_ji sin(w t)) over one
// period, rhs = f(r, p_ij, p_ji)/2.
struct PairAverage {
  Eigen::Vector3d lhs;
  Eigen::Vector3d rhs;
};
PairAverage pair_average_force_check(const Eigen::Vector3d& r,
                                     const Eigen::Vector3d& p_ij,
                                     const Eigen::Vector3d& p_ji, double omega,
                                     double period);

Eigen::Vector3d total_momentum(const InertialState& state,
                               const SatelliteParams& params);

}  // namespace emff
