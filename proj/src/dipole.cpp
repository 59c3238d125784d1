#include "emff/dipole.hpp"

#include <cmath>
#include <string>

#include "emff/error.hpp"
#include "emff/numerics.hpp"

namespace emff {

InertialState::InertialState(int n_sat, Eigen::VectorXd stacked)
    : n(n_sat), x(std::move(stacked)) {
  if (x.size() != 6 * n)
    throw Error("bad_formation_spec", "state vector has wrong size");
}

Eigen::Vector3d dipole_force_shape(const Eigen::Vector3d& r,
                                   const Eigen::Vector3d& u_i,
                                   const Eigen::Vector3d& u_j) {
  const double dist = r.norm();
  if (dist <= 0.0)
    throw Error("coincident_satellites", "zero separation in dipole model");
  const Eigen::Vector3d rhat = r / dist;
  const double ai = u_i.dot(rhat);
  const double aj = u_j.dot(rhat);
  return aj * u_i + ai * u_j + (u_i.dot(u_j) - 5.0 * ai * aj) * rhat;
}

Eigen::Vector3d intersatellite_force(const Eigen::Vector3d& r_ij,
                                     const Eigen::Vector3d& u_i,
                                     const Eigen::Vector3d& u_j) {
  const double dist = r_ij.norm();
  if (dist < kMinSeparation)
    throw Error("coincident_satellites",
                "separation " + std::to_string(dist) + " m below limit");
  return kDipoleConstant / std::pow(dist, 4) *
         dipole_force_shape(r_ij, u_i, u_j);
}

Eigen::Vector3d moment_waveform(const AmplitudeSchedule& sched, int i,
                                double t) {
  const PairTable& table = sched.table;
  if (i < 0 || i >= table.n())
    throw Error("schedule_incomplete", "satellite index out of range");
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  for (int j = 0; j < table.n(); ++j) {
    if (j == i) continue;
    const int p = table.index(i, j);
    u += sched.amplitude(i, j) * std::sin(table.omega(p) * t);
  }
  return u;
}

Eigen::Vector3d gravity(const Environment& env, const SatelliteParams& params,
                        const Eigen::Vector3d& r) {
  if (env.kind == Environment::Kind::deep_space) return Eigen::Vector3d::Zero();
  const double dist = r.norm();
  if (dist <= 0.0)
    throw Error("singular_gravity", "satellite at the gravitational center");
  return -env.mu_g * params.mass * env.earth_mass / std::pow(dist, 3) * r;
}

namespace {

// Shared assembly: per-pair force supplied by `pair_force(p, r_ij)`, applied
// antisymmetrically, plus gravity.
template <typename PairForce>
Eigen::VectorXd assemble_rhs(const InertialState& state, const PairTable& table,
                             const Environment& env,
                             const SatelliteParams& params,
                             const PairForce& pair_force) {
  const int n = state.n;
  Eigen::VectorXd dx(6 * n);
  dx.head(3 * n) = state.x.tail(3 * n);  // rdot = v
  std::vector<Eigen::Vector3d> acc(n, Eigen::Vector3d::Zero());
  for (int p = 0; p < table.count(); ++p) {
    const auto [i, j] = table.pair(p);
    const Eigen::Vector3d r_ij = state.r_rel(i, j);
    if (r_ij.norm() < kMinSeparation)
      throw Error("coincident_satellites",
                  "pair (" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ") separation below limit");
    const Eigen::Vector3d F = pair_force(p, r_ij);
    acc[i] += F / params.mass;
    acc[j] -= F / params.mass;
  }
  for (int i = 0; i < n; ++i)
    dx.segment<3>(3 * (n + i)) =
        acc[i] + gravity(env, params, state.r(i)) / params.mass;
  return dx;
}

}  // namespace

Eigen::VectorXd full_rhs(const InertialState& state,
                         const AmplitudeSchedule& sched, const Environment& env,
                         const SatelliteParams& params) {
  std::vector<Eigen::Vector3d> moments(state.n);
  for (int i = 0; i < state.n; ++i)
    moments[i] = moment_waveform(sched, i, state.t);
  return assemble_rhs(state, sched.table, env, params,
                      [&](int p, const Eigen::Vector3d& r_ij) {
                        const auto [i, j] = sched.table.pair(p);
                        return intersatellite_force(r_ij, moments[i],
                                                    moments[j]);
                      });
}

Eigen::VectorXd averaged_rhs(const InertialState& state,
                             const AmplitudeSchedule& sched,
                             const Environment& env,
                             const SatelliteParams& params) {
  return assemble_rhs(state, sched.table, env, params,
                      [&](int p, const Eigen::Vector3d& r_ij) {
                        return 0.5 * intersatellite_force(r_ij, sched.p_low[p],
                                                          sched.p_high[p]);
                      });
}

PairAverage pair_average_force_check(const Eigen::Vector3d& r,
                                     const Eigen::Vector3d& p_ij,
                                     const Eigen::Vector3d& p_ji, double omega,
                                     double period) {
  const double cycles = omega * period / (2.0 * M_PI);
  if (std::abs(cycles - std::round(cycles)) > 1e-9 || cycles < 0.5)
    throw Error("not_common_period",
                "period is not an integer multiple of 2*pi/omega");
  PairAverage out;
  out.lhs = quadrature_average(
      [&](double t) -> Eigen::Vector3d {
        const double s = std::sin(omega * t);
        return dipole_force_shape(r, s * p_ij, s * p_ji);
      },
      0.0, period, 2000);
  out.rhs = 0.5 * dipole_force_shape(r, p_ij, p_ji);
  return out;
}

Eigen::Vector3d total_momentum(const InertialState& state,
                               const SatelliteParams& params) {
  Eigen::Vector3d mom = Eigen::Vector3d::Zero();
  for (int i = 0; i < state.n; ++i) mom += params.mass * state.v(i);
  return mom;
}

}  // namespace emff
