#pragma once

#include <string>
#include <vector>

#include "emff/control.hpp"
#include "emff/scenario.hpp"

namespace emff {

// Rotating frame anchored at the formation's mass center.
struct FormationFrame {
  Eigen::Vector3d r_com;
  Eigen::Matrix3d R_com;  // columns [i_hat j_hat k_hat], maps frame -> inertial
  Eigen::Vector3d k_hat;
  double omega_orb = 0.0;  // rad/s
};

FormationFrame formation_frame(const InertialState& state);

// Piecewise-constant schedule evaluated in the requested frame; in the
// rotating frame the derivatives follow the rigid rotation at omega_orb about
// k_hat.
DesiredSignals desired_signals(const Scenario& scenario,
                               const InertialState& state, double t);

struct TrajectoryLog {
  int n = 0;
  int l = 0;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;      // 6n
  std::vector<Eigen::VectorXd> zeta;   // 3l
  std::vector<double> h;
  std::vector<double> lambda;
  std::vector<Eigen::VectorXd> args;   // 2l+n barrier arguments
  std::vector<Eigen::VectorXd> dist;   // l
  std::vector<Eigen::VectorXd> speed;  // l
  std::vector<Eigen::VectorXd> power;  // n
  std::vector<std::vector<Eigen::Vector3d>> amps_low;   // per pair, p_ij (i<j)
  std::vector<std::vector<Eigen::Vector3d>> amps_high;  // per pair, p_ji
};

struct RunOptions {
  bool filter_enabled = true;  // false forces mu = mu_d (safety filter off)
  double horizon_override = -1.0;
};

TrajectoryLog run_averaged(const Scenario& scenario,
                           const RunOptions& opts = {});
TrajectoryLog run_full(const Scenario& scenario, const RunOptions& opts = {});

// q_i = (1/N^2 sigma^2) sum_{j != i} Z_ij |p_ij|^2 from the held amplitudes.
Eigen::VectorXd apparent_power(const std::vector<Eigen::Vector3d>& amps_low,
                               const std::vector<Eigen::Vector3d>& amps_high,
                               const ControllerConfig& config,
                               const PairTable& table);

struct Interval {
  double t0 = 0.0;
  double t1 = 0.0;
};

struct ConstraintReport {
  double min_distance = 0.0;
  double max_speed = 0.0;
  double max_power = 0.0;
  double min_h = 0.0;
  std::vector<Interval> lambda_active;
  double terminal_formation_error = 0.0;  // max over pairs (1,j)
  bool distance_ok = false;
  bool speed_ok = false;
  bool power_ok = false;
  // First violation, if any.
  double violation_time = -1.0;
  std::string violation_what;
};

ConstraintReport monitor(const TrajectoryLog& log, const Scenario& scenario);

}  // namespace emff
