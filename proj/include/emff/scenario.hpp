#pragma once

#include <string>
#include <vector>

#include "emff/control.hpp"
#include "emff/dipole.hpp"

namespace emff {

// One piecewise-constant segment of the desired formation.
struct FormationSegment {
  double start_time = 0.0;          // s
  std::vector<Eigen::Vector3d> d;   // n-1 desired relative positions, pair
                                    // (1,j) stacking
};

enum class FormationFrameKind { inertial, com };
enum class SimMode { averaged, full };

struct Scenario {
  int n = 0;
  SatelliteParams params;
  Environment env;
  ControllerConfig config;
  std::vector<Eigen::Vector3d> r0;  // n
  std::vector<Eigen::Vector3d> v0;  // n
  FormationFrameKind frame = FormationFrameKind::inertial;
  std::vector<FormationSegment> segments;
  SimMode mode = SimMode::averaged;
  double horizon = 0.0;  // s
  double period = 0.1;   // s, controller/logging period T

  Eigen::VectorXd initial_state() const;
};

// Parses and validates a scenario; throws Error("config_error", ...) naming
// the offending field.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);
std::string serialize_scenario(const Scenario& s);

bool scenario_equal(const Scenario& a, const Scenario& b);

}  // namespace emff
