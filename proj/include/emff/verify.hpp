#pragma once

#include <string>
#include <utility>
#include <vector>

#include "emff/scenario.hpp"

namespace emff {

// Result of one randomized property sweep: worst-case residuals by name,
// plus a pass/fail verdict against the sweep's tolerances.
struct SweepResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::vector<std::pair<std::string, double>> residuals;
  bool pass() const { return failures == 0; }
};

// A three-satellite deep-space scenario with representative weights and
// constraints, used when no scenario file is supplied.
Scenario default_scenario();

// Round-trip exactness of the amplitude construction over all branches, the
// amplitude norm identity, and the smooth power bound.
SweepResult verify_allocation(unsigned seed, int cases = 10000);

// Period-averaged sinusoidal pair force vs half the amplitude force, and
// cross-frequency decoupling.
SweepResult verify_averaging(unsigned seed, int cases = 200);

// Riccati solver: analytic double integrator, random stabilizable systems,
// and the controller cascades for 3- and 4-satellite formations.
SweepResult verify_care(unsigned seed, int random_cases = 25);

// Analytic barrier gradient vs central finite differences at random states
// near the scenario's initial conditions.
SweepResult verify_gradient(const Scenario& scenario, unsigned seed,
                            int cases = 100);

// KKT conditions of the closed-form safety filter: complementary slackness
// and cost optimality against random feasible samples.
SweepResult verify_kkt(const Scenario& scenario, unsigned seed,
                       int cases = 1000);

}  // namespace emff
