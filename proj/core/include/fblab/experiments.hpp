#pragma once

#include <string>
#include <vector>

#include "fblab/field.hpp"
#include "fblab/io.hpp"
#include "fblab/types.hpp"

// Named experiment drivers behind the command-line tool. Each one reads a
// strict key=value config (unknown keys are rejected with their line number),
// runs the computation, writes CSV output stamped with the config hash, and
// checks any assert.* bounds the config requests.

namespace fblab {

struct RunOptions {
  std::string out_dir = ".";
  bool verbose = false;
};

const std::vector<std::string>& experiment_names();

// Returns 0 when the run and every requested assertion succeed, 1 when an
// assertion fails (the failing quantity is printed), 2 when the config is
// invalid for the named experiment.
int run_experiment(const std::string& name, const Config& cfg,
                   const RunOptions& opts);

// A perturbed half-space profile marched through its vanishing time and kept
// at three storage cadences, so the energy slabs of small radii near the top
// stay time-resolved without holding the whole march at the finest cadence.
// X0 is the located free-boundary point at the last stored slice.
struct MarchedScenario {
  SpaceTimeField window_half;     // cadence for radii near 1/2
  SpaceTimeField window_quarter;  // cadence for radii near 1/4
  SpaceTimeField window_fine;     // cadence for radii 1/8 and below
  SpaceTimePoint X0;
};

MarchedScenario perturbed_halfspace_scenario();

// One line of the integral-identity suite: a computed left side, the bound or
// reference it must meet, and the slack the comparison ran with.
struct IdentityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool ok = false;
};

// Checks, in order: twin-march uniqueness decay, the weighted Poincare
// inequality on seeded bump fields, the pointwise caloric bound, and the
// shift invariance of the quadratic Weiss part under caloric polynomials.
std::vector<IdentityCheck> identity_suite(unsigned seed = 1);

}  // namespace fblab
