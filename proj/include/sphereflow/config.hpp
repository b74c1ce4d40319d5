#pragma once

// Line-oriented run configuration: `key = value`, `#` starts a comment,
// unknown keys are rejected.
//
//   d, D, shape (ball|box), half_width (one value or a comma list), n
//   scheme (glhf|hhf), lambda, kappa, dt (number or auto), t_end, cfl_safety,
//   stride (checkpoint stride)
//   scenario (constant|equator|smoothed_equator|cap|great_circle), rho,
//   theta0, slope, amplitude, constant (comma list)
//   diagnostics (comma list of energy_check, weak_residual, one_sided,
//   penalty, singular_set, holder, epsilon_regularity), epsilon0, radii,
//   delta, test_count, R0, anchor_stride

#include <cstdint>
#include <string>
#include <vector>

#include "sphereflow/domain_grid.hpp"
#include "sphereflow/flow.hpp"
#include "sphereflow/harness.hpp"

namespace sphereflow {

struct RunConfig {
  DomainSpec domain;
  FlowConfig flow;
  ScenarioParams scenario;
  std::vector<std::string> diagnostics;
  double epsilon0 = 1.0;
  std::vector<double> radii{0.125, 0.25};
  double delta = 0.1;
  int test_count = 8;
  double R0 = 0.25;
  int anchor_stride = 1;

  int target_dim() const { return scenario.target_dim; }
  bool wants(const std::string& diagnostic) const;
};

/// Throws ConfigError with the offending line number.
RunConfig parse_config(const std::string& text);
/// Throws IoError when the file cannot be read.
RunConfig load_config(const std::string& path);

/// Canonical `key = value` form with every key, in fixed order.
std::string canonical_text(const RunConfig& cfg);
/// FNV-1a 64-bit digest of the canonical text, as 16 hex digits.
std::string config_digest(const RunConfig& cfg);

/// Builds the grid and the initial field, checking the scheme's norm
/// invariant (ConfigError when the data does not fit the scheme).
SphereField initial_field(const RunConfig& cfg, GridPtr grid);

}  // namespace sphereflow
