#pragma once

// Initial-data generators, the harmonic extension of boundary data, and the
// multi-run studies (λ ladders).

#include <string>
#include <vector>

#include "sphereflow/domain_grid.hpp"
#include "sphereflow/flow.hpp"

namespace sphereflow {

/// Every active node set to `value` (D+1 = value.size() components).
SphereField make_constant_map(GridPtr grid, const std::vector<double>& value);

/// x/|x| on a 3-d domain into S². The origin node gets the north pole.
SphereField make_equator_map(GridPtr grid);
/// Index of the origin node (the flagged node of the equator map).
std::size_t origin_node(const DomainGrid& grid);

/// x/|x| for |x| ≥ rho and (x/|x|)·s(|x|/rho) inside, s(r) = r(2 − r): C¹ with
/// modulus ≤ 1 and zero at the origin. Requires 0 < rho < 1/2 and d = 3.
SphereField make_smoothed_equator(GridPtr grid, double rho);
/// ∫_{B¹} |∇u|² of the continuous smoothed equator map: 8π − 3.2πρ.
double smoothed_equator_energy(double rho);

/// Polar-angle profile θ = θ₀(1 − (1 − min(ρ², 1))³), with ρ the gauge of the
/// domain (|x| on the ball, max-free Σ(xᵢ/wᵢ)² on a box), and azimuth
/// β = (π/4)(x₁ + x₂). Image lies in {last ≥ cos θ₀}; boundary nodes sit on
/// that circle. Requires 0 ≤ θ₀ < π/2 and D ≥ 2.
SphereField make_cap_map(GridPtr grid, double theta0, int target_dim = 2);

/// Great-circle data u = (cos φ, sin φ, 0, …) on a box with
///   φ(t, x) = a·x₁ + b·e^{−μt} Πᵢ cos(πxᵢ/(2wᵢ)),  μ = Σᵢ (π/(2wᵢ))²,
/// which solves the heat equation with boundary data a·x₁.
struct GreatCircle {
  double slope = 1.0;      // a
  double amplitude = 0.5;  // b

  double phase(const DomainGrid& grid, double t, std::span<const double> x) const;
  SphereField field(GridPtr grid, double t, int target_dim = 2) const;
};

struct HarmonicExtension {
  SphereField field;
  /// max-norm of Δ_h h₀ over interior nodes after the solve.
  double residual = 0.0;
  long iterations = 0;
  std::vector<double> history;
};

/// Componentwise −Δ_h h₀ = 0 at interior nodes, h₀ = u₀ at boundary nodes,
/// by conjugate gradients to residual < 1e-10. Throws NumericalError with the
/// residual history when the iteration cap is reached.
HarmonicExtension harmonic_extension(const SphereField& u0, long max_iterations = 1000000);

/// Named generator used by configs and the CLI.
struct ScenarioParams {
  std::string name = "cap";
  double rho = 0.25;
  double theta0 = 1.0471975511965976;
  int target_dim = 2;
  std::vector<double> constant;  // empty: north pole
  GreatCircle great_circle;
};

SphereField make_scenario(GridPtr grid, const ScenarioParams& p);

struct ConvergenceReport {
  std::vector<double> lambdas;
  /// ‖u_λ − u‖_{L²(Q(T))} per λ against the projected run.
  std::vector<double> distances;
  bool non_increasing = true;
  bool strictly_decreasing = true;
};

/// Runs the penalized flow per λ and the projected flow once from u0 with
/// the time grid of `cfg` (dt = auto picks the smallest stable step over the
/// ladder so every run shares it). Space-time L² distance uses the node
/// quadrature per logged checkpoint times the checkpoint spacing.
ConvergenceReport compare_glhf_hhf(const SphereField& u0, const FlowConfig& cfg,
                                   const std::vector<double>& lambdas);
/// Distance between two traces on the same grid and checkpoint times.
double trace_l2_distance(const FlowTrace& a, const FlowTrace& b);

struct PenaltyDecayReport {
  std::vector<double> lambdas;
  std::vector<double> penalties;
  /// Least-squares slope of log(penalty) against log(1/log λ).
  double fitted_exponent = 0.0;
  bool strictly_decreasing = true;
};

PenaltyDecayReport penalty_decay_study(const SphereField& u0, const FlowConfig& cfg,
                                       const std::vector<double>& lambdas);

}  // namespace sphereflow
