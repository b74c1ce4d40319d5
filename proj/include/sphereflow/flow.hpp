#pragma once

// Explicit time stepping of the penalized flow
//   ∂ₜu = Δu − λ^{1−κ}(|u|² − 1)u
// and of the projected harmonic map heat flow
//   u ← normalize(u + dt(Δu + |∇u|²u))
// under pinned Dirichlet data, plus the per-step log and the trace-level checks
// built on it (weak residual, global energy inequality).

#include <optional>
#include <string>
#include <vector>

#include "sphereflow/domain_grid.hpp"

namespace sphereflow {

enum class Scheme { Glhf, ProjectedHhf };

struct FlowConfig {
  Scheme scheme = Scheme::Glhf;
  double lambda = 1.0e3;
  double kappa = 0.5;
  /// Time step; 0 selects the largest stable step (see max_stable_dt).
  double dt = 0.0;
  double t_end = 0.0;
  double cfl_safety = 0.9;
  /// Keep every stride-th step as a checkpoint (the last step is always kept).
  int checkpoint_stride = 1;
  /// Append sup|v| of the stereographic chart to every log record.
  bool monitor_chart = false;

  /// λ^{1−κ}; zero for the projected scheme.
  double penalty_coefficient() const;
};

/// ConfigError for λ < 1, κ ∉ (0,1), cfl_safety ∉ (0,1], negative t_end or dt,
/// stride < 1.
void validate(const FlowConfig& cfg);

/// cfl_safety / Σ_a 2/h_a², the diffusive bound (h²/(2d) on a cubic grid).
double diffusive_dt_bound(const FlowConfig& cfg, const DomainGrid& grid);
/// 1 / (Σ_a 2/h_a² + 2λ^{1−κ}); the penalized step keeps |u| ≤ 1 only below it.
double reaction_dt_bound(const FlowConfig& cfg, const DomainGrid& grid);
/// Smallest applicable bound for the scheme.
double max_stable_dt(const FlowConfig& cfg, const DomainGrid& grid);
/// Throws CflError naming the violated bound.
void validate_cfl(double dt, const FlowConfig& cfg, const DomainGrid& grid);

/// One explicit Euler step of the penalized flow with step cfg.dt.
SphereField glhf_step(const SphereField& u, const FlowConfig& cfg);
/// One projected step. Throws ProjectionSingularity when a pre-projection
/// vector is shorter than 1e-8.
SphereField hhf_projected_step(const SphereField& u, const FlowConfig& cfg);

/// Edge form ½ Σ |u_j − u_i|² h^d / h_a² over axis edges with at least one
/// interior endpoint; its gradient is −h^d Δ_h u at interior nodes.
double dirichlet_energy(const SphereField& u);
/// Σ_interior h^d · c/4 · (|u|² − 1)² with c = λ^{1−κ}.
double penalty_energy(const SphereField& u, double coefficient);
double sup_norm(const SphereField& u);
/// Minimum over active nodes of the last ambient component.
double min_last_component(const SphereField& u);

struct StepRecord {
  double t = 0.0;
  double dirichlet = 0.0;
  double penalty = 0.0;
  double sup_norm = 0.0;
  /// Σ_interior h^d |Δu/Δt|² for the step ending at t (0 for the first record).
  double ut_sq = 0.0;
  double min_last = 0.0;
  std::optional<double> sup_v;
};

struct FlowTrace {
  FlowConfig config;
  double dt = 0.0;
  /// Checkpoints in increasing time; the first is u₀.
  std::vector<SphereField> checkpoints;
  /// One record per step, starting with u₀ at t = 0.
  std::vector<StepRecord> log;
  bool failed = false;
  std::string failure;

  const DomainGrid& grid() const { return checkpoints.front().grid(); }
  double end_time() const { return checkpoints.back().time(); }
};

/// Steps u0 to cfg.t_end. Throws CflError up front; a numerical failure during
/// stepping ends the run and is recorded in the returned trace.
FlowTrace run_flow(const SphereField& u0, const FlowConfig& cfg);

/// max_j |∫∫ ⟨∂ₜu, φ_j⟩ + ⟨∇u, ∇φ_j⟩ − ⟨u, φ_j⟩|∇u|² dz| over a fixed family of
/// bump test maps supported inside the domain and the trace's time span.
double weak_residual(const FlowTrace& trace, int test_count);

struct EnergyCheckReport {
  bool holds = true;
  /// max over logged t₁ < t₂ of E(t₂) + ∫_{t₁}^{t₂}∫|∂ₜu|² − E(t₁).
  double max_excess = 0.0;
  double initial_energy = 0.0;
  /// Smallest C with max_excess ≤ 1e-6·E(0) + C(dt + h²)T.
  double fitted_C = 0.0;
  /// The inequality is reported violated when fitted_C exceeds c_bound·E(0).
  double c_bound = 0.0;
  std::size_t worst_t1 = 0;
  std::size_t worst_t2 = 0;
};

EnergyCheckReport global_energy_check(const FlowTrace& trace, double c_bound = 100.0);

}  // namespace sphereflow
