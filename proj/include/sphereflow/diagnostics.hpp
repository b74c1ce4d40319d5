#pragma once

// Both sides of the regularity inequalities evaluated on flow traces.
//
// Space-time integrals: checkpoint k owns the time cell between the midpoints
// to its neighbours (clipped to the trace span; a single-checkpoint trace owns
// [t₀, t₀ + dt]). A window [a, b] weights slice k by |cell_k ∩ [a, b]|, and a
// backward kernel is evaluated at the midpoint of that intersection. Spatial
// integrals use the sub-cell quadrature of sampling.hpp.

#include <optional>
#include <string>
#include <vector>

#include "sphereflow/domain_grid.hpp"
#include "sphereflow/flow.hpp"
#include "sphereflow/sampling.hpp"

namespace sphereflow {

/// λ and κ of a trace, or the projected scheme (penalty term off).
struct PenaltyParams {
  Scheme scheme = Scheme::ProjectedHhf;
  double lambda = 1.0;
  double kappa = 0.5;

  static PenaltyParams of(const FlowConfig& cfg) { return {cfg.scheme, cfg.lambda, cfg.kappa}; }
  /// λ^{1−κ}, zero under the projected scheme. Throws ConfigError for λ < 1
  /// under the penalized scheme.
  double coefficient() const;
};

struct EnergyDensityField {
  GridPtr grid;
  double t = 0.0;
  std::vector<double> values;  // node-wise e_λ, zero at exterior nodes
};

/// |∇u|²/2 + λ^{1−κ}(|u|² − 1)²/4 per node, gradient by gradient_norm_sq.
EnergyDensityField energy_density(const SphereField& u, const PenaltyParams& p);

struct TimeCell {
  std::size_t slice = 0;
  double weight = 0.0;
  double t_mid = 0.0;
};
/// Slices whose time cells meet [a, b], with the overlap lengths.
std::vector<TimeCell> time_cells(const FlowTrace& trace, double a, double b);

/// ∫_{Q(T)} λ^{1−κ}(|u|² − 1)² dz.
double penalty_integral(const FlowTrace& trace, const PenaltyParams& p, int subdivisions = 2);

class BackwardKernel {
 public:
  BackwardKernel(double t0, std::vector<double> x0);
  double t0() const { return t0_; }
  const std::vector<double>& x0() const { return x0_; }
  /// (4π(t₀−t))^{−d/2} exp(−|x−x₀|²/(4(t₀−t))); KernelDomainError for t ≥ t₀.
  double operator()(double t, std::span<const double> x) const;

 private:
  double t0_;
  std::vector<double> x0_;
};

/// ∫_Ω e·G(t, ·) dx for a sampled density e.
double kernel_weighted_integral(const SampledScalar& e, const BackwardKernel& kernel, double t);
/// Sampled e_λ of one slice.
SampledScalar sampled_energy_density(const SphereField& u, const PenaltyParams& p,
                                     int subdivisions = 2);
/// ∫_Ω e_λ G_{z₀}(t, x) dx at slice time t.
double kernel_weighted_energy(const SphereField& u, const BackwardKernel& kernel, double t,
                              const PenaltyParams& p, int subdivisions = 2);

enum class AnchorKind { Interior, Boundary };

struct MonotonicityOptions {
  AnchorKind kind = AnchorKind::Interior;
  /// μ₀ for interior anchors, ε₀ for boundary anchors.
  double exponent = 0.5;
  PenaltyParams penalty;
  int subdivisions = 2;
  /// Φ(R_i) > (1 + tol)Φ(R_{i+1}) flags non-monotone behaviour.
  double tolerance = 1e-3;
};

struct MonotonicityReport {
  AnchorKind kind = AnchorKind::Interior;
  double t0 = 0.0;
  std::vector<double> x0;
  std::vector<double> radii;
  /// Slab convention actually integrated, e.g. "(t0-4R^2, t0-R^2)".
  std::string slab;
  /// Φ(R) = ∫_{t₀−4R²}^{t₀−R²}∫_Ω density·G dz per radius.
  std::vector<double> phi;
  /// Weighted defect ∫_{R_i}^{R_{i+1}} dR ∫_{slab(R)} ∫ |∂ₜu − α(x−x₀)·∇u|² G per
  /// adjacent pair (already multiplied by 2 for the boundary form).
  std::vector<double> defect;
  /// Smallest C with L(R_i) + defect(R_i, R_j) ≤ C·m(R_i, R_j)·Φ(R_j) over all
  /// pairs i < j, m = exp(R_j^μ₀ − R_i^μ₀) (interior) or 1 (boundary).
  double fitted_multiplicative = 0.0;
  /// Smallest C' with L + defect ≤ m·Φ(R_j) + C'·b(R_i, R_j), b = R_j − R_i
  /// (interior) or R_j^ε₀ − R_i^ε₀ (boundary).
  double fitted_additive = 0.0;
  bool non_monotone = false;
};

/// Throws ContractError for inadmissible radii (unsorted, R_k ≥ √t₀/2, t₀
/// after the trace) or for a boundary anchor farther than h from ∂Ω.
MonotonicityReport monotonicity_check(const FlowTrace& trace, double t0,
                                      const std::vector<double>& x0,
                                      const std::vector<double>& radii,
                                      const MonotonicityOptions& opt);

/// Time derivative of the trace at checkpoint k by centred differences
/// (one-sided at the ends).
SphereField time_derivative(const FlowTrace& trace, std::size_t k);

/// Per-slice sampled |∇u|², reused across anchors and radii.
class GradientCache {
 public:
  GradientCache(const FlowTrace& trace, int subdivisions = 2);
  const SampledScalar& slice(std::size_t k) const;
  const FlowTrace& trace() const { return trace_; }

 private:
  const FlowTrace& trace_;
  int sub_;
  mutable std::vector<std::optional<SampledScalar>> slices_;
};

/// (1/(2R^d)) ∫_{P_R(z₀)∩Q} |∇u|² dz with P_R = (t₀−R², t₀+R²) × B_R(x₀).
/// Throws ContractError when the cylinder misses the trace.
double scaled_energy_density(const FlowTrace& trace, double t0, const std::vector<double>& x0,
                             double R, int subdivisions = 2);
double scaled_energy_density(const GradientCache& cache, double t0,
                             const std::vector<double>& x0, double R);

struct SingularPoint {
  std::size_t slice = 0;
  std::size_t node = 0;
};

struct SingularCandidateSet {
  double epsilon = 0.0;
  std::vector<double> radii;
  std::vector<SingularPoint> points;
  std::size_t anchors_tested = 0;
  double flagged_fraction = 0.0;
};

/// Space-time anchors (checkpoint, active node) whose scaled density is ≥ ε₀
/// at every probed radius. `stride` subsamples anchor nodes along each axis.
SingularCandidateSet singular_set(const FlowTrace& trace, double epsilon,
                                  const std::vector<double>& radii, int stride = 1,
                                  int subdivisions = 2);
SingularCandidateSet singular_set(const GradientCache& cache, double epsilon,
                                  const std::vector<double>& radii, int stride = 1);

struct ReversePoincareReport {
  double lhs = 0.0;           // ∫_{P_R∩Q} |∇u|²
  double oscillation = 0.0;   // (1/R²)∫_{P_2R∩Q} |u − a(t)|²
  double initial_energy = 0.0;  // ∫_{P_2R∩Q} |∇u₀|²
  double rhs = 0.0;           // oscillation + initial_energy
  double fitted_C = 0.0;      // lhs / rhs (0 when both vanish)
  std::string a_choice;       // "spatial-mean" or "constant"
};

/// a(t) defaults to the mean of u over B_2R(x₀)∩Ω at each slice; pass a
/// constant vector to override. Throws ContractError for R ≤ 0 or no overlap.
ReversePoincareReport reverse_poincare_check(const FlowTrace& trace, double t0,
                                             const std::vector<double>& x0, double R,
                                             const std::optional<std::vector<double>>& a = {},
                                             int subdivisions = 2);

struct HybridReport {
  double lhs = 0.0;        // ∫_{P_R∩Q} e_λ
  double outer = 0.0;      // ∫_{P_2R∩Q} e_λ
  double distance = 0.0;   // ∫_{P_2R∩Q} |u − h₀|²
  double harmonic = 0.0;   // ∫_{P_2R∩Q} |∇h₀|²
  double epsilon = 0.0;
  /// Smallest C(ε₀) with lhs ≤ ε₀·outer + C(ε₀)/R²·distance + harmonic.
  double fitted_C = 0.0;
  double lhs_penalty = 0.0;
  double lhs_gradient = 0.0;
  /// The penalty part of lhs exceeds its gradient part: the o(1) term as
  /// λ → ∞ is not yet negligible.
  bool pre_asymptotic = false;
};

/// Throws ContractError when x₀ is farther than one spacing from ∂Ω.
HybridReport hybrid_check(const FlowTrace& trace, double t0, const std::vector<double>& x0,
                          double R, double epsilon, const SphereField& h0,
                          const PenaltyParams& p, int subdivisions = 2);

struct HolderReport {
  double modulus = 0.0;
  std::size_t pairs = 0;
  std::optional<std::string> warning;
};

/// sup over active nodes in the region and checkpoint pairs with
/// 0 < |t − s| ≤ R₀² of |u(t,x) − u(s,x)| / |t − s|^{1/2}. Pass R₀ = ∞ to use
/// every pair. A warning is attached when the region meets a candidate of
/// `singular`. Throws ContractError for fewer than two checkpoints.
HolderReport holder_time_modulus(const FlowTrace& trace, const Region& region, double R0,
                                 const SingularCandidateSet* singular = nullptr);

/// g(t) = t(1 + log(1/t))^{d+1}.
double regularity_scale(double t, int d);

struct EpsilonRegularityAnchor {
  std::size_t slice = 0;
  std::size_t node = 0;
  double density = 0.0;  // (1/R₀^d)∫_{P_g(R₀)∩Q} e_λ
  double sup_e = 0.0;    // node max of e_λ over P_R₀∩Q
  double implied_C = 0.0;
};

struct EpsilonRegularityReport {
  double epsilon = 0.0;
  double R0 = 0.0;
  double g_R0 = 0.0;
  double boundary_c2 = 0.0;  // finite-difference proxy for ‖u₀‖_{C²(∂Ω)}
  std::size_t anchors_tested = 0;
  std::vector<EpsilonRegularityAnchor> small_density;
  double fitted_C = 0.0;
  /// Small-density anchors with sup e_λ above fitted_C·(1/R₀² + ‖u₀‖); always
  /// zero by construction of the fit, kept as a self-check.
  std::size_t envelope_violations = 0;
};

EpsilonRegularityReport epsilon_regularity_report(const FlowTrace& trace, double epsilon,
                                                  double R0, const PenaltyParams& p,
                                                  int stride = 1, int subdivisions = 2);

/// Max over boundary nodes of |u| + |∇u| + |D²u| by finite differences.
double boundary_c2_norm(const SphereField& u0);

/// One NDJSON diagnostic record.
struct DiagnosticRecord {
  std::string kind;
  std::vector<double> z0;  // t, x…
  double R = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double defect = 0.0;
  double fitted_C = 0.0;
};

/// One record per radius; lhs = Φ(R), rhs = fitted_multiplicative·Φ(R),
/// defect = defect from R to the next radius (0 for the last).
std::vector<DiagnosticRecord> to_records(const MonotonicityReport& r);

}  // namespace sphereflow
