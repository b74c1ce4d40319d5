#pragma once

// Stereographic chart from the south pole,
//   u_i = 2v_i/(1+|v|²) (i ≤ D),  u_{D+1} = (1−|v|²)/(1+|v|²),
// and the hemisphere-confinement monitor built on it. The last ambient
// component plays the role of the height coordinate.

#include <optional>
#include <vector>

#include "sphereflow/domain_grid.hpp"
#include "sphereflow/flow.hpp"

namespace sphereflow {

struct ChartField {
  GridPtr grid;
  int dimension = 0;  // D
  double t = 0.0;
  std::vector<double> values;  // node-major, D per node; zero at exterior nodes

  std::span<const double> at(std::size_t node) const {
    return {values.data() + node * dimension, static_cast<std::size_t>(dimension)};
  }
  std::span<double> at(std::size_t node) {
    return {values.data() + node * dimension, static_cast<std::size_t>(dimension)};
  }
};

/// v = u_{1..D}/(|u| + u_{D+1}) at active nodes: the chart of u/|u|, so it
/// also accepts penalized states with |u| ≠ 1. Throws ChartDomainError naming
/// the first node whose direction has last component ≤ −1 + 1e-6.
ChartField to_chart(const SphereField& u);

/// Throws ContractError on non-finite input. Exterior nodes map to zero.
SphereField from_chart(const ChartField& v);

/// max over active nodes of |v| for the chart of u (same domain rule).
double chart_sup_norm(const SphereField& u);

struct SliceMonitor {
  double t = 0.0;
  double min_last = 0.0;
  double sup_v = 0.0;
  double max_grad_sq = 0.0;
};

struct OneSidedReport {
  std::vector<SliceMonitor> slices;
  double tolerance = 0.0;
  /// Index of the first slice with sup|v| > sup|v(0)| + tolerance.
  std::optional<std::size_t> first_violation;
  /// Set when the run failed or the image left the chart domain.
  bool blow_up = false;
  /// max_k max|∇u|²(t_k) / max|∇u|²(0), or 1 when the initial value is 0.
  double grad_growth = 1.0;
  bool holds() const { return !first_violation && !blow_up; }
};

/// Per-checkpoint hemisphere monitor. Throws ContractError unless
/// min over nodes of the last component of u₀ is ≥ delta. The tolerance is
/// 1e-6 + c_tol·(dt + h²).
OneSidedReport one_sided_monitor(const FlowTrace& trace, double delta = 0.1,
                                 double c_tol = 1.0);

/// max over active nodes of the node gradient-norm-squared.
double max_gradient_sq(const SphereField& u);

}  // namespace sphereflow
