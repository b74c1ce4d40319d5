#include <cmath>

#include "sphereflow/diagnostics.hpp"
#include "sphereflow/errors.hpp"
#include "sphereflow/harness.hpp"

namespace sphereflow {

namespace {

double common_dt(const FlowConfig& cfg, const DomainGrid& g, const std::vector<double>& lambdas) {
  if (cfg.dt > 0.0) return cfg.dt;
  FlowConfig probe = cfg;
  probe.scheme = Scheme::ProjectedHhf;
  double dt = max_stable_dt(probe, g);
  probe.scheme = Scheme::Glhf;
  for (double l : lambdas) {
    probe.lambda = l;
    dt = std::min(dt, max_stable_dt(probe, g));
  }
  return dt;
}

}  // namespace

double trace_l2_distance(const FlowTrace& a, const FlowTrace& b) {
  if (a.checkpoints.empty() || b.checkpoints.empty()) throw ContractError("empty trace");
  require_same_grid(a.grid(), b.grid());
  if (a.checkpoints.size() != b.checkpoints.size())
    throw ContractError("traces have different checkpoint counts");
  for (std::size_t k = 0; k < a.checkpoints.size(); ++k)
    if (std::abs(a.checkpoints[k].time() - b.checkpoints[k].time()) > 1e-12)
      throw ContractError("traces have different checkpoint times");
  const DomainGrid& g = a.grid();
  double total = 0.0;
  for (const TimeCell& cell : time_cells(a, -INFINITY, INFINITY)) {
    const SphereField& u = a.checkpoints[cell.slice];
    const SphereField& v = b.checkpoints[cell.slice];
    if (u.components() != v.components()) throw ContractError("traces have different targets");
    ScalarField diff(u.grid_ptr());
    for (std::size_t i : g.active_nodes()) {
      double s = 0.0;
      for (int c = 0; c < u.components(); ++c) s += (u.at(i)[c] - v.at(i)[c]) * (u.at(i)[c] - v.at(i)[c]);
      diff[i] = s;
    }
    total += cell.weight * integrate(diff);
  }
  return std::sqrt(total);
}

ConvergenceReport compare_glhf_hhf(const SphereField& u0, const FlowConfig& cfg,
                                   const std::vector<double>& lambdas) {
  ConvergenceReport rep;
  rep.lambdas = lambdas;
  FlowConfig base = cfg;
  base.dt = common_dt(cfg, u0.grid(), lambdas);
  FlowConfig hcfg = base;
  hcfg.scheme = Scheme::ProjectedHhf;
  // The projected flow needs unit data; the penalized runs start from the same field.
  const FlowTrace reference = run_flow(u0, hcfg);
  if (reference.failed) throw NumericalError("projected reference run failed: " + reference.failure);
  for (double l : lambdas) {
    FlowConfig gcfg = base;
    gcfg.scheme = Scheme::Glhf;
    gcfg.lambda = l;
    const FlowTrace run = run_flow(u0, gcfg);
    if (run.failed) throw NumericalError("penalized run failed: " + run.failure);
    rep.distances.push_back(trace_l2_distance(run, reference));
  }
  for (std::size_t i = 1; i < rep.distances.size(); ++i) {
    if (rep.distances[i] > rep.distances[i - 1]) rep.non_increasing = false;
    if (!(rep.distances[i] < rep.distances[i - 1])) rep.strictly_decreasing = false;
  }
  return rep;
}

PenaltyDecayReport penalty_decay_study(const SphereField& u0, const FlowConfig& cfg,
                                       const std::vector<double>& lambdas) {
  PenaltyDecayReport rep;
  rep.lambdas = lambdas;
  FlowConfig base = cfg;
  base.scheme = Scheme::Glhf;
  base.dt = common_dt(cfg, u0.grid(), lambdas);
  for (double l : lambdas) {
    FlowConfig run_cfg = base;
    run_cfg.lambda = l;
    const FlowTrace run = run_flow(u0, run_cfg);
    if (run.failed) throw NumericalError("penalized run failed: " + run.failure);
    rep.penalties.push_back(penalty_integral(run, PenaltyParams::of(run_cfg)));
  }
  for (std::size_t i = 1; i < rep.penalties.size(); ++i)
    if (!(rep.penalties[i] < rep.penalties[i - 1])) rep.strictly_decreasing = false;
  // Least squares of log P against log(1/log λ).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(rep.penalties[i] > 0.0) || !(lambdas[i] > 1.0)) continue;
    const double x = -std::log(std::log(lambdas[i]));
    const double y = std::log(rep.penalties[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n >= 2 && sxx * n - sx * sx > 0.0) rep.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return rep;
}

}  // namespace sphereflow
