#include "sphereflow/chart.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sphereflow/errors.hpp"

namespace sphereflow {

namespace {

constexpr double kSouthMargin = 1e-6;

// Chart coordinates of u/|u| at one node; false when outside the chart domain.
bool chart_point(std::span<const double> u, std::span<double> v) {
  const int dim = static_cast<int>(u.size()) - 1;
  double n2 = 0.0;
  for (double c : u) n2 += c * c;
  const double n = std::sqrt(n2);
  if (!(n > 0.0)) return false;
  if (u[dim] / n <= -1.0 + kSouthMargin) return false;
  const double den = n + u[dim];
  for (int i = 0; i < dim; ++i) v[i] = u[i] / den;
  return true;
}

[[noreturn]] void outside(const DomainGrid& g, std::size_t node) {
  std::ostringstream os;
  os << "node " << node << " (x =";
  for (double c : g.position(node)) os << ' ' << c;
  os << ") is at or near the south pole; stereographic chart undefined";
  throw ChartDomainError(os.str());
}

}  // namespace

ChartField to_chart(const SphereField& u) {
  const DomainGrid& g = u.grid();
  ChartField v;
  v.grid = u.grid_ptr();
  v.dimension = u.target_dimension();
  v.t = u.time();
  v.values.assign(g.node_count() * v.dimension, 0.0);
  for (std::size_t i : g.active_nodes())
    if (!chart_point(u.at(i), v.at(i))) outside(g, i);
  return v;
}

SphereField from_chart(const ChartField& v) {
  const DomainGrid& g = *v.grid;
  SphereField u(v.grid, v.dimension + 1, v.t);
  for (std::size_t i : g.active_nodes()) {
    auto vi = v.at(i);
    double s = 0.0;
    for (double c : vi) {
      if (!std::isfinite(c)) throw ContractError("non-finite chart value at node " + std::to_string(i));
      s += c * c;
    }
    auto ui = u.at(i);
    const double den = 1.0 + s;
    for (int k = 0; k < v.dimension; ++k) ui[k] = 2.0 * vi[k] / den;
    ui[v.dimension] = (1.0 - s) / den;
    const double n = u.norm(i);
    for (double& c : ui) c /= n;
  }
  return u;
}

double chart_sup_norm(const SphereField& u) {
  const DomainGrid& g = u.grid();
  std::vector<double> v(u.target_dimension());
  double best = 0.0;
  for (std::size_t i : g.active_nodes()) {
    if (!chart_point(u.at(i), v)) outside(g, i);
    double s = 0.0;
    for (double c : v) s += c * c;
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

double max_gradient_sq(const SphereField& u) {
  ScalarField gs = gradient_norm_sq(u);
  double best = 0.0;
  for (std::size_t i : u.grid().active_nodes()) best = std::max(best, gs[i]);
  return best;
}

OneSidedReport one_sided_monitor(const FlowTrace& trace, double delta, double c_tol) {
  if (trace.checkpoints.empty()) throw ContractError("empty trace");
  const SphereField& u0 = trace.checkpoints.front();
  const double m0 = min_last_component(u0);
  if (!(m0 >= delta)) {
    std::ostringstream os;
    os << "initial data is not hemisphere-confined: min last component " << m0
       << " < delta = " << delta;
    throw ContractError(os.str());
  }
  OneSidedReport rep;
  const double h = trace.grid().max_spacing();
  rep.tolerance = 1e-6 + c_tol * (trace.dt + h * h);
  rep.blow_up = trace.failed;
  for (const SphereField& u : trace.checkpoints) {
    SliceMonitor s;
    s.t = u.time();
    s.min_last = min_last_component(u);
    try {
      s.sup_v = chart_sup_norm(u);
    } catch (const ChartDomainError&) {
      rep.blow_up = true;
      s.sup_v = INFINITY;
    }
    s.max_grad_sq = max_gradient_sq(u);
    rep.slices.push_back(s);
  }
  const double v0 = rep.slices.front().sup_v;
  for (std::size_t k = 1; k < rep.slices.size(); ++k) {
    if (rep.slices[k].sup_v > v0 + rep.tolerance) {
      rep.first_violation = k;
      break;
    }
  }
  const double g0 = rep.slices.front().max_grad_sq;
  double gmax = g0;
  for (const auto& s : rep.slices) gmax = std::max(gmax, s.max_grad_sq);
  rep.grad_growth = g0 > 0.0 ? gmax / g0 : (gmax > 0.0 ? INFINITY : 1.0);
  return rep;
}

}  // namespace sphereflow
