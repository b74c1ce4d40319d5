#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sphereflow/domain_grid.hpp"
#include "sphereflow/flow.hpp"

namespace testing {

using namespace sphereflow;

inline constexpr double kPi = std::numbers::pi;

inline GridPtr ball(int d, int n) {
  DomainSpec s;
  s.dimension = d;
  s.shape = Shape::UnitBall;
  s.resolution = n;
  return build_grid(s);
}

inline GridPtr box(int d, int n, double w = 1.0) {
  DomainSpec s;
  s.dimension = d;
  s.shape = Shape::Box;
  s.half_widths.assign(d, w);
  s.resolution = n;
  return build_grid(s);
}

inline FlowConfig config(Scheme scheme, double t_end, double lambda = 1e3) {
  FlowConfig c;
  c.scheme = scheme;
  c.lambda = lambda;
  c.t_end = t_end;
  return c;
}

inline double radius(std::span<const double> x) {
  double r2 = 0.0;
  for (double c : x) r2 += c * c;
  return std::sqrt(r2);
}

/// Field with components given by f(x, c) at active nodes.
template <class F>
SphereField field_from(GridPtr g, int components, F f) {
  SphereField u(g, components);
  std::vector<double> x(g->dimension());
  for (std::size_t i : g->active_nodes()) {
    g->position(i, x);
    for (int c = 0; c < components; ++c) u.at(i)[c] = f(x, c);
  }
  return u;
}

/// Unit vectors with a positive last component of at least `floor`.
inline SphereField random_upper_field(GridPtr g, int components, unsigned seed, double floor = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  SphereField u(g, components);
  for (std::size_t i : g->active_nodes()) {
    std::vector<double> v(components);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& c : v) n2 += (c = N(rng)) * c;
      v.back() = std::abs(v.back());
    } while (n2 < 1e-6 || v.back() / std::sqrt(n2) < floor);
    for (int c = 0; c < components; ++c) u.at(i)[c] = v[c] / std::sqrt(n2);
  }
  return u;
}

inline double max_abs_diff(const SphereField& a, const SphereField& b) {
  double m = 0.0;
  for (std::size_t i : a.grid().active_nodes())
    for (int c = 0; c < a.components(); ++c) m = std::max(m, std::abs(a.at(i)[c] - b.at(i)[c]));
  return m;
}

}  // namespace testing
