#include <cmath>
#include <numbers>
#include <sstream>

#include "sphereflow/errors.hpp"
#include "sphereflow/harness.hpp"

namespace sphereflow {

SphereField make_constant_map(GridPtr grid, const std::vector<double>& value) {
  if (value.size() < 2) throw ConfigError("constant map needs at least 2 components");
  SphereField u(grid, static_cast<int>(value.size()));
  for (std::size_t i : grid->active_nodes()) std::copy(value.begin(), value.end(), u.at(i).begin());
  return u;
}

std::size_t origin_node(const DomainGrid& grid) {
  std::vector<int> idx(grid.dimension(), (grid.resolution() - 1) / 2);
  return grid.node_at(idx);
}

namespace {

void require_equator_grid(const DomainGrid& g) {
  if (g.dimension() != 3)
    throw ConfigError("equator-map scenarios need d = 3, got d = " + std::to_string(g.dimension()));
}

}  // namespace

SphereField make_equator_map(GridPtr grid) {
  require_equator_grid(*grid);
  SphereField u(grid, 3);
  const std::size_t o = origin_node(*grid);
  double x[3];
  for (std::size_t i : grid->active_nodes()) {
    auto ui = u.at(i);
    if (i == o) {
      ui[0] = 0.0;
      ui[1] = 0.0;
      ui[2] = 1.0;
      continue;
    }
    grid->position(i, x);
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    for (int c = 0; c < 3; ++c) ui[c] = x[c] / r;
  }
  return u;
}

SphereField make_smoothed_equator(GridPtr grid, double rho) {
  require_equator_grid(*grid);
  if (!(rho > 0.0 && rho < 0.5))
    throw ConfigError("smoothed equator core radius must lie in (0, 1/2), got " +
                      std::to_string(rho));
  SphereField u(grid, 3);
  double x[3];
  for (std::size_t i : grid->active_nodes()) {
    grid->position(i, x);
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    auto ui = u.at(i);
    if (r == 0.0) continue;
    double s = 1.0;
    if (r < rho) {
      const double q = r / rho;
      s = q * (2.0 - q);
    }
    for (int c = 0; c < 3; ++c) ui[c] = x[c] / r * s;
  }
  return u;
}

double smoothed_equator_energy(double rho) {
  return 8.0 * std::numbers::pi - 3.2 * std::numbers::pi * rho;
}

SphereField make_cap_map(GridPtr grid, double theta0, int target_dim) {
  if (!(theta0 >= 0.0 && theta0 < std::numbers::pi / 2))
    throw ConfigError("cap aperture must lie in [0, pi/2), got " + std::to_string(theta0));
  if (target_dim < 2) throw ConfigError("cap map needs D >= 2");
  const DomainGrid& g = *grid;
  const int d = g.dimension();
  SphereField u(grid, target_dim + 1);
  std::vector<double> x(d);
  for (std::size_t i : g.active_nodes()) {
    g.position(i, x);
    double rho2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double y = g.spec().shape == Shape::UnitBall ? x[a] : x[a] / g.half_width(a);
      rho2 += y * y;
    }
    const double q = 1.0 - std::min(rho2, 1.0);
    const double theta = rho2 >= 1.0 ? theta0 : theta0 * (1.0 - q * q * q);
    const double beta = 0.25 * std::numbers::pi * (x[0] + x[1]);
    auto ui = u.at(i);
    ui[0] = std::sin(theta) * std::cos(beta);
    ui[1] = std::sin(theta) * std::sin(beta);
    ui[target_dim] = std::cos(theta);
  }
  return u;
}

double GreatCircle::phase(const DomainGrid& grid, double t, std::span<const double> x) const {
  double mu = 0.0;
  double prod = 1.0;
  for (int a = 0; a < grid.dimension(); ++a) {
    const double k = std::numbers::pi / (2.0 * grid.half_width(a));
    mu += k * k;
    prod *= std::cos(k * x[a]);
  }
  return slope * x[0] + amplitude * std::exp(-mu * t) * prod;
}

SphereField GreatCircle::field(GridPtr grid, double t, int target_dim) const {
  if (grid->spec().shape != Shape::Box) throw ConfigError("great-circle scenario needs a box domain");
  if (target_dim < 1) throw ConfigError("great-circle scenario needs D >= 1");
  SphereField u(grid, target_dim + 1, t);
  std::vector<double> x(grid->dimension());
  for (std::size_t i : grid->active_nodes()) {
    grid->position(i, x);
    const double phi = phase(*grid, t, x);
    auto ui = u.at(i);
    ui[0] = std::cos(phi);
    ui[1] = std::sin(phi);
  }
  return u;
}

SphereField make_scenario(GridPtr grid, const ScenarioParams& p) {
  if (p.name == "constant") {
    std::vector<double> v = p.constant;
    if (v.empty()) {
      v.assign(p.target_dim + 1, 0.0);
      v.back() = 1.0;
    }
    return make_constant_map(grid, v);
  }
  if (p.name == "equator") return make_equator_map(grid);
  if (p.name == "smoothed_equator") return make_smoothed_equator(grid, p.rho);
  if (p.name == "cap") return make_cap_map(grid, p.theta0, p.target_dim);
  if (p.name == "great_circle") return p.great_circle.field(grid, 0.0, p.target_dim);
  throw ConfigError("unknown scenario '" + p.name + "'");
}

}  // namespace sphereflow
