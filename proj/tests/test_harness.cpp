#include <cmath>

#include "doctest.h"
#include "sphereflow/errors.hpp"
#include "sphereflow/harness.hpp"
#include "support.hpp"

using namespace testing;

namespace {

std::size_t node_at(const DomainGrid& g, std::vector<double> target) {
  std::vector<double> x(g.dimension());
  for (std::size_t i : g.active_nodes()) {
    g.position(i, x);
    double d = 0.0;
    for (int a = 0; a < g.dimension(); ++a) d = std::max(d, std::abs(x[a] - target[a]));
    if (d < 1e-12) return i;
  }
  FAIL("no node at the requested position");
  return 0;
}

}  // namespace

TEST_CASE("equator map") {
  const GridPtr g = ball(3, 21);
  const SphereField u = make_equator_map(g);
  for (std::size_t i : g->active_nodes()) CHECK(u.norm(i) == doctest::Approx(1.0).epsilon(1e-15));
  auto e = u.at(node_at(*g, {1.0, 0.0, 0.0}));
  CHECK(e[0] == 1.0);
  CHECK(e[1] == 0.0);
  CHECK(e[2] == 0.0);
  auto f = u.at(node_at(*g, {0.3, 0.4, 0.0}));
  CHECK(f[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(f[2] == 0.0);
  const std::size_t o = origin_node(*g);
  CHECK(o == node_at(*g, {0.0, 0.0, 0.0}));
  CHECK(u.at(o)[2] == 1.0);

  std::vector<double> x(3);
  for (std::size_t i : g->boundary_nodes()) {
    g->position(i, x);
    for (int c = 0; c < 3; ++c) CHECK(u.at(i)[c] == doctest::Approx(x[c] / radius(x)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(make_equator_map(ball(2, 9)), ConfigError);
}

TEST_CASE("equator map is stationary to second order away from the origin") {
  // One projected step moves a node by dt·|Δu + |∇u|²u| up to normalization;
  // the continuous tension field of x/|x| vanishes.
  auto drift = [](int n) {
    const GridPtr g = ball(3, n);
    const SphereField u = make_equator_map(g);
    FlowConfig c = config(Scheme::ProjectedHhf, 0.0);
    c.dt = diffusive_dt_bound(c, *g);
    const SphereField v = hhf_projected_step(u, c);
    std::vector<double> x(3);
    double worst = 0.0;
    for (std::size_t i : g->interior_nodes()) {
      g->position(i, x);
      const double r = radius(x);
      if (r < 0.4 || r > 0.8) continue;
      for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(v.at(i)[k] - u.at(i)[k]) / c.dt);
    }
    return worst;
  };
  const double coarse = drift(33), fine = drift(65);
  MESSAGE("tension drift ", coarse, " -> ", fine);
  CHECK(coarse / fine > 3.0);
  CHECK(coarse / fine < 5.0);
}

TEST_CASE("smoothed equator") {
  const GridPtr g = ball(3, 33);
  const double rho = 0.25;
  const SphereField u = make_smoothed_equator(g, rho);
  const SphereField eq = make_equator_map(g);
  std::vector<double> x(3);
  for (std::size_t i : g->active_nodes()) {
    g->position(i, x);
    const double r = radius(x);
    CHECK(u.norm(i) <= 1.0 + 1e-15);
    if (r >= rho)
      for (int c = 0; c < 3; ++c) CHECK(u.at(i)[c] == eq.at(i)[c]);
    else
      CHECK(u.norm(i) == doctest::Approx((r / rho) * (2.0 - r / rho)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(make_smoothed_equator(g, 0.6), ConfigError);
  CHECK_THROWS_AS(make_smoothed_equator(g, 0.0), ConfigError);
  CHECK_THROWS_AS(make_smoothed_equator(box(2, 9), 0.25), ConfigError);

  CHECK(smoothed_equator_energy(rho) == doctest::Approx(8.0 * kPi - 3.2 * kPi * rho));
  double prev = 0.0;
  for (double r : {0.45, 0.3, 0.2, 0.1}) {
    const double e = 2.0 * dirichlet_energy(make_smoothed_equator(g, r));
    MESSAGE("rho = ", r, "  energy ", e, "  continuous ", smoothed_equator_energy(r));
    CHECK(std::isfinite(e));
    CHECK(e > prev);
    CHECK(e == doctest::Approx(smoothed_equator_energy(r)).epsilon(0.1));
    prev = e;
  }
}

TEST_CASE("cap map") {
  const GridPtr g = ball(3, 17);
  const SphereField u = make_cap_map(g, kPi / 3.0);
  CHECK(min_last_component(u) == doctest::Approx(0.5).epsilon(1e-12));
  for (std::size_t i : g->active_nodes()) CHECK(u.norm(i) == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t i : g->boundary_nodes()) CHECK(u.at(i)[2] == doctest::Approx(0.5).epsilon(1e-12));

  const SphereField flat = make_cap_map(g, 0.0);
  for (std::size_t i : g->active_nodes()) CHECK(flat.at(i)[2] == 1.0);
  const SphereField hi = make_cap_map(g, 0.5, 3);
  CHECK(hi.components() == 4);
  CHECK(min_last_component(hi) >= std::cos(0.5) - 1e-12);

  CHECK_THROWS_AS(make_cap_map(g, kPi / 2.0), ConfigError);
  CHECK_THROWS_AS(make_cap_map(g, 2.0), ConfigError);
  CHECK_THROWS_AS(make_cap_map(g, -0.1), ConfigError);
  CHECK_THROWS_AS(make_cap_map(g, 0.5, 1), ConfigError);
}

TEST_CASE("scenario lookup") {
  const GridPtr g = ball(3, 9);
  ScenarioParams p;
  p.name = "cap";
  CHECK(max_abs_diff(make_scenario(g, p), make_cap_map(g, p.theta0)) == 0.0);
  p.name = "constant";
  CHECK(make_scenario(g, p).at(g->active_nodes()[0])[2] == 1.0);
  p.name = "great_circle";
  CHECK_THROWS_AS(make_scenario(g, p), ConfigError);
  CHECK_NOTHROW(make_scenario(box(2, 9), p));
  p.name = "torus";
  CHECK_THROWS_AS(make_scenario(g, p), ConfigError);
}

TEST_CASE("harmonic extension") {
  const GridPtr g = ball(3, 17);
  const HarmonicExtension c = harmonic_extension(make_constant_map(g, {0.0, 0.6, 0.8}));
  for (std::size_t i : g->active_nodes()) {
    CHECK(c.field.at(i)[1] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(c.field.at(i)[2] == doctest::Approx(0.8).epsilon(1e-12));
  }

  // Coordinates are discretely harmonic, so the extension of x|∂Ω is x.
  SphereField coords = field_from(g, 3, [](auto x, int c) { return x[c]; });
  for (std::size_t i : g->interior_nodes())
    for (double& v : coords.at(i)) v = 0.0;
  const HarmonicExtension h = harmonic_extension(coords);
  CHECK(h.residual < 1e-10);
  std::vector<double> x(3);
  double worst = 0.0;
  for (std::size_t i : g->active_nodes()) {
    g->position(i, x);
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(h.field.at(i)[k] - x[k]));
  }
  CHECK(worst < 1e-9);

  const SphereField r = random_upper_field(g, 3, 5, 0.0);
  const HarmonicExtension hr = harmonic_extension(r);
  CHECK(hr.residual < 1e-10);
  CHECK(hr.iterations > 0);
  for (int k = 0; k < 3; ++k) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i : g->boundary_nodes()) {
      lo = std::min(lo, r.at(i)[k]);
      hi = std::max(hi, r.at(i)[k]);
    }
    for (std::size_t i : g->active_nodes()) {
      CHECK(hr.field.at(i)[k] >= lo);
      CHECK(hr.field.at(i)[k] <= hi);
    }
  }
  CHECK_THROWS_AS(harmonic_extension(r, 2), NumericalError);
}

TEST_CASE("penalized versus projected comparison") {
  const GridPtr g = ball(3, 9);
  FlowConfig c = config(Scheme::Glhf, 0.02);
  const ConvergenceReport z = compare_glhf_hhf(make_constant_map(g, {0.0, 0.0, 1.0}), c, {1e2, 1e3});
  REQUIRE(z.distances.size() == 2);
  for (double d : z.distances) CHECK(d == 0.0);
  CHECK(z.non_increasing);

  const FlowTrace a = run_flow(make_cap_map(g, 1.0), c);
  const FlowTrace b = run_flow(make_cap_map(ball(3, 11), 1.0), c);
  CHECK_THROWS_AS(trace_l2_distance(a, b), ContractError);
  CHECK(trace_l2_distance(a, a) == 0.0);
}
