#include <cmath>
#include <string>

#include "doctest.h"
#include "sphereflow/errors.hpp"
#include "sphereflow/harness.hpp"
#include "sphereflow/parallel.hpp"
#include "support.hpp"

using namespace testing;

namespace {

SphereField rotate(const SphereField& u, const double (&Q)[3][3]) {
  SphereField out = u;
  for (std::size_t i : u.grid().active_nodes())
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += Q[r][c] * u.at(i)[c];
      out.at(i)[r] = s;
    }
  return out;
}

// Rotation about the axis (1,2,2)/3 by 0.7 rad, by the Rodrigues formula.
void rotation(double (&Q)[3][3]) {
  const double k[3] = {1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0};
  const double a = 0.7, c = std::cos(a), s = std::sin(a);
  const double K[3][3] = {{0, -k[2], k[1]}, {k[2], 0, -k[0]}, {-k[1], k[0], 0}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) Q[i][j] = (i == j ? c : 0.0) + s * K[i][j] + (1 - c) * k[i] * k[j];
}

}  // namespace

TEST_CASE("flow configuration validation") {
  FlowConfig c;
  c.lambda = 0.5;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = FlowConfig{};
  c.kappa = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = FlowConfig{};
  c.cfl_safety = 1.5;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = FlowConfig{};
  c.checkpoint_stride = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = FlowConfig{};
  CHECK(c.penalty_coefficient() == doctest::Approx(std::sqrt(1e3)));
  c.scheme = Scheme::ProjectedHhf;
  CHECK(c.penalty_coefficient() == 0.0);
}

TEST_CASE("step sizes above the stability bounds are refused") {
  const GridPtr g = ball(3, 17);
  const double h = g->max_spacing();
  FlowConfig c = config(Scheme::Glhf, 0.01);
  CHECK(diffusive_dt_bound(c, *g) == doctest::Approx(0.9 * h * h / 6.0));
  CHECK(reaction_dt_bound(c, *g) < diffusive_dt_bound(c, *g) / 0.9);
  c.dt = h * h;
  try {
    validate_cfl(c.dt, c, *g);
    FAIL("expected CflError");
  } catch (const CflError& e) {
    CHECK(std::string(e.what()).find("diffusive") != std::string::npos);
  }
  CHECK_THROWS_AS(run_flow(make_cap_map(g, 1.0), c), CflError);
  c.dt = 0.0;
  CHECK(max_stable_dt(c, *g) <= diffusive_dt_bound(c, *g));
  CHECK_NOTHROW(validate_cfl(max_stable_dt(c, *g), c, *g));
}

TEST_CASE("constant unit map is a fixed point of both steps") {
  const GridPtr g = ball(3, 9);
  const SphereField u = make_constant_map(g, {0.6, 0.0, 0.8});
  for (Scheme s : {Scheme::Glhf, Scheme::ProjectedHhf}) {
    FlowConfig c = config(s, 0.0);
    c.dt = max_stable_dt(c, *g);
    const SphereField v = s == Scheme::Glhf ? glhf_step(u, c) : hhf_projected_step(u, c);
    CHECK(max_abs_diff(u, v) < 1e-15);
  }
}

TEST_CASE("penalized step on a short constant vector") {
  const GridPtr g = ball(3, 9);
  const SphereField u = make_constant_map(g, {0.0, 0.0, 0.5});
  FlowConfig c = config(Scheme::Glhf, 0.0, 100.0);
  c.dt = 1e-4;
  const SphereField v = glhf_step(u, c);
  for (std::size_t i : g->interior_nodes()) CHECK(v.at(i)[2] - 0.5 == doctest::Approx(3.75e-4).epsilon(1e-9));
  for (std::size_t i : g->boundary_nodes()) CHECK(v.at(i)[2] == 0.5);
}

TEST_CASE("projected step keeps unit norms") {
  const GridPtr g = ball(3, 17);
  const SphereField u = random_upper_field(g, 3, 9);
  FlowConfig c = config(Scheme::ProjectedHhf, 0.0);
  c.dt = max_stable_dt(c, *g);
  const SphereField v = hhf_projected_step(u, c);
  for (std::size_t i : g->active_nodes()) CHECK(std::abs(v.norm(i) - 1.0) <= 1e-15);
}

TEST_CASE("run_flow with zero horizon keeps only the initial data") {
  const GridPtr g = ball(3, 9);
  const FlowTrace tr = run_flow(make_cap_map(g, 1.0), config(Scheme::Glhf, 0.0));
  CHECK(tr.checkpoints.size() == 1);
  CHECK(tr.log.size() == 1);
  CHECK(tr.end_time() == 0.0);
}

TEST_CASE("constant map logs zero energies") {
  const GridPtr g = ball(3, 9);
  const FlowTrace tr = run_flow(make_constant_map(g, {0.0, 1.0, 0.0}), config(Scheme::Glhf, 0.01));
  for (const StepRecord& r : tr.log) {
    CHECK(r.dirichlet == 0.0);
    CHECK(r.penalty == 0.0);
    CHECK(r.ut_sq == 0.0);
  }
}

TEST_CASE("penalized energy is non-increasing on the smoothed equator") {
  const GridPtr g = ball(3, 17);
  const FlowTrace tr = run_flow(make_smoothed_equator(g, 0.25), config(Scheme::Glhf, 0.05));
  REQUIRE(!tr.failed);
  for (std::size_t k = 1; k < tr.log.size(); ++k) {
    const double e0 = tr.log[k - 1].dirichlet + tr.log[k - 1].penalty;
    const double e1 = tr.log[k].dirichlet + tr.log[k].penalty;
    CHECK(e1 <= e0 + 1e-8);
  }
}

TEST_CASE("flow invariants: maximum principle, sphere constraint, pinned boundary") {
  const GridPtr g = ball(3, 17);
  const SphereField cap = make_cap_map(g, 1.0);
  FlowConfig c = config(Scheme::Glhf, 0.05, 1e4);
  const FlowTrace a = run_flow(make_smoothed_equator(g, 0.2), c);
  for (const StepRecord& r : a.log) CHECK(r.sup_norm <= 1.0 + 1e-9);
  c.scheme = Scheme::ProjectedHhf;
  const FlowTrace b = run_flow(cap, c);
  for (const SphereField& u : b.checkpoints)
    for (std::size_t i : g->active_nodes()) CHECK(std::abs(u.norm(i) - 1.0) <= 1e-15);
  for (const FlowTrace* tr : {&a, &b})
    for (const SphereField& u : tr->checkpoints)
      for (std::size_t i : g->boundary_nodes())
        for (int k = 0; k < 3; ++k) CHECK(u.at(i)[k] == tr->checkpoints.front().at(i)[k]);
}

TEST_CASE("non-unit data is refused by the projected flow") {
  const GridPtr g = ball(3, 9);
  CHECK_THROWS_AS(run_flow(make_smoothed_equator(g, 0.3), config(Scheme::ProjectedHhf, 0.01)), ContractError);
}

TEST_CASE("both schemes commute with rotations of the target") {
  double Q[3][3];
  rotation(Q);
  const GridPtr g = ball(3, 17);
  const SphereField u0 = make_cap_map(g, 1.0);
  for (Scheme s : {Scheme::Glhf, Scheme::ProjectedHhf}) {
    FlowConfig c = config(s, 0.02);
    const FlowTrace a = run_flow(rotate(u0, Q), c);
    const FlowTrace b = run_flow(u0, c);
    CHECK(max_abs_diff(a.checkpoints.back(), rotate(b.checkpoints.back(), Q)) < 1e-12);
  }
}

TEST_CASE("projected flow follows the scalar heat equation on great circles") {
  auto error = [](int n) {
    const GridPtr g = box(3, n);
    const GreatCircle gc;
    FlowConfig c = config(Scheme::ProjectedHhf, 0.05);
    c.cfl_safety = 0.5;
    const FlowTrace tr = run_flow(gc.field(g, 0.0), c);
    return max_abs_diff(tr.checkpoints.back(), gc.field(g, tr.end_time()));
  };
  const double e9 = error(9), e17 = error(17);
  CHECK(e17 < 1e-3);
  CHECK(std::log2(e9 / e17) >= 1.8);
}

TEST_CASE("weak residual") {
  const GridPtr g = box(2, 33);
  const FlowTrace flat = run_flow(make_constant_map(g, {0.0, 0.0, 1.0}), config(Scheme::ProjectedHhf, 0.02));
  CHECK(weak_residual(flat, 8) <= 1e-14);
  const FlowTrace single = run_flow(make_constant_map(g, {0.0, 0.0, 1.0}), config(Scheme::ProjectedHhf, 0.0));
  CHECK_THROWS_AS(weak_residual(single, 8), ContractError);

  // h halves and dt quarters (dt ∝ h²): the residual drops by about 4.
  auto residual = [](int n) {
    const GridPtr b = box(2, n);
    FlowConfig c = config(Scheme::ProjectedHhf, 0.05);
    c.cfl_safety = 0.5;
    return weak_residual(run_flow(GreatCircle{}.field(b, 0.0), c), 8);
  };
  const double r33 = residual(33), r65 = residual(65);
  MESSAGE("weak residual n=33 ", r33, " n=65 ", r65);
  CHECK(r33 / r65 > 3.0);
  CHECK(r33 / r65 < 5.5);
}

TEST_CASE("global energy inequality") {
  const GridPtr g = ball(3, 17);
  const FlowTrace flat = run_flow(make_constant_map(g, {0.0, 0.0, 1.0}), config(Scheme::Glhf, 0.01));
  CHECK(global_energy_check(flat).holds);
  CHECK(global_energy_check(flat).max_excess == 0.0);

  FlowConfig c = config(Scheme::Glhf, 0.1);
  FlowTrace cap = run_flow(make_cap_map(g, kPi / 3.0), c);
  const EnergyCheckReport ok = global_energy_check(cap);
  MESSAGE("cap fitted C ", ok.fitted_C, " E0 ", ok.initial_energy);
  CHECK(ok.holds);

  // Energy injected halfway through the log.
  for (std::size_t k = cap.log.size() / 2; k < cap.log.size(); ++k) cap.log[k].dirichlet += 0.5 * ok.initial_energy;
  const EnergyCheckReport bad = global_energy_check(cap);
  CHECK_FALSE(bad.holds);
  CHECK(bad.max_excess > 0.49 * ok.initial_energy);
}

TEST_CASE("energy functionals") {
  const GridPtr g = box(3, 9);
  const SphereField lin = field_from(g, 1, [](auto x, int) { return 2.0 * x[0]; });
  // Edges with an interior endpoint cover [-1,1]² × [-1,1] less the outer face strips.
  const double h = g->spacing(0);
  const double edges = 7.0 * 7.0 * 8.0;
  CHECK(dirichlet_energy(lin) == doctest::Approx(0.5 * edges * 4.0 * h * h * h).epsilon(1e-12));
  const SphereField half = make_constant_map(g, {0.0, 0.5});
  CHECK(penalty_energy(half, 10.0) == doctest::Approx(7 * 7 * 7 * h * h * h * 10.0 / 4.0 * 0.5625));
  CHECK(sup_norm(half) == 0.5);
  CHECK(min_last_component(half) == 0.5);
}

TEST_CASE("stepping is bit-identical across thread counts") {
  const GridPtr g = ball(3, 17);
  const SphereField u0 = make_smoothed_equator(g, 0.25);
  set_thread_count(1);
  const FlowTrace a = run_flow(u0, config(Scheme::Glhf, 0.02));
  set_thread_count(3);
  const FlowTrace b = run_flow(u0, config(Scheme::Glhf, 0.02));
  set_thread_count(1);
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (std::size_t k = 0; k < a.checkpoints.size(); ++k)
    CHECK(std::equal(a.checkpoints[k].data().begin(), a.checkpoints[k].data().end(),
                     b.checkpoints[k].data().begin()));
  for (std::size_t k = 0; k < a.log.size(); ++k) {
    CHECK(a.log[k].dirichlet == b.log[k].dirichlet);
    CHECK(a.log[k].ut_sq == b.log[k].ut_sq);
  }
}
