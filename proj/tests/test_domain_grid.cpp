#include <cmath>
#include <random>

#include "doctest.h"
#include "sphereflow/errors.hpp"
#include "sphereflow/harness.hpp"
#include "sphereflow/parallel.hpp"
#include "sphereflow/sampling.hpp"
#include "support.hpp"

using namespace testing;

TEST_CASE("grid validation rejects unusable specs") {
  DomainSpec s;
  s.resolution = 6;
  CHECK_THROWS_AS(build_grid(s), ConfigError);
  s.resolution = 3;
  CHECK_THROWS_AS(build_grid(s), ConfigError);
  s.resolution = 5;
  s.dimension = 1;
  CHECK_THROWS_AS(build_grid(s), ConfigError);
  s.dimension = 2;
  s.shape = Shape::Box;
  s.half_widths = {1.0};
  CHECK_THROWS_AS(build_grid(s), ConfigError);
  s.half_widths = {1.0, -1.0};
  CHECK_THROWS_AS(build_grid(s), ConfigError);
}

TEST_CASE("5x5 box has 9 interior and 16 boundary nodes") {
  const GridPtr g = box(2, 5);
  CHECK(g->interior_nodes().size() == 9);
  CHECK(g->boundary_nodes().size() == 16);
  CHECK(g->active_nodes().size() == 25);
}

TEST_CASE("ball origin is an interior node") {
  const GridPtr g = ball(3, 5);
  const std::size_t o = origin_node(*g);
  CHECK(g->node_class(o) == NodeClass::Interior);
  for (int a = 0; a < 3; ++a) CHECK(g->coordinate(o, a) == 0.0);
}

TEST_CASE("ball interior count matches a direct point-in-ball scan") {
  const int n = 33;
  const GridPtr g = ball(3, n);
  std::size_t count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x = -1.0 + 2.0 * i / (n - 1), y = -1.0 + 2.0 * j / (n - 1),
                     z = -1.0 + 2.0 * k / (n - 1);
        if (x * x + y * y + z * z < 1.0) ++count;
      }
  CHECK(g->interior_nodes().size() == count);
}

TEST_CASE("node classes satisfy the stencil invariants") {
  for (const GridPtr& g : {ball(3, 17), ball(2, 33), box(3, 9)}) {
    const double h = g->max_spacing();
    for (std::size_t i : g->interior_nodes())
      for (int a = 0; a < g->dimension(); ++a)
        for (int dir : {-1, 1}) {
          const std::size_t j = g->neighbor(i, a, dir);
          REQUIRE(j != DomainGrid::npos);
          CHECK(g->is_active(j));
        }
    for (std::size_t i : g->boundary_nodes()) {
      const auto x = g->position(i);
      CHECK(g->distance_to_boundary(x) <= h + 1e-12);
    }
  }
}

TEST_CASE("lattice is symmetric under reflection") {
  const GridPtr g = ball(3, 17);
  for (std::size_t i : g->active_nodes()) {
    auto x = g->position(i);
    for (double& c : x) c = -c;
    const std::size_t j = g->nearest_node(x);
    const auto y = g->position(j);
    for (int a = 0; a < 3; ++a) CHECK(y[a] == x[a]);
    CHECK(g->node_class(j) == g->node_class(i));
  }
}

TEST_CASE("laplacian of a constant vanishes") {
  const GridPtr g = ball(3, 9);
  const SphereField u = field_from(g, 3, [](auto, int c) { return 0.3 * (c + 1); });
  const SphereField L = laplacian(u);
  for (std::size_t i : g->active_nodes())
    for (int c = 0; c < 3; ++c) CHECK(L.at(i)[c] == 0.0);
}

TEST_CASE("laplacian is exact on quadratics") {
  const GridPtr g = ball(3, 17);
  const SphereField f = field_from(g, 1, [](auto x, int) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; });
  const SphereField L = laplacian(f);
  for (std::size_t i : g->interior_nodes()) CHECK(L.at(i)[0] == doctest::Approx(6.0).epsilon(1e-12));
  // Degree ≤ 2 in each variable separately.
  const GridPtr b = box(3, 9, 0.7);
  const SphereField p = field_from(b, 1, [](auto x, int) {
    return x[0] * x[0] * x[1] * x[1] + 3.0 * x[0] * x[1] * x[2] - x[2] * x[2];
  });
  const SphereField Lp = laplacian(p);
  for (std::size_t i : b->interior_nodes()) {
    const auto x = b->position(i);
    const double exact = 2.0 * x[1] * x[1] + 2.0 * x[0] * x[0] - 2.0;
    CHECK(std::abs(Lp.at(i)[0] - exact) < 1e-12);
  }
}

TEST_CASE("laplacian matches a direct summation stencil on random data") {
  const GridPtr g = box(3, 5, 1.3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  SphereField u(g, 2);
  for (double& v : u.data()) v = U(rng);
  const SphereField L = laplacian(u);
  const int n = 5;
  const double h = 2.6 / (n - 1);
  auto at = [&](int i, int j, int k, int c) { return u.data()[((i * n + j) * n + k) * 2 + c]; };
  for (int i = 1; i < n - 1; ++i)
    for (int j = 1; j < n - 1; ++j)
      for (int k = 1; k < n - 1; ++k)
        for (int c = 0; c < 2; ++c) {
          const double direct = (at(i + 1, j, k, c) + at(i - 1, j, k, c) + at(i, j + 1, k, c) +
                                 at(i, j - 1, k, c) + at(i, j, k + 1, c) + at(i, j, k - 1, c) -
                                 6.0 * at(i, j, k, c)) /
                                (h * h);
          CHECK(std::abs(L.data()[((i * n + j) * n + k) * 2 + c] - direct) < 1e-13 * (1.0 + std::abs(direct)));
        }
}

TEST_CASE("laplacian converges at second order") {
  auto error = [](int n) {
    const GridPtr g = box(3, n);
    const SphereField f = field_from(g, 1, [](auto x, int) {
      return std::sin(kPi * x[0]) * std::sin(kPi * x[1]) * std::sin(kPi * x[2]);
    });
    const SphereField L = laplacian(f);
    double e = 0.0;
    for (std::size_t i : g->interior_nodes()) e = std::max(e, std::abs(L.at(i)[0] + 3.0 * kPi * kPi * f.at(i)[0]));
    return e;
  };
  const double ratio = error(17) / error(33);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("gradient_norm_sq is exact on affine fields and zero on constants") {
  const GridPtr g = ball(3, 17);
  const SphereField c = field_from(g, 2, [](auto, int k) { return 0.5 + k; });
  const ScalarField gc = gradient_norm_sq(c);
  for (std::size_t i : g->active_nodes()) CHECK(gc[i] == 0.0);
  const SphereField a = field_from(g, 1, [](auto x, int) { return 1.5 * x[0] - 2.0 * x[1] + 0.5 * x[2] + 0.1; });
  const ScalarField ga = gradient_norm_sq(a);
  for (std::size_t i : g->active_nodes()) CHECK(ga[i] == doctest::Approx(6.5).epsilon(1e-12));
}

TEST_CASE("gradient of the equator map approaches 2/|x|^2") {
  auto worst = [](int n) {
    const GridPtr g = ball(3, n);
    const ScalarField e = gradient_norm_sq(make_equator_map(g));
    double w = 0.0;
    for (std::size_t i : g->interior_nodes()) {
      const double r = radius(g->position(i));
      if (r >= 0.25 && r <= 0.75) w = std::max(w, std::abs(e[i] * r * r / 2.0 - 1.0));
    }
    return w;
  };
  const double e33 = worst(33), e65 = worst(65);
  CHECK(e65 < 0.05);
  CHECK(e33 / e65 > 3.0);
}

TEST_CASE("node quadrature volumes") {
  {
    const GridPtr g = box(3, 17);
    ScalarField one(g);
    for (std::size_t i : g->active_nodes()) one[i] = 1.0;
    CHECK(integrate(one) == doctest::Approx(8.0).epsilon(2.0 * g->max_spacing()));
  }
  double previous = INFINITY;
  for (int n : {17, 33, 65}) {
    const GridPtr g = ball(3, n);
    ScalarField one(g);
    for (std::size_t i : g->active_nodes()) one[i] = 1.0;
    const double err = std::abs(integrate(one) - 4.0 * kPi / 3.0);
    if (n == 65) CHECK(err / (4.0 * kPi / 3.0) < 0.01);
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("node quadrature of 2/|x|^2 over a ball") {
  const GridPtr g = ball(3, 65);
  ScalarField f(g);
  for (std::size_t i : g->active_nodes()) {
    const double r = radius(g->position(i));
    f[i] = r > 0.0 ? 2.0 / (r * r) : 0.0;
  }
  // The origin carries the mean of 2/|x|² over its dual cell, by a fine
  // midpoint rule on the unit cube (the mean scales as 1/h²).
  const int m = 200;
  double mean = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        const double x = (i + 0.5) / m - 0.5, y = (j + 0.5) / m - 0.5, z = (k + 0.5) / m - 0.5;
        mean += 2.0 / (x * x + y * y + z * z);
      }
  mean /= double(m) * m * m;
  const double h = g->spacing(0);
  f[origin_node(*g)] = mean / (h * h);
  const double got = integrate(f, Region::ball({0.0, 0.0, 0.0}, 0.5));
  CHECK(got == doctest::Approx(8.0 * kPi * 0.5).epsilon(0.03));
  CHECK_THROWS_AS(integrate(f, Region::ball({5.0, 5.0, 5.0}, 0.1)), ContractError);
}

TEST_CASE("sub-cell quadrature error decreases with resolution") {
  double previous_volume = INFINITY, previous_energy = INFINITY;
  for (int n : {17, 33, 65}) {
    const GridPtr g = ball(3, n);
    const SphereField u = make_equator_map(g);
    SphereField one(g, 1);
    for (std::size_t i : g->active_nodes()) one.at(i)[0] = 1.0;
    const SampledScalar s = sample_scalar(one, 2, Reconstruction::Linear, [](const CellSample& c) { return c.value[0]; });
    const double vol_err = std::abs(s.volume(Region::whole()) / (4.0 * kPi / 3.0) - 1.0);
    const double energy =
        gradient_energy(u, Region::ball({0.0, 0.0, 0.0}, 0.5), 2, choose_reconstruction(u));
    const double energy_err = std::abs(energy / (8.0 * kPi * 0.5) - 1.0);
    CHECK(vol_err < previous_volume);
    CHECK(energy_err < previous_energy);
    previous_volume = vol_err;
    previous_energy = energy_err;
  }
  CHECK(previous_volume < 0.01);
  CHECK(previous_energy < 0.02);
}

TEST_CASE("polar reconstruction is chosen only for unit fields") {
  const GridPtr g = ball(3, 9);
  CHECK(choose_reconstruction(make_equator_map(g)) == Reconstruction::Polar);
  CHECK(choose_reconstruction(make_smoothed_equator(g, 0.3)) == Reconstruction::Linear);
}

TEST_CASE("fields on different grids are rejected") {
  CHECK_NOTHROW(require_same_grid(*ball(3, 9), *ball(3, 9)));
  CHECK_THROWS_AS(require_same_grid(*ball(3, 9), *ball(3, 11)), ContractError);
  CHECK_THROWS_AS(require_same_grid(*ball(3, 9), *box(3, 9)), ContractError);
}

TEST_CASE("reductions are bit-identical across thread counts") {
  std::vector<double> values(100003);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (double& v : values) v = U(rng) * std::pow(10.0, 8.0 * U(rng));
  auto term = [&](std::size_t i) { return values[i]; };
  set_thread_count(1);
  const double one = deterministic_sum(values.size(), term);
  const GridPtr g = ball(3, 33);
  const SphereField u = make_equator_map(g);
  const SphereField L1 = laplacian(u);
  const double e1 = integrate(gradient_norm_sq(u));
  set_thread_count(4);
  const double four = deterministic_sum(values.size(), term);
  const SphereField L4 = laplacian(u);
  const double e4 = integrate(gradient_norm_sq(u));
  set_thread_count(1);
  CHECK(one == four);
  CHECK(e1 == e4);
  CHECK(std::equal(L1.data().begin(), L1.data().end(), L4.data().begin()));
  CHECK(pairwise_sum(values) == pairwise_sum(values));
}
