#include <algorithm>
#include <cmath>
#include <sstream>

#include "sphereflow/errors.hpp"
#include "sphereflow/harness.hpp"
#include "sphereflow/parallel.hpp"

namespace sphereflow {

namespace {

constexpr double kTarget = 1e-11;
constexpr double kAccept = 1e-10;

struct Stencil {
  std::vector<std::size_t> nodes;    // interior nodes, unknown order
  std::vector<long> nbr;             // 2d per unknown; -1 for a boundary neighbour
  std::vector<std::size_t> nbr_node; // 2d per unknown, grid node index
  std::vector<double> inv_h2;        // per axis
  double diag = 0.0;
  int d = 0;
};

Stencil build_stencil(const DomainGrid& g) {
  Stencil s;
  s.d = g.dimension();
  s.nodes.assign(g.interior_nodes().begin(), g.interior_nodes().end());
  std::vector<long> index(g.node_count(), -1);
  for (std::size_t k = 0; k < s.nodes.size(); ++k) index[s.nodes[k]] = static_cast<long>(k);
  for (int a = 0; a < s.d; ++a) {
    s.inv_h2.push_back(1.0 / (g.spacing(a) * g.spacing(a)));
    s.diag += 2.0 * s.inv_h2.back();
  }
  s.nbr.resize(s.nodes.size() * 2 * s.d);
  s.nbr_node.resize(s.nodes.size() * 2 * s.d);
  for (std::size_t k = 0; k < s.nodes.size(); ++k) {
    for (int a = 0; a < s.d; ++a) {
      for (int side = 0; side < 2; ++side) {
        const std::size_t j = side ? s.nodes[k] + g.stride(a) : s.nodes[k] - g.stride(a);
        s.nbr[k * 2 * s.d + 2 * a + side] = index[j];
        s.nbr_node[k * 2 * s.d + 2 * a + side] = j;
      }
    }
  }
  return s;
}

void apply(const Stencil& s, const std::vector<double>& x, std::vector<double>& y) {
  parallel_for(s.nodes.size(), 4096, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      double v = s.diag * x[k];
      for (int a = 0; a < s.d; ++a)
        for (int side = 0; side < 2; ++side) {
          const long j = s.nbr[k * 2 * s.d + 2 * a + side];
          if (j >= 0) v -= s.inv_h2[a] * x[j];
        }
      y[k] = v;
    }
  });
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return deterministic_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

HarmonicExtension harmonic_extension(const SphereField& u0, long max_iterations) {
  const DomainGrid& g = u0.grid();
  const int m = u0.components();
  const Stencil s = build_stencil(g);
  const std::size_t N = s.nodes.size();
  HarmonicExtension out{u0, 0.0, 0, {}};
  if (N == 0) return out;

  std::vector<double> lo(m, INFINITY), hi(m, -INFINITY);
  for (std::size_t i : g.boundary_nodes()) {
    for (int c = 0; c < m; ++c) {
      lo[c] = std::min(lo[c], u0.at(i)[c]);
      hi[c] = std::max(hi[c], u0.at(i)[c]);
    }
  }

  std::vector<double> b(N), x(N), r(N), p(N), q(N);
  for (int c = 0; c < m; ++c) {
    for (std::size_t k = 0; k < N; ++k) {
      double v = 0.0;
      for (int a = 0; a < s.d; ++a)
        for (int side = 0; side < 2; ++side)
          if (s.nbr[k * 2 * s.d + 2 * a + side] < 0)
            v += s.inv_h2[a] * u0.at(s.nbr_node[k * 2 * s.d + 2 * a + side])[c];
      b[k] = v;
      x[k] = 0.5 * (lo[c] + hi[c]);
    }
    auto true_residual = [&] {
      apply(s, x, q);
      for (std::size_t k = 0; k < N; ++k) r[k] = b[k] - q[k];
      return max_abs(r);
    };
    double res = true_residual();
    out.history.push_back(res);
    while (res >= kTarget) {
      // Restarted CG; the restart refreshes the recursively updated residual.
      p = r;
      double rr = dot(r, r);
      for (int it = 0; it < 200 && rr > 0.0; ++it) {
        if (out.iterations >= max_iterations) {
          std::ostringstream os;
          os << "harmonic extension did not converge within " << max_iterations
             << " iterations; residual history:";
          const std::size_t first = out.history.size() > 10 ? out.history.size() - 10 : 0;
          for (std::size_t k = first; k < out.history.size(); ++k) os << ' ' << out.history[k];
          throw NumericalError(os.str());
        }
        ++out.iterations;
        apply(s, p, q);
        const double alpha = rr / dot(p, q);
        for (std::size_t k = 0; k < N; ++k) {
          x[k] += alpha * p[k];
          r[k] -= alpha * q[k];
        }
        const double rr_new = dot(r, r);
        if (max_abs(r) < 0.1 * kTarget) break;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < N; ++k) p[k] = r[k] + beta * p[k];
      }
      const double prev = res;
      res = true_residual();
      out.history.push_back(res);
      // Rounding floor: further restarts cannot help.
      if (res >= kTarget && res > 0.5 * prev && res < kAccept) break;
    }
    for (std::size_t k = 0; k < N; ++k) out.field.at(s.nodes[k])[c] = std::clamp(x[k], lo[c], hi[c]);
  }

  // Residual certificate of the clamped field.
  double worst = 0.0;
  SphereField lap = laplacian(out.field);
  for (std::size_t i : s.nodes)
    for (double v : lap.at(i)) worst = std::max(worst, std::abs(v));
  out.residual = worst;
  if (worst >= kAccept) {
    std::ostringstream os;
    os << "harmonic extension residual " << worst << " above " << kAccept;
    throw NumericalError(os.str());
  }
  return out;
}

}  // namespace sphereflow
