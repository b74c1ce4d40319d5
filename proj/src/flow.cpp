#include "sphereflow/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "sphereflow/chart.hpp"
#include "sphereflow/errors.hpp"
#include "sphereflow/parallel.hpp"

namespace sphereflow {

namespace {

double sum_inv_h2(const DomainGrid& g) {
  double s = 0.0;
  for (int a = 0; a < g.dimension(); ++a) s += 2.0 / (g.spacing(a) * g.spacing(a));
  return s;
}

// Discrete |∇u|² at an interior node: mean of the squared one-sided
// differences. Equals −u·Δ_h u when |u| = 1 at the node and its neighbours,
// which makes the projected update tangential.
double node_grad_sq(const SphereField& u, std::size_t i) {
  const DomainGrid& g = u.grid();
  const int m = u.components();
  auto ui = u.at(i);
  double s = 0.0;
  for (int a = 0; a < g.dimension(); ++a) {
    const double inv = 0.5 / (g.spacing(a) * g.spacing(a));
    auto up = u.at(i + g.stride(a));
    auto dn = u.at(i - g.stride(a));
    for (int c = 0; c < m; ++c) {
      const double p = up[c] - ui[c];
      const double q = dn[c] - ui[c];
      s += (p * p + q * q) * inv;
    }
  }
  return s;
}

void node_laplacian(const SphereField& u, std::size_t i, std::span<double> out) {
  const DomainGrid& g = u.grid();
  const int m = u.components();
  auto ui = u.at(i);
  std::fill(out.begin(), out.end(), 0.0);
  for (int a = 0; a < g.dimension(); ++a) {
    const double inv = 1.0 / (g.spacing(a) * g.spacing(a));
    auto up = u.at(i + g.stride(a));
    auto dn = u.at(i - g.stride(a));
    for (int c = 0; c < m; ++c) out[c] += (up[c] + dn[c] - 2.0 * ui[c]) * inv;
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void require_step(const FlowConfig& cfg, const SphereField& u) {
  if (!(cfg.dt > 0.0)) throw ContractError("step needs dt > 0");
  validate_cfl(cfg.dt, cfg, u.grid());
}

}  // namespace

double FlowConfig::penalty_coefficient() const {
  if (scheme == Scheme::ProjectedHhf) return 0.0;
  return std::pow(lambda, 1.0 - kappa);
}

void validate(const FlowConfig& cfg) {
  if (cfg.scheme == Scheme::Glhf) {
    if (!(cfg.lambda >= 1.0)) throw ConfigError("lambda must be >= 1, got " + fmt(cfg.lambda));
    if (!(cfg.kappa > 0.0 && cfg.kappa < 1.0))
      throw ConfigError("kappa must lie in (0,1), got " + fmt(cfg.kappa));
  }
  if (!(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0))
    throw ConfigError("cfl_safety must lie in (0,1], got " + fmt(cfg.cfl_safety));
  if (!(cfg.t_end >= 0.0) || !std::isfinite(cfg.t_end))
    throw ConfigError("t_end must be finite and >= 0");
  if (!(cfg.dt >= 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be finite and >= 0");
  if (cfg.checkpoint_stride < 1) throw ConfigError("checkpoint stride must be >= 1");
}

double diffusive_dt_bound(const FlowConfig& cfg, const DomainGrid& grid) {
  return cfg.cfl_safety / sum_inv_h2(grid);
}

double reaction_dt_bound(const FlowConfig& cfg, const DomainGrid& grid) {
  return 1.0 / (sum_inv_h2(grid) + 2.0 * cfg.penalty_coefficient());
}

double max_stable_dt(const FlowConfig& cfg, const DomainGrid& grid) {
  double dt = diffusive_dt_bound(cfg, grid);
  if (cfg.scheme == Scheme::Glhf) dt = std::min(dt, reaction_dt_bound(cfg, grid));
  return dt;
}

void validate_cfl(double dt, const FlowConfig& cfg, const DomainGrid& grid) {
  const double diff = diffusive_dt_bound(cfg, grid);
  // Relative slack so that dt = auto never trips on rounding.
  if (dt > diff * (1.0 + 1e-12))
    throw CflError("dt = " + fmt(dt) + " exceeds the diffusive CFL bound cfl_safety*h^2/(2d) = " +
                   fmt(diff));
  if (cfg.scheme == Scheme::Glhf) {
    const double react = reaction_dt_bound(cfg, grid);
    if (dt > react * (1.0 + 1e-12))
      throw CflError("dt = " + fmt(dt) +
                     " exceeds the penalized max-principle bound 1/(2d/h^2 + 2*lambda^(1-kappa)) = " +
                     fmt(react));
  }
}

SphereField glhf_step(const SphereField& u, const FlowConfig& cfg) {
  require_step(cfg, u);
  const DomainGrid& g = u.grid();
  const int m = u.components();
  const double c = cfg.penalty_coefficient();
  const double dt = cfg.dt;
  SphereField out = u;
  out.set_time(u.time() + dt);
  std::atomic<bool> bad{false};
  auto interior = g.interior_nodes();
  parallel_for(interior.size(), 4096, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> lap(m);
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t i = interior[k];
      node_laplacian(u, i, lap);
      auto ui = u.at(i);
      const double s = u.norm_sq(i) - 1.0;
      auto o = out.at(i);
      for (int q = 0; q < m; ++q) {
        o[q] = ui[q] + dt * (lap[q] - c * s * ui[q]);
        if (!std::isfinite(o[q])) bad = true;
      }
    }
  });
  if (bad) throw NumericalError("non-finite value in the penalized step at t = " + fmt(u.time()));
  return out;
}

SphereField hhf_projected_step(const SphereField& u, const FlowConfig& cfg) {
  require_step(cfg, u);
  const DomainGrid& g = u.grid();
  const int m = u.components();
  const double dt = cfg.dt;
  SphereField out = u;
  out.set_time(u.time() + dt);
  std::atomic<bool> bad{false};
  std::atomic<std::size_t> singular{DomainGrid::npos};
  auto interior = g.interior_nodes();
  parallel_for(interior.size(), 4096, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> lap(m);
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t i = interior[k];
      node_laplacian(u, i, lap);
      const double gs = node_grad_sq(u, i);
      auto ui = u.at(i);
      auto o = out.at(i);
      double n2 = 0.0;
      for (int q = 0; q < m; ++q) {
        o[q] = ui[q] + dt * (lap[q] + gs * ui[q]);
        n2 += o[q] * o[q];
      }
      if (!std::isfinite(n2)) {
        bad = true;
        continue;
      }
      const double nrm = std::sqrt(n2);
      if (nrm < 1e-8) {
        std::size_t cur = singular.load();
        while (i < cur && !singular.compare_exchange_weak(cur, i)) {
        }
        continue;
      }
      for (int q = 0; q < m; ++q) o[q] /= nrm;
    }
  });
  if (bad) throw NumericalError("non-finite value in the projected step at t = " + fmt(u.time()));
  if (singular != DomainGrid::npos) {
    auto x = g.position(singular);
    std::ostringstream os;
    os << "projection singularity at node " << singular.load() << " (x =";
    for (double v : x) os << ' ' << v;
    os << ") at t = " << u.time() << ": pre-projection norm below 1e-8";
    throw ProjectionSingularity(os.str());
  }
  return out;
}

double dirichlet_energy(const SphereField& u) {
  const DomainGrid& g = u.grid();
  const int d = g.dimension();
  const int m = u.components();
  auto active = g.active_nodes();
  return 0.5 * deterministic_sum(active.size(), [&](std::size_t k) {
    const std::size_t i = active[k];
    const bool interior_i = g.node_class(i) == NodeClass::Interior;
    auto ui = u.at(i);
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      const std::size_t j = g.neighbor(i, a, +1);
      if (j == DomainGrid::npos || !g.is_active(j)) continue;
      if (!interior_i && g.node_class(j) != NodeClass::Interior) continue;
      auto uj = u.at(j);
      double e = 0.0;
      for (int c = 0; c < m; ++c) e += (uj[c] - ui[c]) * (uj[c] - ui[c]);
      s += e * g.cell_volume() / (g.spacing(a) * g.spacing(a));
    }
    return s;
  });
}

double penalty_energy(const SphereField& u, double coefficient) {
  if (coefficient == 0.0) return 0.0;
  const DomainGrid& g = u.grid();
  auto interior = g.interior_nodes();
  const double w = g.cell_volume() * coefficient / 4.0;
  return deterministic_sum(interior.size(), [&](std::size_t k) {
    const double s = u.norm_sq(interior[k]) - 1.0;
    return w * s * s;
  });
}

double sup_norm(const SphereField& u) {
  double best = 0.0;
  for (std::size_t i : u.grid().active_nodes()) best = std::max(best, u.norm(i));
  return best;
}

double min_last_component(const SphereField& u) {
  double best = std::numeric_limits<double>::infinity();
  const int last = u.components() - 1;
  for (std::size_t i : u.grid().active_nodes()) best = std::min(best, u.at(i)[last]);
  return best;
}

namespace {

StepRecord make_record(const SphereField& u, const FlowConfig& cfg, double ut_sq) {
  StepRecord r;
  r.t = u.time();
  r.dirichlet = dirichlet_energy(u);
  r.penalty = penalty_energy(u, cfg.penalty_coefficient());
  r.sup_norm = sup_norm(u);
  r.ut_sq = ut_sq;
  r.min_last = min_last_component(u);
  if (cfg.monitor_chart) r.sup_v = chart_sup_norm(u);
  return r;
}

double increment_sq(const SphereField& a, const SphereField& b, double dt) {
  const DomainGrid& g = a.grid();
  auto interior = g.interior_nodes();
  const int m = a.components();
  const double w = g.cell_volume() / (dt * dt);
  return deterministic_sum(interior.size(), [&](std::size_t k) {
    auto p = a.at(interior[k]);
    auto q = b.at(interior[k]);
    double s = 0.0;
    for (int c = 0; c < m; ++c) s += (q[c] - p[c]) * (q[c] - p[c]);
    return w * s;
  });
}

}  // namespace

FlowTrace run_flow(const SphereField& u0, const FlowConfig& cfg_in) {
  validate(cfg_in);
  const DomainGrid& g = u0.grid();
  FlowConfig cfg = cfg_in;
  const double dt = cfg.dt > 0.0 ? cfg.dt : max_stable_dt(cfg, g);
  validate_cfl(dt, cfg, g);
  for (double v : u0.data())
    if (!std::isfinite(v)) throw NumericalError("initial data contains a non-finite value");
  if (cfg.scheme == Scheme::ProjectedHhf) {
    for (std::size_t i : g.active_nodes())
      if (std::abs(u0.norm(i) - 1.0) > 1e-12)
        throw ContractError("projected flow needs | |u0| - 1 | <= 1e-12 at every node");
  }

  FlowTrace trace;
  trace.config = cfg;
  trace.config.dt = dt;
  trace.dt = dt;
  SphereField u = u0;
  u.set_time(0.0);
  trace.checkpoints.push_back(u);
  trace.log.push_back(make_record(u, cfg, 0.0));

  const long steps = cfg.t_end > 0.0
                         ? static_cast<long>(std::ceil(cfg.t_end / dt * (1.0 - 1e-12)))
                         : 0;
  FlowConfig step_cfg = trace.config;
  for (long k = 1; k <= steps; ++k) {
    const double t_next = k == steps ? cfg.t_end : static_cast<double>(k) * dt;
    step_cfg.dt = t_next - u.time();
    SphereField next;
    try {
      next = cfg.scheme == Scheme::Glhf ? glhf_step(u, step_cfg) : hhf_projected_step(u, step_cfg);
    } catch (const NumericalError& e) {
      trace.failed = true;
      trace.failure = e.what();
      if (trace.checkpoints.back().time() != u.time()) trace.checkpoints.push_back(u);
      return trace;
    }
    next.set_time(t_next);
    const double ut = increment_sq(u, next, step_cfg.dt);
    u = std::move(next);
    trace.log.push_back(make_record(u, cfg, ut));
    if (k % cfg.checkpoint_stride == 0 || k == steps) trace.checkpoints.push_back(u);
  }
  return trace;
}

namespace {

double halton(std::size_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

double bump(double s) { return s < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

struct TestMap {
  int component = 0;
  std::vector<std::size_t> nodes;
  std::vector<double> weights;  // h^d ψ(x_i)
};

}  // namespace

double weak_residual(const FlowTrace& trace, int test_count) {
  if (test_count < 1) throw ContractError("weak residual needs test_count >= 1");
  if (trace.checkpoints.size() < 2) throw ContractError("weak residual needs >= 2 checkpoints");
  const DomainGrid& g = trace.grid();
  const int d = g.dimension();
  const int m = trace.checkpoints.front().components();
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  if (d > 10) throw ContractError("weak residual supports d <= 10");

  double min_hw = g.half_width(0);
  for (int a = 1; a < d; ++a) min_hw = std::min(min_hw, g.half_width(a));
  const double min_radius = 4.0 * g.max_spacing();

  std::vector<TestMap> tests;
  std::vector<double> c(d), x(d);
  for (std::size_t idx = 1; static_cast<int>(tests.size()) < test_count; ++idx) {
    if (idx > 100000) throw ContractError("grid too coarse to host the weak-residual test maps");
    for (int a = 0; a < d; ++a) c[a] = g.half_width(a) * (2.0 * halton(idx, kPrimes[a]) - 1.0);
    if (!g.contains(c)) continue;
    const double r = std::min(0.4 * min_hw, 0.8 * g.distance_to_boundary(c));
    if (r < min_radius) continue;
    TestMap t;
    t.component = static_cast<int>(tests.size()) % m;
    for (std::size_t i : g.interior_nodes()) {
      g.position(i, x);
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) r2 += (x[a] - c[a]) * (x[a] - c[a]);
      const double s = std::sqrt(r2) / r;
      if (s >= 1.0) continue;
      t.nodes.push_back(i);
      t.weights.push_back(g.cell_volume() * bump(s));
    }
    tests.push_back(std::move(t));
  }

  const auto& cps = trace.checkpoints;
  const std::size_t K = cps.size();
  const double ta = cps.front().time();
  const double tb = cps.back().time();
  auto time_bump = [&](double t) { return bump(std::abs(2.0 * t - ta - tb) / (tb - ta)); };

  std::vector<double> residual(tests.size(), 0.0);
  parallel_for(tests.size(), 1, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> lap(m);
    for (std::size_t j = lo; j < hi; ++j) {
      const TestMap& t = tests[j];
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const SphereField& u = cps[k];
        if (k + 1 < K) {
          const SphereField& v = cps[k + 1];
          double s = 0.0;
          for (std::size_t q = 0; q < t.nodes.size(); ++q) {
            const std::size_t i = t.nodes[q];
            s += t.weights[q] * (v.at(i)[t.component] - u.at(i)[t.component]);
          }
          acc += time_bump(0.5 * (u.time() + v.time())) * s;
        }
        const double tl = k > 0 ? cps[k - 1].time() : u.time();
        const double tr = k + 1 < K ? cps[k + 1].time() : u.time();
        const double w = 0.5 * (tr - tl) * time_bump(u.time());
        if (w == 0.0) continue;
        // ⟨∇u,∇φ⟩ − ⟨u,φ⟩|∇u|² summed by parts to −⟨Δu + |∇u|²u, φ⟩.
        double s = 0.0;
        for (std::size_t q = 0; q < t.nodes.size(); ++q) {
          const std::size_t i = t.nodes[q];
          node_laplacian(u, i, lap);
          s += t.weights[q] * (lap[t.component] + node_grad_sq(u, i) * u.at(i)[t.component]);
        }
        acc -= w * s;
      }
      residual[j] = std::abs(acc);
    }
  });
  return *std::max_element(residual.begin(), residual.end());
}

EnergyCheckReport global_energy_check(const FlowTrace& trace, double c_bound) {
  EnergyCheckReport rep;
  rep.c_bound = c_bound;
  const auto& log = trace.log;
  if (log.empty()) return rep;
  rep.initial_energy = log.front().dirichlet + log.front().penalty;
  // F_k = E(t_k) + ∫_0^{t_k}∫|∂ₜu|²; the worst pair maximizes F_j − min_{i<j} F_i.
  double work = 0.0;
  double min_f = rep.initial_energy;
  std::size_t argmin = 0;
  rep.max_excess = 0.0;
  for (std::size_t k = 1; k < log.size(); ++k) {
    work += log[k].ut_sq * (log[k].t - log[k - 1].t);
    const double f = log[k].dirichlet + log[k].penalty + work;
    if (f - min_f > rep.max_excess) {
      rep.max_excess = f - min_f;
      rep.worst_t1 = argmin;
      rep.worst_t2 = k;
    }
    if (f < min_f) {
      min_f = f;
      argmin = k;
    }
  }
  const double h = trace.grid().max_spacing();
  const double T = log.back().t - log.front().t;
  const double scale = (trace.dt + h * h) * T;
  const double excess = std::max(0.0, rep.max_excess - 1e-6 * rep.initial_energy);
  rep.fitted_C = scale > 0.0 ? excess / scale : (excess > 0.0 ? INFINITY : 0.0);
  rep.holds = rep.fitted_C <= c_bound * std::max(rep.initial_energy, 1e-300) ||
              excess == 0.0;
  return rep;
}

}  // namespace sphereflow
