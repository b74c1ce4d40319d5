#include "sphereflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sphereflow/errors.hpp"
#include "sphereflow/parallel.hpp"

namespace sphereflow {

namespace {

double grad_sq(const CellSample& s) {
  double e = 0.0;
  for (double v : s.grad) e += v * v;
  return e;
}

double value_sq(const CellSample& s) {
  double e = 0.0;
  for (double v : s.value) e += v * v;
  return e;
}

SampledScalar sample(const SphereField& u, int sub, const SampleIntegrand& f,
                     std::span<const SphereField* const> aux = {}) {
  return sample_scalar(u, sub, choose_reconstruction(u), f, aux);
}

void require_anchor_dim(const DomainGrid& g, const std::vector<double>& x0) {
  if (static_cast<int>(x0.size()) != g.dimension())
    throw ContractError("anchor has " + std::to_string(x0.size()) + " coordinates, domain has d = " +
                        std::to_string(g.dimension()));
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

double PenaltyParams::coefficient() const {
  if (scheme == Scheme::ProjectedHhf) return 0.0;
  if (!(lambda >= 1.0)) throw ConfigError("lambda must be >= 1, got " + num(lambda));
  return std::pow(lambda, 1.0 - kappa);
}

EnergyDensityField energy_density(const SphereField& u, const PenaltyParams& p) {
  const double c = p.coefficient();
  EnergyDensityField e{u.grid_ptr(), u.time(), std::vector<double>(u.grid().node_count(), 0.0)};
  ScalarField gs = gradient_norm_sq(u);
  for (std::size_t i : u.grid().active_nodes()) {
    const double s = u.norm_sq(i) - 1.0;
    e.values[i] = 0.5 * gs[i] + 0.25 * c * s * s;
  }
  return e;
}

std::vector<TimeCell> time_cells(const FlowTrace& trace, double a, double b) {
  std::vector<TimeCell> out;
  const auto& cps = trace.checkpoints;
  const std::size_t K = cps.size();
  if (K == 0 || !(b > a)) return out;
  for (std::size_t k = 0; k < K; ++k) {
    double lo, hi;
    if (K == 1) {
      lo = cps[0].time();
      hi = lo + trace.dt;
    } else {
      lo = k == 0 ? cps[0].time() : 0.5 * (cps[k - 1].time() + cps[k].time());
      hi = k + 1 == K ? cps[k].time() : 0.5 * (cps[k].time() + cps[k + 1].time());
    }
    const double l = std::max(lo, a);
    const double r = std::min(hi, b);
    if (r > l) out.push_back({k, r - l, 0.5 * (l + r)});
  }
  return out;
}

double penalty_integral(const FlowTrace& trace, const PenaltyParams& p, int subdivisions) {
  const double c = p.coefficient();
  if (c == 0.0 || trace.checkpoints.empty()) return 0.0;
  auto cells = time_cells(trace, -std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity());
  double total = 0.0;
  for (const TimeCell& cell : cells) {
    auto s = sample(trace.checkpoints[cell.slice], subdivisions, [c](const CellSample& cs) {
      const double q = value_sq(cs) - 1.0;
      return c * q * q;
    });
    total += cell.weight * s.sum(Region::whole());
  }
  return total;
}

BackwardKernel::BackwardKernel(double t0, std::vector<double> x0) : t0_(t0), x0_(std::move(x0)) {}

double BackwardKernel::operator()(double t, std::span<const double> x) const {
  if (!(t < t0_))
    throw KernelDomainError("backward kernel evaluated at t = " + num(t) + " >= t0 = " + num(t0_));
  const double s = t0_ - t;
  double r2 = 0.0;
  for (std::size_t a = 0; a < x0_.size(); ++a) r2 += (x[a] - x0_[a]) * (x[a] - x0_[a]);
  const double d = static_cast<double>(x0_.size());
  return std::pow(4.0 * std::numbers::pi * s, -0.5 * d) * std::exp(-r2 / (4.0 * s));
}

double kernel_weighted_integral(const SampledScalar& e, const BackwardKernel& kernel, double t) {
  if (!(t < kernel.t0()))
    throw KernelDomainError("kernel-weighted integral needs t < t0, got t = " + num(t) +
                            ", t0 = " + num(kernel.t0()));
  return e.weighted_sum([&](std::span<const double> x) { return kernel(t, x); });
}

SampledScalar sampled_energy_density(const SphereField& u, const PenaltyParams& p, int subdivisions) {
  const double c = p.coefficient();
  return sample(u, subdivisions, [c](const CellSample& cs) {
    const double q = value_sq(cs) - 1.0;
    return 0.5 * grad_sq(cs) + 0.25 * c * q * q;
  });
}

double kernel_weighted_energy(const SphereField& u, const BackwardKernel& kernel, double t,
                              const PenaltyParams& p, int subdivisions) {
  if (!(t < kernel.t0()))
    throw KernelDomainError("kernel-weighted energy needs t < t0, got t = " + num(t) +
                            ", t0 = " + num(kernel.t0()));
  require_anchor_dim(u.grid(), kernel.x0());
  return kernel_weighted_integral(sampled_energy_density(u, p, subdivisions), kernel, t);
}

SphereField time_derivative(const FlowTrace& trace, std::size_t k) {
  const auto& cps = trace.checkpoints;
  if (cps.size() < 2) throw ContractError("time derivative needs >= 2 checkpoints");
  const std::size_t a = k == 0 ? 0 : k - 1;
  const std::size_t b = k + 1 == cps.size() ? k : k + 1;
  const double dt = cps[b].time() - cps[a].time();
  SphereField out(cps[k].grid_ptr(), cps[k].components(), cps[k].time());
  auto p = cps[a].data();
  auto q = cps[b].data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (q[i] - p[i]) / dt;
  return out;
}

MonotonicityReport monotonicity_check(const FlowTrace& trace, double t0,
                                      const std::vector<double>& x0,
                                      const std::vector<double>& radii,
                                      const MonotonicityOptions& opt) {
  const DomainGrid& g = trace.grid();
  require_anchor_dim(g, x0);
  if (radii.empty()) throw ContractError("monotonicity check needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw ContractError("radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw ContractError("radii must be strictly increasing");
  }
  const double bound = 0.5 * std::sqrt(std::max(t0, 0.0));
  if (!(radii.back() < bound)) {
    throw ContractError(std::string(opt.kind == AnchorKind::Interior
                                        ? "interior anchor needs max R < sqrt(t0)/2 = "
                                        : "boundary anchor needs max R < sqrt(t0/4) = ") +
                        num(bound) + ", got R = " + num(radii.back()));
  }
  if (t0 > trace.end_time() * (1.0 + 1e-12) + 1e-15)
    throw ContractError("anchor time t0 = " + num(t0) + " lies after the trace end " +
                        num(trace.end_time()));
  if (trace.checkpoints.size() < 2) throw ContractError("monotonicity check needs >= 2 checkpoints");
  if (opt.kind == AnchorKind::Boundary) {
    if (!(g.distance_to_boundary(x0) <= g.max_spacing()))
      throw ContractError("boundary anchor lies farther than one spacing from the boundary");
  } else if (!g.contains(x0)) {
    throw ContractError("interior anchor lies outside the domain");
  }

  MonotonicityReport rep;
  rep.kind = opt.kind;
  rep.t0 = t0;
  rep.x0 = x0;
  rep.radii = radii;
  rep.slab = "(t0-4R^2, t0-R^2)";
  const std::size_t nr = radii.size();
  rep.phi.assign(nr, 0.0);
  rep.defect.assign(nr > 0 ? nr - 1 : 0, 0.0);

  const BackwardKernel G(t0, x0);
  const bool interior = opt.kind == AnchorKind::Interior;
  const double c = interior ? opt.penalty.coefficient() : 0.0;
  const int d = g.dimension();
  const int sub = opt.subdivisions;

  struct Use {
    int which;  // radius index for Φ, or nr + pair index for the defect
    TimeCell cell;
    double omega = 1.0;
  };
  std::vector<std::vector<Use>> uses(trace.checkpoints.size());
  for (std::size_t i = 0; i < nr; ++i) {
    const double R = radii[i];
    for (const TimeCell& cell : time_cells(trace, t0 - 4 * R * R, t0 - R * R))
      uses[cell.slice].push_back({static_cast<int>(i), cell});
  }
  for (std::size_t i = 0; i + 1 < nr; ++i) {
    const double r1 = radii[i], r2 = radii[i + 1];
    for (TimeCell cell : time_cells(trace, t0 - 4 * r2 * r2, t0 - r1 * r1)) {
      // ∫ over the cell of |[r1, r2] ∩ [√s/2, √s]|, s = t0 − t, by a
      // composite midpoint rule on the intersection.
      const double a = cell.t_mid - 0.5 * cell.weight;
      double w = 0.0;
      constexpr int kSub = 16;
      for (int q = 0; q < kSub; ++q) {
        const double t = a + (q + 0.5) * cell.weight / kSub;
        const double rs = std::sqrt(t0 - t);
        w += std::max(0.0, std::min(r2, rs) - std::max(r1, 0.5 * rs));
      }
      cell.weight *= w / kSub;
      if (cell.weight > 0.0) uses[cell.slice].push_back({static_cast<int>(nr + i), cell});
    }
  }

  for (std::size_t k = 0; k < trace.checkpoints.size(); ++k) {
    if (uses[k].empty()) continue;
    const SphereField& u = trace.checkpoints[k];
    bool need_phi = false, need_defect = false;
    for (const Use& use : uses[k]) (use.which < static_cast<int>(nr) ? need_phi : need_defect) = true;
    if (need_phi) {
      auto dens = sample(u, sub, [c, interior](const CellSample& cs) {
        if (!interior) return grad_sq(cs);
        const double q = value_sq(cs) - 1.0;
        return 0.5 * grad_sq(cs) + 0.25 * c * q * q;
      });
      for (const Use& use : uses[k])
        if (use.which < static_cast<int>(nr))
          rep.phi[use.which] += use.cell.weight * kernel_weighted_integral(dens, G, use.cell.t_mid);
    }
    if (need_defect) {
      const SphereField ut = time_derivative(trace, k);
      const SphereField* aux[] = {&ut};
      const int m = u.components();
      auto channel = [&](int which) {
        return sample(u, sub, [&, which](const CellSample& cs) {
          double acc = 0.0;
          for (int q = 0; q < m; ++q) {
            double xg = 0.0;
            for (int a = 0; a < d; ++a) xg += (cs.x[a] - x0[a]) * cs.grad[a * m + q];
            const double v = cs.aux[0][q];
            acc += which == 0 ? v * v : (which == 1 ? v * xg : xg * xg);
          }
          return acc;
        }, aux);
      };
      const SampledScalar A = channel(0), B = channel(1), C = channel(2);
      for (const Use& use : uses[k]) {
        if (use.which < static_cast<int>(nr)) continue;
        const double s = t0 - use.cell.t_mid;
        const double alpha = interior ? 0.5 / s : 0.5 / std::sqrt(s);
        const double ia = kernel_weighted_integral(A, G, use.cell.t_mid);
        const double ib = kernel_weighted_integral(B, G, use.cell.t_mid);
        const double ic = kernel_weighted_integral(C, G, use.cell.t_mid);
        const double val = std::max(0.0, ia - 2.0 * alpha * ib + alpha * alpha * ic);
        rep.defect[use.which - nr] += (interior ? 1.0 : 2.0) * use.cell.weight * val;
      }
    }
  }

  double fit_mult = 0.0, fit_add = 0.0;
  for (std::size_t i = 0; i < nr; ++i) {
    double defect = 0.0;
    for (std::size_t j = i + 1; j < nr; ++j) {
      defect += rep.defect[j - 1];
      const double left = rep.phi[i] + defect;
      const double mult = interior ? std::exp(std::pow(radii[j], opt.exponent) -
                                              std::pow(radii[i], opt.exponent))
                                   : 1.0;
      const double rhs = mult * rep.phi[j];
      if (rhs > 0.0)
        fit_mult = std::max(fit_mult, left / rhs);
      else if (left > 0.0)
        fit_mult = std::numeric_limits<double>::infinity();
      const double basis = interior ? radii[j] - radii[i]
                                    : std::pow(radii[j], opt.exponent) -
                                          std::pow(radii[i], opt.exponent);
      fit_add = std::max(fit_add, std::max(0.0, left - rhs) / basis);
    }
  }
  rep.fitted_multiplicative = fit_mult;
  rep.fitted_additive = fit_add;
  for (std::size_t i = 0; i + 1 < nr; ++i)
    if (rep.phi[i] > (1.0 + opt.tolerance) * rep.phi[i + 1]) rep.non_monotone = true;
  return rep;
}

GradientCache::GradientCache(const FlowTrace& trace, int subdivisions)
    : trace_(trace), sub_(subdivisions), slices_(trace.checkpoints.size()) {}

const SampledScalar& GradientCache::slice(std::size_t k) const {
  if (!slices_[k]) slices_[k] = sample(trace_.checkpoints[k], sub_, grad_sq);
  return *slices_[k];
}

double scaled_energy_density(const FlowTrace& trace, double t0, const std::vector<double>& x0,
                             double R, int subdivisions) {
  GradientCache cache(trace, subdivisions);
  return scaled_energy_density(cache, t0, x0, R);
}

double scaled_energy_density(const GradientCache& cache, double t0,
                             const std::vector<double>& x0, double R) {
  const FlowTrace& trace = cache.trace();
  const DomainGrid& g = trace.grid();
  require_anchor_dim(g, x0);
  if (!(R > 0.0)) throw ContractError("scaled density needs R > 0");
  auto cells = time_cells(trace, t0 - R * R, t0 + R * R);
  if (cells.empty()) throw ContractError("parabolic cylinder does not meet the trace");
  double total = 0.0;
  for (const TimeCell& cell : cells)
    total += cell.weight * cache.slice(cell.slice).sum(Region::ball(x0, R));
  return total / (2.0 * std::pow(R, g.dimension()));
}

SingularCandidateSet singular_set(const FlowTrace& trace, double epsilon,
                                  const std::vector<double>& radii, int stride, int subdivisions) {
  GradientCache cache(trace, subdivisions);
  return singular_set(cache, epsilon, radii, stride);
}

SingularCandidateSet singular_set(const GradientCache& cache, double epsilon,
                                  const std::vector<double>& radii_in, int stride) {
  const FlowTrace& trace = cache.trace();
  const DomainGrid& g = trace.grid();
  if (radii_in.empty()) throw ContractError("singular set needs at least one radius");
  if (stride < 1) throw ContractError("anchor stride must be >= 1");
  SingularCandidateSet out;
  out.epsilon = epsilon;
  out.radii = radii_in;
  std::vector<double> radii = radii_in;
  std::sort(radii.begin(), radii.end());

  const int d = g.dimension();
  const int mid = (g.resolution() - 1) / 2;
  std::vector<std::size_t> nodes;
  for (std::size_t i : g.active_nodes()) {
    bool keep = true;
    for (int a = 0; a < d && keep; ++a) keep = (g.index_along(i, a) - mid) % stride == 0;
    if (keep) nodes.push_back(i);
  }
  const std::size_t K = trace.checkpoints.size();
  out.anchors_tested = nodes.size() * K;
  // Survivors as (slice, node) pairs; every radius only revisits survivors.
  std::vector<SingularPoint> alive;
  alive.reserve(out.anchors_tested);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i : nodes) alive.push_back({k, i});
  for (std::size_t k = 0; k < K; ++k) cache.slice(k);

  for (double R : radii) {
    std::vector<std::vector<TimeCell>> windows(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double t = trace.checkpoints[k].time();
      windows[k] = time_cells(trace, t - R * R, t + R * R);
    }
    std::vector<unsigned char> keep(alive.size(), 0);
    const double scale = 1.0 / (2.0 * std::pow(R, d));
    parallel_for(alive.size(), 64, [&](std::size_t lo, std::size_t hi) {
      std::vector<double> x(d);
      for (std::size_t q = lo; q < hi; ++q) {
        g.position(alive[q].node, x);
        const Region ball = Region::ball(x, R);
        double total = 0.0;
        for (const TimeCell& cell : windows[alive[q].slice]) {
          try {
            total += cell.weight * cache.slice(cell.slice).sum(ball);
          } catch (const ContractError&) {
          }
        }
        keep[q] = total * scale >= epsilon;
      }
    });
    std::vector<SingularPoint> next;
    for (std::size_t q = 0; q < alive.size(); ++q)
      if (keep[q]) next.push_back(alive[q]);
    alive = std::move(next);
    if (alive.empty()) break;
  }
  out.points = std::move(alive);
  out.flagged_fraction = out.anchors_tested
                             ? static_cast<double>(out.points.size()) / out.anchors_tested
                             : 0.0;
  return out;
}

ReversePoincareReport reverse_poincare_check(const FlowTrace& trace, double t0,
                                             const std::vector<double>& x0, double R,
                                             const std::optional<std::vector<double>>& a,
                                             int subdivisions) {
  const DomainGrid& g = trace.grid();
  require_anchor_dim(g, x0);
  if (!(R > 0.0) || !std::isfinite(R)) throw ContractError("reverse Poincare check needs 0 < R < inf");
  const int m = trace.checkpoints.front().components();
  if (a && static_cast<int>(a->size()) != m)
    throw ContractError("constant a(t) must have D+1 components");
  auto inner = time_cells(trace, t0 - R * R, t0 + R * R);
  auto outer = time_cells(trace, t0 - 4 * R * R, t0 + 4 * R * R);
  if (outer.empty()) throw ContractError("parabolic cylinder P_2R does not meet the trace");
  const Region ball_r = Region::ball(x0, R);
  const Region ball_2r = Region::ball(x0, 2 * R);

  ReversePoincareReport rep;
  rep.a_choice = a ? "constant" : "spatial-mean";
  auto safe_sum = [](const SampledScalar& s, const Region& r) {
    try {
      return s.sum(r);
    } catch (const ContractError&) {
      return 0.0;
    }
  };
  for (const TimeCell& cell : inner) {
    auto gs = sample(trace.checkpoints[cell.slice], subdivisions, grad_sq);
    rep.lhs += cell.weight * safe_sum(gs, ball_r);
  }
  double outer_len = 0.0;
  for (const TimeCell& cell : outer) {
    const SphereField& u = trace.checkpoints[cell.slice];
    const Reconstruction mode = choose_reconstruction(u);
    std::vector<double> center(m, 0.0);
    if (a) {
      center = *a;
    } else {
      SampledScalar vol = sample_scalar(u, subdivisions, mode, [](const CellSample&) { return 1.0; });
      const double v = safe_sum(vol, ball_2r);
      if (v > 0.0) {
        for (int q = 0; q < m; ++q) {
          auto comp = sample_scalar(u, subdivisions, mode,
                                    [q](const CellSample& cs) { return cs.value[q]; });
          center[q] = comp.sum(ball_2r) / v;
        }
      }
    }
    auto osc = sample_scalar(u, subdivisions, mode, [&](const CellSample& cs) {
      double e = 0.0;
      for (int q = 0; q < m; ++q) e += (cs.value[q] - center[q]) * (cs.value[q] - center[q]);
      return e;
    });
    rep.oscillation += cell.weight * safe_sum(osc, ball_2r);
    outer_len += cell.weight;
  }
  rep.oscillation /= R * R;
  auto g0 = sample(trace.checkpoints.front(), subdivisions, grad_sq);
  rep.initial_energy = outer_len * safe_sum(g0, ball_2r);
  rep.rhs = rep.oscillation + rep.initial_energy;
  rep.fitted_C = rep.rhs > 0.0 ? rep.lhs / rep.rhs
                               : (rep.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return rep;
}

HybridReport hybrid_check(const FlowTrace& trace, double t0, const std::vector<double>& x0,
                          double R, double epsilon, const SphereField& h0,
                          const PenaltyParams& p, int subdivisions) {
  const DomainGrid& g = trace.grid();
  require_anchor_dim(g, x0);
  require_same_grid(g, h0.grid());
  if (!(R > 0.0)) throw ContractError("hybrid check needs R > 0");
  if (!(g.distance_to_boundary(x0) <= g.max_spacing()))
    throw ContractError("hybrid check anchor lies farther than one spacing from the boundary");
  const double c = p.coefficient();
  auto inner = time_cells(trace, t0 - R * R, t0 + R * R);
  auto outer = time_cells(trace, t0 - 4 * R * R, t0 + 4 * R * R);
  if (outer.empty()) throw ContractError("parabolic cylinder P_2R does not meet the trace");
  const Region ball_r = Region::ball(x0, R);
  const Region ball_2r = Region::ball(x0, 2 * R);
  auto safe_sum = [](const SampledScalar& s, const Region& r) {
    try {
      return s.sum(r);
    } catch (const ContractError&) {
      return 0.0;
    }
  };

  HybridReport rep;
  rep.epsilon = epsilon;
  auto grad_half = [](const CellSample& cs) { return 0.5 * grad_sq(cs); };
  auto pen = [c](const CellSample& cs) {
    const double q = value_sq(cs) - 1.0;
    return 0.25 * c * q * q;
  };
  for (const TimeCell& cell : inner) {
    const SphereField& u = trace.checkpoints[cell.slice];
    rep.lhs_gradient += cell.weight * safe_sum(sample(u, subdivisions, grad_half), ball_r);
    rep.lhs_penalty += cell.weight * safe_sum(sample(u, subdivisions, pen), ball_r);
  }
  rep.lhs = rep.lhs_gradient + rep.lhs_penalty;
  const int m = h0.components();
  const SphereField* aux[] = {&h0};
  double outer_len = 0.0;
  for (const TimeCell& cell : outer) {
    const SphereField& u = trace.checkpoints[cell.slice];
    rep.outer += cell.weight * safe_sum(sampled_energy_density(u, p, subdivisions), ball_2r);
    auto dist = sample(u, subdivisions, [m](const CellSample& cs) {
      double e = 0.0;
      for (int q = 0; q < m; ++q) e += (cs.value[q] - cs.aux[0][q]) * (cs.value[q] - cs.aux[0][q]);
      return e;
    }, aux);
    rep.distance += cell.weight * safe_sum(dist, ball_2r);
    outer_len += cell.weight;
  }
  auto hg = sample_scalar(h0, subdivisions, Reconstruction::Linear, grad_sq);
  rep.harmonic = outer_len * safe_sum(hg, ball_2r);
  const double num_ = std::max(0.0, rep.lhs - epsilon * rep.outer - rep.harmonic);
  const double den = rep.distance / (R * R);
  rep.fitted_C = num_ == 0.0 ? 0.0 : (den > 0.0 ? num_ / den : std::numeric_limits<double>::infinity());
  rep.pre_asymptotic = rep.lhs_penalty > rep.lhs_gradient;
  return rep;
}

HolderReport holder_time_modulus(const FlowTrace& trace, const Region& region, double R0,
                                 const SingularCandidateSet* singular) {
  const auto& cps = trace.checkpoints;
  if (cps.size() < 2) throw ContractError("Holder modulus needs >= 2 checkpoints");
  const DomainGrid& g = trace.grid();
  std::vector<std::size_t> nodes;
  std::vector<double> x(g.dimension());
  for (std::size_t i : g.active_nodes()) {
    g.position(i, x);
    if (region.contains(x)) nodes.push_back(i);
  }
  if (nodes.empty()) throw ContractError("Holder modulus region contains no grid node");
  HolderReport rep;
  if (singular) {
    std::vector<unsigned char> in(g.node_count(), 0);
    for (std::size_t i : nodes) in[i] = 1;
    for (const SingularPoint& p : singular->points) {
      if (in[p.node]) {
        rep.warning = "region contains singular candidates; the modulus is not a regular-zone value";
        break;
      }
    }
  }
  const double span2 = std::isfinite(R0) ? R0 * R0 : std::numeric_limits<double>::infinity();
  const int m = cps.front().components();
  for (std::size_t a = 0; a < cps.size(); ++a) {
    for (std::size_t b = a + 1; b < cps.size(); ++b) {
      const double dt = cps[b].time() - cps[a].time();
      if (!(dt > 0.0) || dt > span2) continue;
      ++rep.pairs;
      const double inv = 1.0 / std::sqrt(dt);
      for (std::size_t i : nodes) {
        auto p = cps[a].at(i);
        auto q = cps[b].at(i);
        double s = 0.0;
        for (int c = 0; c < m; ++c) s += (q[c] - p[c]) * (q[c] - p[c]);
        rep.modulus = std::max(rep.modulus, std::sqrt(s) * inv);
      }
    }
  }
  return rep;
}

double regularity_scale(double t, int d) {
  return t * std::pow(1.0 + std::log(1.0 / t), d + 1);
}

double boundary_c2_norm(const SphereField& u0) {
  const DomainGrid& g = u0.grid();
  ScalarField gs = gradient_norm_sq(u0);
  const int m = u0.components();
  double best = 0.0;
  for (std::size_t i : g.boundary_nodes()) {
    double second = 0.0;
    for (int a = 0; a < g.dimension(); ++a) {
      const std::size_t up = g.neighbor(i, a, +1);
      const std::size_t dn = g.neighbor(i, a, -1);
      if (up == DomainGrid::npos || dn == DomainGrid::npos || !g.is_active(up) || !g.is_active(dn))
        continue;
      double s = 0.0;
      for (int c = 0; c < m; ++c) {
        const double v = (u0.at(up)[c] + u0.at(dn)[c] - 2.0 * u0.at(i)[c]) /
                         (g.spacing(a) * g.spacing(a));
        s += v * v;
      }
      second = std::max(second, std::sqrt(s));
    }
    best = std::max(best, u0.norm(i) + std::sqrt(gs[i]) + second);
  }
  return best;
}

EpsilonRegularityReport epsilon_regularity_report(const FlowTrace& trace, double epsilon,
                                                  double R0, const PenaltyParams& p, int stride,
                                                  int subdivisions) {
  if (!(epsilon > 0.0)) throw ContractError("epsilon-regularity report needs eps0 > 0");
  if (!(R0 > 0.0 && R0 < 1.0)) throw ContractError("epsilon-regularity report needs 0 < R0 < 1");
  if (stride < 1) throw ContractError("anchor stride must be >= 1");
  const DomainGrid& g = trace.grid();
  const int d = g.dimension();
  EpsilonRegularityReport rep;
  rep.epsilon = epsilon;
  rep.R0 = R0;
  rep.g_R0 = regularity_scale(R0, d);
  rep.boundary_c2 = boundary_c2_norm(trace.checkpoints.front());

  const std::size_t K = trace.checkpoints.size();
  std::vector<SampledScalar> dens;
  std::vector<EnergyDensityField> node_e;
  dens.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    dens.push_back(sampled_energy_density(trace.checkpoints[k], p, subdivisions));
    node_e.push_back(energy_density(trace.checkpoints[k], p));
  }
  const int mid = (g.resolution() - 1) / 2;
  std::vector<std::size_t> nodes;
  for (std::size_t i : g.active_nodes()) {
    bool keep = true;
    for (int a = 0; a < d && keep; ++a) keep = (g.index_along(i, a) - mid) % stride == 0;
    if (keep) nodes.push_back(i);
  }
  rep.anchors_tested = nodes.size() * K;
  const double g2 = rep.g_R0 * rep.g_R0;
  const double envelope = 1.0 / (R0 * R0) + rep.boundary_c2;
  std::vector<std::vector<EpsilonRegularityAnchor>> found(K);
  parallel_for(K, 1, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> x(d), y(d);
    for (std::size_t k = lo; k < hi; ++k) {
      const double t = trace.checkpoints[k].time();
      auto big = time_cells(trace, t - g2, t + g2);
      auto small = time_cells(trace, t - R0 * R0, t + R0 * R0);
      for (std::size_t i : nodes) {
        g.position(i, x);
        const Region ball = Region::ball(x, rep.g_R0);
        double total = 0.0;
        for (const TimeCell& c : big) total += c.weight * dens[c.slice].sum(ball);
        const double density = total / std::pow(R0, d);
        if (!(density < epsilon)) continue;
        double sup = 0.0;
        for (const TimeCell& c : small) {
          for (std::size_t j : g.active_nodes()) {
            g.position(j, y);
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) r2 += (y[a] - x[a]) * (y[a] - x[a]);
            if (r2 < R0 * R0) sup = std::max(sup, node_e[c.slice].values[j]);
          }
        }
        found[k].push_back({k, i, density, sup, sup / envelope});
      }
    }
  });
  for (auto& f : found)
    for (auto& a : f) {
      rep.fitted_C = std::max(rep.fitted_C, a.implied_C);
      rep.small_density.push_back(a);
    }
  for (const auto& a : rep.small_density)
    if (a.sup_e > rep.fitted_C * envelope * (1.0 + 1e-12)) ++rep.envelope_violations;
  return rep;
}

std::vector<DiagnosticRecord> to_records(const MonotonicityReport& r) {
  std::vector<DiagnosticRecord> out;
  std::vector<double> z0{r.t0};
  z0.insert(z0.end(), r.x0.begin(), r.x0.end());
  const std::string kind = r.kind == AnchorKind::Interior ? "monotonicity_interior"
                                                          : "monotonicity_boundary";
  for (std::size_t i = 0; i < r.radii.size(); ++i) {
    DiagnosticRecord rec;
    rec.kind = kind;
    rec.z0 = z0;
    rec.R = r.radii[i];
    rec.lhs = r.phi[i];
    rec.rhs = r.fitted_multiplicative * r.phi[i];
    rec.defect = i < r.defect.size() ? r.defect[i] : 0.0;
    rec.fitted_C = r.fitted_multiplicative;
    out.push_back(rec);
  }
  return out;
}

}  // namespace sphereflow
