#include "sphereflow/domain_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sphereflow/errors.hpp"
#include "sphereflow/parallel.hpp"

namespace sphereflow {

void validate(const DomainSpec& spec) {
  if (spec.dimension < 2)
    throw ConfigError("domain dimension must be >= 2, got " +
                      std::to_string(spec.dimension));
  if (spec.resolution < 5 || spec.resolution % 2 == 0)
    throw ConfigError("grid resolution n must be odd and >= 5, got " +
                      std::to_string(spec.resolution));
  if (spec.shape == Shape::Box && !spec.half_widths.empty()) {
    if (static_cast<int>(spec.half_widths.size()) != spec.dimension)
      throw ConfigError("box needs one half-width per axis");
    for (double w : spec.half_widths)
      if (!(w > 0.0) || !std::isfinite(w))
        throw ConfigError("box half-widths must be positive");
  }
  // Guard against absurd allocations.
  double nodes = std::pow(static_cast<double>(spec.resolution), spec.dimension);
  if (nodes > 5.0e8) throw ConfigError("grid too large");
}

DomainGrid::DomainGrid(DomainSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  const int d = spec_.dimension;
  const int n = spec_.resolution;
  half_width_.assign(d, 1.0);
  if (spec_.shape == Shape::Box && !spec_.half_widths.empty())
    half_width_ = spec_.half_widths;
  spacing_.resize(d);
  strides_.resize(d);
  cell_volume_ = 1.0;
  for (int a = 0; a < d; ++a) {
    spacing_[a] = 2.0 * half_width_[a] / (n - 1);
    cell_volume_ *= spacing_[a];
  }
  std::size_t total = 1;
  for (int a = d - 1; a >= 0; --a) {
    strides_[a] = total;
    total *= static_cast<std::size_t>(n);
  }

  classes_.assign(total, NodeClass::Exterior);
  if (spec_.shape == Shape::Box) {
    for (std::size_t i = 0; i < total; ++i) {
      bool face = false;
      for (int a = 0; a < d; ++a) {
        int k = index_along(i, a);
        if (k == 0 || k == n - 1) face = true;
      }
      classes_[i] = face ? NodeClass::Boundary : NodeClass::Interior;
    }
  } else {
    std::vector<double> x(d);
    for (std::size_t i = 0; i < total; ++i) {
      position(i, x);
      double r2 = 0.0;
      for (double c : x) r2 += c * c;
      if (r2 < 1.0) classes_[i] = NodeClass::Interior;
    }
    for (std::size_t i = 0; i < total; ++i) {
      if (classes_[i] == NodeClass::Interior) continue;
      for (int a = 0; a < d && classes_[i] == NodeClass::Exterior; ++a) {
        for (int dir : {-1, 1}) {
          std::size_t j = neighbor(i, a, dir);
          if (j != npos && classes_[j] == NodeClass::Interior) {
            classes_[i] = NodeClass::Boundary;
            break;
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (classes_[i] == NodeClass::Interior) interior_.push_back(i);
    if (classes_[i] == NodeClass::Boundary) boundary_.push_back(i);
    if (classes_[i] != NodeClass::Exterior) active_.push_back(i);
  }
  compute_weights();
}

// Dual cells that may straddle ∂Ω are measured by a midpoint sub-lattice; an
// even count per axis makes box faces, edges and corners exact.
void DomainGrid::compute_weights() {
  const int d = spec_.dimension;
  const int m = d <= 3 ? 8 : 4;
  std::size_t per_cell = 1;
  for (int a = 0; a < d; ++a) per_cell *= m;
  double half_diag = 0.0;
  for (int a = 0; a < d; ++a) half_diag += 0.25 * spacing_[a] * spacing_[a];
  half_diag = std::sqrt(half_diag);
  weights_.assign(classes_.size(), 0.0);
  std::vector<double> x(d), y(d);
  for (std::size_t i : active_) {
    position(i, x);
    if (contains(x) && distance_to_boundary(x) > half_diag) {
      weights_[i] = cell_volume_;
      continue;
    }
    std::size_t inside = 0;
    for (std::size_t s = 0; s < per_cell; ++s) {
      std::size_t r = s;
      for (int a = 0; a < d; ++a) {
        const int k = static_cast<int>(r % m);
        r /= m;
        y[a] = x[a] + spacing_[a] * ((k + 0.5) / m - 0.5);
      }
      if (contains(y)) ++inside;
    }
    weights_[i] = cell_volume_ * static_cast<double>(inside) / static_cast<double>(per_cell);
  }
}

double DomainGrid::min_spacing() const {
  return *std::min_element(spacing_.begin(), spacing_.end());
}

double DomainGrid::max_spacing() const {
  return *std::max_element(spacing_.begin(), spacing_.end());
}

void DomainGrid::position(std::size_t node, std::span<double> out) const {
  for (int a = 0; a < spec_.dimension; ++a) out[a] = coordinate(node, a);
}

std::vector<double> DomainGrid::position(std::size_t node) const {
  std::vector<double> x(spec_.dimension);
  position(node, x);
  return x;
}

std::size_t DomainGrid::neighbor(std::size_t node, int axis, int dir) const {
  const int k = index_along(node, axis) + dir;
  if (k < 0 || k >= spec_.resolution) return npos;
  return dir > 0 ? node + strides_[axis] : node - strides_[axis];
}

std::size_t DomainGrid::node_at(std::span<const int> index) const {
  std::size_t node = 0;
  for (int a = 0; a < spec_.dimension; ++a) {
    if (index[a] < 0 || index[a] >= spec_.resolution) return npos;
    node += static_cast<std::size_t>(index[a]) * strides_[a];
  }
  return node;
}

std::size_t DomainGrid::nearest_node(std::span<const double> x) const {
  std::vector<int> idx(spec_.dimension);
  for (int a = 0; a < spec_.dimension; ++a) {
    long k = std::lround((x[a] + half_width_[a]) / spacing_[a]);
    idx[a] = static_cast<int>(std::clamp<long>(k, 0, spec_.resolution - 1));
  }
  return node_at(idx);
}

bool DomainGrid::contains(std::span<const double> x) const {
  if (spec_.shape == Shape::UnitBall) {
    double r2 = 0.0;
    for (int a = 0; a < spec_.dimension; ++a) r2 += x[a] * x[a];
    return r2 <= 1.0;
  }
  for (int a = 0; a < spec_.dimension; ++a)
    if (std::abs(x[a]) > half_width_[a]) return false;
  return true;
}

double DomainGrid::distance_to_boundary(std::span<const double> x) const {
  if (spec_.shape == Shape::UnitBall) {
    double r2 = 0.0;
    for (int a = 0; a < spec_.dimension; ++a) r2 += x[a] * x[a];
    return std::abs(1.0 - std::sqrt(r2));
  }
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < spec_.dimension; ++a)
    best = std::min(best, std::abs(half_width_[a] - std::abs(x[a])));
  return best;
}

bool DomainGrid::same_as(const DomainGrid& other) const {
  return this == &other ||
         (spec_.dimension == other.spec_.dimension &&
          spec_.shape == other.spec_.shape &&
          spec_.resolution == other.spec_.resolution &&
          half_width_ == other.half_width_);
}

GridPtr build_grid(const DomainSpec& spec) {
  return std::make_shared<const DomainGrid>(spec);
}

SphereField::SphereField(GridPtr grid, int components, double t)
    : grid_(std::move(grid)), components_(components), t_(t) {
  if (!grid_) throw ContractError("field needs a grid");
  if (components_ < 1) throw ContractError("field needs >= 1 component");
  values_.assign(grid_->node_count() * components_, 0.0);
}

double SphereField::norm_sq(std::size_t node) const {
  double s = 0.0;
  for (double v : at(node)) s += v * v;
  return s;
}

double SphereField::norm(std::size_t node) const { return std::sqrt(norm_sq(node)); }

ScalarField::ScalarField(GridPtr g) : grid(std::move(g)) {
  values.assign(grid->node_count(), 0.0);
}

void require_same_grid(const DomainGrid& a, const DomainGrid& b) {
  if (!a.same_as(b)) throw ContractError("fields live on different grids");
}

bool Region::contains(std::span<const double> x) const {
  if (center.empty()) return true;
  double r2 = 0.0;
  for (std::size_t a = 0; a < center.size(); ++a) {
    const double dx = x[a] - center[a];
    r2 += dx * dx;
  }
  return r2 < radius * radius;
}

SphereField laplacian(const SphereField& f) {
  const DomainGrid& g = f.grid();
  SphereField out(f.grid_ptr(), f.components(), f.time());
  const int d = g.dimension();
  const int m = f.components();
  std::vector<double> inv_h2(d);
  for (int a = 0; a < d; ++a) inv_h2[a] = 1.0 / (g.spacing(a) * g.spacing(a));
  auto interior = g.interior_nodes();
  parallel_for(interior.size(), 4096, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t i = interior[k];
      auto ui = f.at(i);
      auto o = out.at(i);
      for (int a = 0; a < d; ++a) {
        auto up = f.at(i + g.stride(a));
        auto dn = f.at(i - g.stride(a));
        for (int c = 0; c < m; ++c)
          o[c] += (up[c] + dn[c] - 2.0 * ui[c]) * inv_h2[a];
      }
    }
  });
  return out;
}

ScalarField gradient_norm_sq(const SphereField& f) {
  const DomainGrid& g = f.grid();
  ScalarField out(f.grid_ptr());
  const int d = g.dimension();
  const int m = f.components();
  auto active = g.active_nodes();
  parallel_for(active.size(), 4096, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t i = active[k];
      double s = 0.0;
      for (int a = 0; a < d; ++a) {
        std::size_t up = g.neighbor(i, a, +1);
        std::size_t dn = g.neighbor(i, a, -1);
        const bool has_up = up != DomainGrid::npos && g.is_active(up);
        const bool has_dn = dn != DomainGrid::npos && g.is_active(dn);
        const double h = g.spacing(a);
        if (has_up && has_dn) {
          auto p = f.at(up);
          auto q = f.at(dn);
          for (int c = 0; c < m; ++c) {
            const double dv = (p[c] - q[c]) / (2.0 * h);
            s += dv * dv;
          }
        } else if (has_up || has_dn) {
          auto p = f.at(has_up ? up : i);
          auto q = f.at(has_up ? i : dn);
          for (int c = 0; c < m; ++c) {
            const double dv = (p[c] - q[c]) / h;
            s += dv * dv;
          }
        }
      }
      out[i] = s;
    }
  });
  return out;
}

double integrate(const ScalarField& gfield, const Region& region) {
  const DomainGrid& g = *gfield.grid;
  std::vector<double> terms;
  terms.reserve(g.active_nodes().size());
  std::vector<double> x(g.dimension());
  for (std::size_t i : g.active_nodes()) {
    g.position(i, x);
    if (!region.contains(x)) continue;
    terms.push_back(g.node_weight(i) * gfield[i]);
  }
  if (terms.empty()) throw ContractError("integration region contains no grid node");
  return pairwise_sum(terms);
}

}  // namespace sphereflow
