#include "sphereflow/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "sphereflow/errors.hpp"
#include "sphereflow/parallel.hpp"

namespace sphereflow {

Reconstruction choose_reconstruction(const SphereField& f) {
  for (std::size_t i : f.grid().active_nodes())
    if (std::abs(f.norm(i) - 1.0) > 1e-9) return Reconstruction::Linear;
  return Reconstruction::Polar;
}

SampledScalar::SampledScalar(GridPtr grid, int subdivisions)
    : grid_(std::move(grid)), sub_(subdivisions) {
  if (sub_ < 1) throw ContractError("sub-cell subdivisions must be >= 1");
  const int d = grid_->dimension();
  per_cell_ = 1;
  for (int a = 0; a < d; ++a) per_cell_ *= sub_;
  sample_weight_ = grid_->cell_volume() / per_cell_;
  offsets_.resize(static_cast<std::size_t>(per_cell_) * d);
  for (int k = 0; k < per_cell_; ++k) {
    int rem = k;
    for (int a = d - 1; a >= 0; --a) {
      const int j = rem % sub_;
      rem /= sub_;
      offsets_[k * d + a] = (j + 0.5) / sub_ * grid_->spacing(a);
    }
  }
  const std::size_t total = grid_->node_count() * per_cell_;
  inside_.assign(total, 0);
  values_.assign(total, 0.0);
  cell_total_.assign(grid_->node_count(), 0.0);
  cell_count_.assign(grid_->node_count(), 0);
}

template <class F>
void SampledScalar::visit(const Region& region, F&& f) const {
  const DomainGrid& g = *grid_;
  const int d = g.dimension();
  const int n = g.resolution();
  std::vector<int> lo(d, 0), hi(d, n - 2);
  if (!region.is_whole()) {
    for (int a = 0; a < d; ++a) {
      const double h = g.spacing(a);
      const double w = g.half_width(a);
      lo[a] = std::max(0, static_cast<int>(std::floor((region.center[a] - region.radius + w) / h)));
      hi[a] = std::min(n - 2, static_cast<int>(std::floor((region.center[a] + region.radius + w) / h)));
      if (lo[a] > hi[a]) return;
    }
  }
  std::vector<int> idx = lo;
  std::vector<double> base(d), x(d);
  while (true) {
    const std::size_t cell = g.node_at(idx);
    const std::size_t first = cell * per_cell_;
    g.position(cell, base);
    for (int k = 0; k < per_cell_; ++k) {
      if (!inside_[first + k]) continue;
      for (int a = 0; a < d; ++a) x[a] = base[a] + offsets_[k * d + a];
      if (region.contains(x)) f(first + k, std::span<const double>(x));
    }
    int a = d - 1;
    while (a >= 0 && ++idx[a] > hi[a]) {
      idx[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
}

double SampledScalar::sum(const Region& region) const {
  if (region.is_whole()) {
    double s = 0.0;
    bool any = false;
    for (std::size_t c = 0; c < cell_total_.size(); ++c) {
      if (cell_count_[c] == 0) continue;
      s += cell_total_[c];
      any = true;
    }
    if (!any) throw ContractError("region contains no quadrature sample of the domain");
    return s;
  }
  // Cells entirely inside the ball contribute their cached total; cells
  // straddling the sphere are resolved sample by sample.
  const DomainGrid& g = *grid_;
  const int d = g.dimension();
  const int n = g.resolution();
  const double r2 = region.radius * region.radius;
  std::vector<int> lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    const double h = g.spacing(a);
    const double w = g.half_width(a);
    lo[a] = std::max(0, static_cast<int>(std::floor((region.center[a] - region.radius + w) / h)));
    hi[a] = std::min(n - 2, static_cast<int>(std::floor((region.center[a] + region.radius + w) / h)));
    if (lo[a] > hi[a]) throw ContractError("region contains no quadrature sample of the domain");
  }
  std::vector<int> idx = lo;
  std::vector<double> base(d), x(d);
  double s = 0.0;
  bool any = false;
  while (true) {
    const std::size_t cell = g.node_at(idx);
    if (cell_count_[cell] != 0) {
      g.position(cell, base);
      double near2 = 0.0, far2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double lo_a = base[a] - region.center[a];
        const double hi_a = lo_a + g.spacing(a);
        const double nd = lo_a > 0.0 ? lo_a : (hi_a < 0.0 ? -hi_a : 0.0);
        const double fd = std::max(std::abs(lo_a), std::abs(hi_a));
        near2 += nd * nd;
        far2 += fd * fd;
      }
      if (far2 < r2) {
        s += cell_total_[cell];
        any = true;
      } else if (near2 < r2) {
        const std::size_t first = cell * per_cell_;
        for (int k = 0; k < per_cell_; ++k) {
          if (!inside_[first + k]) continue;
          for (int a = 0; a < d; ++a) x[a] = base[a] + offsets_[k * d + a];
          if (region.contains(x)) {
            s += values_[first + k];
            any = true;
          }
        }
      }
    }
    int a = d - 1;
    while (a >= 0 && ++idx[a] > hi[a]) {
      idx[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
  if (!any) throw ContractError("region contains no quadrature sample of the domain");
  return s;
}

double SampledScalar::weighted_sum(
    const std::function<double(std::span<const double>)>& weight,
    const Region& region) const {
  double s = 0.0;
  visit(region, [&](std::size_t k, std::span<const double> x) {
    if (values_[k] != 0.0) s += weight(x) * values_[k];
  });
  return s;
}

double SampledScalar::volume(const Region& region) const {
  double v = 0.0;
  visit(region, [&](std::size_t, std::span<const double>) { v += sample_weight_; });
  return v;
}

SampledScalar sample_scalar(const SphereField& f, int subdivisions,
                            Reconstruction mode, const SampleIntegrand& integrand,
                            std::span<const SphereField* const> aux) {
  SampledScalar out(f.grid_ptr(), subdivisions);
  const DomainGrid& g = f.grid();
  for (const SphereField* a : aux) require_same_grid(g, a->grid());
  const int d = g.dimension();
  const int n = g.resolution();
  const int m = f.components();
  const int corners = 1 << d;
  const int per_cell = out.per_cell_;

  // Shape functions and their x-derivatives at the sample points of a cell.
  std::vector<double> shape(static_cast<std::size_t>(per_cell) * corners);
  std::vector<double> dshape(static_cast<std::size_t>(per_cell) * corners * d);
  for (int k = 0; k < per_cell; ++k) {
    for (int c = 0; c < corners; ++c) {
      double v = 1.0;
      for (int a = 0; a < d; ++a) {
        const double xi = out.offsets_[k * d + a] / g.spacing(a);
        v *= ((c >> a) & 1) ? xi : 1.0 - xi;
      }
      shape[k * corners + c] = v;
      for (int a = 0; a < d; ++a) {
        double dv = ((c >> a) & 1) ? 1.0 / g.spacing(a) : -1.0 / g.spacing(a);
        for (int b = 0; b < d; ++b) {
          if (b == a) continue;
          const double xi = out.offsets_[k * d + b] / g.spacing(b);
          dv *= ((c >> b) & 1) ? xi : 1.0 - xi;
        }
        dshape[(k * corners + c) * d + a] = dv;
      }
    }
  }
  std::vector<std::size_t> corner_offset(corners, 0);
  for (int c = 0; c < corners; ++c)
    for (int a = 0; a < d; ++a)
      if ((c >> a) & 1) corner_offset[c] += g.stride(a);

  const std::size_t nodes = g.node_count();
  parallel_for(nodes, 2048, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> base(d), x(d), value(m), grad(static_cast<std::size_t>(d) * m);
    std::vector<double> p(m), gp(static_cast<std::size_t>(d) * m), grho(d);
    std::vector<double> corner_norm(corners);
    std::vector<std::vector<double>> aux_vals(aux.size());
    std::vector<std::span<const double>> aux_spans(aux.size());
    for (std::size_t q = 0; q < aux.size(); ++q) aux_vals[q].resize(aux[q]->components());
    for (std::size_t cell = lo; cell < hi; ++cell) {
      bool valid = true;
      for (int a = 0; a < d && valid; ++a)
        if (g.index_along(cell, a) >= n - 1) valid = false;
      for (int c = 0; c < corners && valid; ++c)
        if (!g.is_active(cell + corner_offset[c])) valid = false;
      if (!valid) continue;
      if (mode == Reconstruction::Polar)
        for (int c = 0; c < corners; ++c) corner_norm[c] = f.norm(cell + corner_offset[c]);
      g.position(cell, base);
      for (int k = 0; k < per_cell; ++k) {
        for (int a = 0; a < d; ++a) x[a] = base[a] + out.offsets_[k * d + a];
        if (!g.contains(x)) continue;
        std::fill(p.begin(), p.end(), 0.0);
        std::fill(gp.begin(), gp.end(), 0.0);
        double rho = 0.0;
        std::fill(grho.begin(), grho.end(), 0.0);
        for (int c = 0; c < corners; ++c) {
          auto uc = f.at(cell + corner_offset[c]);
          const double s = shape[k * corners + c];
          const double* ds = &dshape[(k * corners + c) * d];
          for (int j = 0; j < m; ++j) p[j] += s * uc[j];
          for (int a = 0; a < d; ++a)
            for (int j = 0; j < m; ++j) gp[a * m + j] += ds[a] * uc[j];
          if (mode == Reconstruction::Polar) {
            rho += s * corner_norm[c];
            for (int a = 0; a < d; ++a) grho[a] += ds[a] * corner_norm[c];
          }
        }
        if (mode == Reconstruction::Linear) {
          value = p;
          grad = gp;
        } else {
          double pn = 0.0;
          for (double v : p) pn += v * v;
          pn = std::sqrt(pn);
          if (pn < 1e-300) {
            std::fill(value.begin(), value.end(), 0.0);
            grad = gp;
          } else {
            for (int j = 0; j < m; ++j) value[j] = p[j] / pn;  // direction w
            for (int a = 0; a < d; ++a) {
              double wg = 0.0;
              for (int j = 0; j < m; ++j) wg += value[j] * gp[a * m + j];
              for (int j = 0; j < m; ++j) {
                const double dw = (gp[a * m + j] - value[j] * wg) / pn;
                grad[a * m + j] = grho[a] * value[j] + rho * dw;
              }
            }
            for (int j = 0; j < m; ++j) value[j] *= rho;
          }
        }
        for (std::size_t q = 0; q < aux.size(); ++q) {
          std::fill(aux_vals[q].begin(), aux_vals[q].end(), 0.0);
          const int mq = aux[q]->components();
          for (int c = 0; c < corners; ++c) {
            auto vc = aux[q]->at(cell + corner_offset[c]);
            const double s = shape[k * corners + c];
            for (int j = 0; j < mq; ++j) aux_vals[q][j] += s * vc[j];
          }
          aux_spans[q] = aux_vals[q];
        }
        CellSample sample{x, value, grad, aux_spans, m};
        const std::size_t slot = cell * per_cell + k;
        out.inside_[slot] = 1;
        out.values_[slot] = integrand(sample) * out.sample_weight_;
      }
      const std::size_t first = cell * per_cell;
      double total = 0.0;
      unsigned short count = 0;
      for (int k = 0; k < per_cell; ++k) {
        total += out.values_[first + k];
        count += out.inside_[first + k];
      }
      out.cell_total_[cell] = total;
      out.cell_count_[cell] = count;
    }
  });
  return out;
}

double gradient_energy(const SphereField& f, const Region& region,
                       int subdivisions, Reconstruction mode) {
  auto s = sample_scalar(f, subdivisions, mode, [](const CellSample& cs) {
    double e = 0.0;
    for (double v : cs.grad) e += v * v;
    return e;
  });
  return s.sum(region);
}

}  // namespace sphereflow
