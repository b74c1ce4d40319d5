#pragma once

// Sub-cell quadrature for the space-time diagnostics.
//
// Each grid cell whose 2^d corners are active is split into s^d sub-cells; a
// midpoint sample of each that lies in the closed domain carries weight
// (h/s)^d. The field is reconstructed at every sample either by tensor-product
// multilinear interpolation or, for sphere-valued data, as
// I(|u|) * I(u)/|I(u)|: modulus times the normalized interpolant. The second
// form keeps the reconstruction on the sphere and resolves point defects such
// as the core of x/|x| inside a single cell, where node sampling of |∇u|²
// loses a fixed O(h) amount of energy.

#include <functional>
#include <span>
#include <vector>

#include "sphereflow/domain_grid.hpp"

namespace sphereflow {

enum class Reconstruction { Linear, Polar };

/// Polar when every active node satisfies ||u| - 1| <= 1e-9, else Linear.
Reconstruction choose_reconstruction(const SphereField& f);

struct CellSample {
  std::span<const double> x;
  std::span<const double> value;
  /// grad[a * components + c] = ∂_a u^c.
  std::span<const double> grad;
  /// Multilinear interpolants of the auxiliary fields, in the order given.
  std::span<const std::span<const double>> aux;
  int components = 0;
};

using SampleIntegrand = std::function<double(const CellSample&)>;

/// Integrand values times quadrature weights, one per sub-cell sample.
class SampledScalar {
 public:
  SampledScalar(GridPtr grid, int subdivisions);

  const DomainGrid& grid() const { return *grid_; }
  int subdivisions() const { return sub_; }

  /// Σ over samples inside the region. Throws ContractError if no sample of
  /// the domain falls in the region.
  double sum(const Region& region) const;
  /// Σ weight(x) * sample over samples inside the region.
  double weighted_sum(const std::function<double(std::span<const double>)>& weight,
                      const Region& region = Region::whole()) const;

  /// Sum of quadrature weights inside region ∩ Ω (its measured volume).
  double volume(const Region& region) const;

 private:
  friend SampledScalar sample_scalar(const SphereField&, int, Reconstruction,
                                     const SampleIntegrand&,
                                     std::span<const SphereField* const>);
  template <class F>
  void visit(const Region& region, F&& f) const;

  GridPtr grid_;
  int sub_;
  int per_cell_;
  double sample_weight_;
  std::vector<double> offsets_;        // per_cell_ x d, in units of length
  std::vector<unsigned char> inside_;  // per sample
  std::vector<double> values_;         // per sample, weight included
  std::vector<double> cell_total_;     // per cell, sum of its samples
  std::vector<unsigned short> cell_count_;  // per cell, samples inside Ω
};

/// Evaluates the integrand on every sample of every active cell.
SampledScalar sample_scalar(const SphereField& f, int subdivisions,
                            Reconstruction mode, const SampleIntegrand& integrand,
                            std::span<const SphereField* const> aux = {});

/// Convenience: ∫ |∇u|² over the region with the reconstruction above.
double gradient_energy(const SphereField& f, const Region& region,
                       int subdivisions, Reconstruction mode);

}  // namespace sphereflow
