#pragma once

// Uniform Cartesian discretization of the domain, node-indexed fields, the
// finite-difference stencils and the node-weight quadrature.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace sphereflow {

enum class Shape { UnitBall, Box };

enum class NodeClass : std::uint8_t { Interior, Boundary, Exterior };

struct DomainSpec {
  int dimension = 3;
  Shape shape = Shape::UnitBall;
  /// Box half-widths per axis; empty means 1 on every axis. Ignored for the ball.
  std::vector<double> half_widths;
  /// Nodes per axis; odd and >= 5 so that the origin is a node.
  int resolution = 33;
};

/// Throws ConfigError when the DomainSpec is unusable.
void validate(const DomainSpec& spec);

/// Node grid over the bounding box of the domain. Nodes are ordered row-major
/// with axis 0 slowest. For the ball, nodes strictly inside |x| < 1 are
/// interior; nodes outside with an interior axis neighbour are boundary
/// (staircase boundary within one spacing of the sphere); the rest are
/// exterior and never read by a stencil.
class DomainGrid {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  explicit DomainGrid(DomainSpec spec);

  const DomainSpec& spec() const { return spec_; }
  int dimension() const { return spec_.dimension; }
  int resolution() const { return spec_.resolution; }
  std::size_t node_count() const { return classes_.size(); }

  double spacing(int axis) const { return spacing_[axis]; }
  double min_spacing() const;
  double max_spacing() const;
  /// Product of the spacings.
  double cell_volume() const { return cell_volume_; }
  /// Quadrature weight: the measure of the node's dual cell inside Ω (h^d
  /// away from the boundary, h^d/2 on a box face). Zero at exterior nodes.
  double node_weight(std::size_t node) const { return weights_[node]; }
  double half_width(int axis) const { return half_width_[axis]; }

  NodeClass node_class(std::size_t node) const { return classes_[node]; }
  bool is_active(std::size_t node) const {
    return classes_[node] != NodeClass::Exterior;
  }
  std::span<const std::size_t> interior_nodes() const { return interior_; }
  std::span<const std::size_t> boundary_nodes() const { return boundary_; }
  /// Interior and boundary nodes in increasing node order.
  std::span<const std::size_t> active_nodes() const { return active_; }

  std::size_t stride(int axis) const { return strides_[axis]; }
  int index_along(std::size_t node, int axis) const {
    return static_cast<int>((node / strides_[axis]) % spec_.resolution);
  }
  /// Computed as w * (2k - m) / m so that the centre and the outer faces are
  /// exact and the lattice is symmetric under x -> -x.
  double coordinate(std::size_t node, int axis) const {
    const int m = spec_.resolution - 1;
    return half_width_[axis] * (2 * index_along(node, axis) - m) / m;
  }
  void position(std::size_t node, std::span<double> out) const;
  std::vector<double> position(std::size_t node) const;

  /// Axis neighbour in direction dir (+1/-1), or npos when off the lattice.
  std::size_t neighbor(std::size_t node, int axis, int dir) const;

  std::size_t node_at(std::span<const int> index) const;
  /// Lattice node closest to x (clamped to the bounding box).
  std::size_t nearest_node(std::span<const double> x) const;

  /// Point membership in the continuous domain (closed).
  bool contains(std::span<const double> x) const;
  /// Unsigned distance from x to the continuous boundary.
  double distance_to_boundary(std::span<const double> x) const;

  bool same_as(const DomainGrid& other) const;

 private:
  DomainSpec spec_;
  std::vector<double> half_width_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  double cell_volume_ = 0.0;
  std::vector<NodeClass> classes_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> boundary_;
  std::vector<std::size_t> active_;
  std::vector<double> weights_;

  void compute_weights();
};

using GridPtr = std::shared_ptr<const DomainGrid>;

/// Throws ConfigError for even or too small resolutions and bad dimensions.
GridPtr build_grid(const DomainSpec& spec);

/// Node-indexed vector field with `components` entries per node. Flow states
/// carry D+1 components (a map into S^D); scalar helpers use one component.
/// Values at exterior nodes are never read.
class SphereField {
 public:
  SphereField() = default;
  SphereField(GridPtr grid, int components, double t = 0.0);

  const DomainGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int components() const { return components_; }
  /// Target sphere dimension D = components - 1.
  int target_dimension() const { return components_ - 1; }
  double time() const { return t_; }
  void set_time(double t) { t_ = t; }

  std::span<double> at(std::size_t node) {
    return {values_.data() + node * components_,
            static_cast<std::size_t>(components_)};
  }
  std::span<const double> at(std::size_t node) const {
    return {values_.data() + node * components_,
            static_cast<std::size_t>(components_)};
  }
  std::span<double> data() { return values_; }
  std::span<const double> data() const { return values_; }

  double norm(std::size_t node) const;
  double norm_sq(std::size_t node) const;

 private:
  GridPtr grid_;
  int components_ = 0;
  double t_ = 0.0;
  std::vector<double> values_;
};

struct ScalarField {
  GridPtr grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(GridPtr g);
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Throws ContractError unless both fields live on the same grid.
void require_same_grid(const DomainGrid& a, const DomainGrid& b);

/// Spatial integration region: the whole domain or a ball B_R(x0).
struct Region {
  std::vector<double> center;  // empty: whole domain
  double radius = std::numeric_limits<double>::infinity();

  static Region whole() { return {}; }
  static Region ball(std::vector<double> x0, double r) {
    return {std::move(x0), r};
  }
  bool is_whole() const { return center.empty(); }
  bool contains(std::span<const double> x) const;
};

/// Component-wise (2d+1)-point Laplacian at interior nodes; zero elsewhere.
SphereField laplacian(const SphereField& f);

/// Sum over components of the squared gradient. Centered differences where
/// both axis neighbours are active, one-sided where only one is; zero at
/// exterior nodes.
ScalarField gradient_norm_sq(const SphereField& f);

/// Node-weight quadrature Σ node_weight·g over active nodes inside the region,
/// pairwise summation in node order. Throws ContractError when the region
/// contains no active node.
double integrate(const ScalarField& g, const Region& region = Region::whole());

}  // namespace sphereflow
