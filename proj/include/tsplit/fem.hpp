#pragma once

#include "tsplit/mesh.hpp"
#include "tsplit/sparse.hpp"

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tsplit {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Quadrature point on a triangle in barycentric coordinates; weights sum to 1
/// and are scaled by the triangle area at use.
struct TriangleQuadPoint {
  std::array<double, 3> bary;
  double weight;
};

/// Gauss point on the unit interval.
struct EdgeQuadPoint {
  double s;
  double weight;
};

/// Six-point rule, exact for degree four.
std::span<const TriangleQuadPoint> triangle_rule();
/// Three-point Gauss rule, exact for degree five.
std::span<const EdgeQuadPoint> edge_rule();
/// Collapsed 6x6 Gauss product rule, exact for degree ten; used for error
/// norms of non-polynomial fields.
std::span<const TriangleQuadPoint> error_rule();

/// Affine triangle data: area and the constant barycentric gradients.
struct TriangleGeometry {
  double area = 0.0;
  std::array<Vec2, 3> grad_bary{};
  std::array<Point, 3> corners{};

  [[nodiscard]] Point map(const std::array<double, 3>& bary) const;
};

TriangleGeometry triangle_geometry(const Mesh& mesh, int t);

/// Local quadratic basis on a triangle: vertices 0..2, then edge midpoints
/// (0,1), (1,2), (2,0).
struct P2Eval {
  std::array<double, 6> value;
  std::array<Vec2, 6> grad;
};

P2Eval eval_p2(const TriangleGeometry& g, const std::array<double, 3>& bary);

enum class SpaceKind { velocity, pressure, gauge };

/// Degree-of-freedom layout of the Taylor-Hood pair.
///
/// Scalar quadratic nodes are the mesh vertices followed by the edge
/// midpoints.  A velocity dof is component * num_p2_nodes() + node.  The
/// pressure space uses the vertices directly.  The gauge space is the pressure
/// space with every boundary vertex removed.
class SpacePair {
 public:
  explicit SpacePair(const Mesh& mesh);

  [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
  [[nodiscard]] int num_p2_nodes() const { return num_vertices_ + num_edges_; }
  [[nodiscard]] int num_edges() const { return num_edges_; }
  [[nodiscard]] int velocity_dim() const { return 2 * num_p2_nodes(); }
  [[nodiscard]] int pressure_dim() const { return num_vertices_; }
  [[nodiscard]] int gauge_dim() const { return static_cast<int>(gauge_free_.size()); }
  [[nodiscard]] int dim(SpaceKind kind) const;

  [[nodiscard]] int velocity_dof(int component, int node) const { return component * num_p2_nodes() + node; }
  [[nodiscard]] const std::array<int, 6>& cell_nodes(int t) const { return cell_nodes_[t]; }
  [[nodiscard]] const std::array<int, 2>& edge_vertices(int e) const { return edge_vertices_[e]; }
  [[nodiscard]] Point node_point(int node) const;

  /// True for vertices on the boundary (the constrained part of the gauge space).
  [[nodiscard]] const std::vector<bool>& boundary_vertex_mask() const { return boundary_vertex_; }
  [[nodiscard]] const std::vector<bool>& boundary_p2_mask() const { return boundary_p2_node_; }
  [[nodiscard]] std::span<const int> gauge_free_dofs() const { return gauge_free_; }
  /// Velocity dofs not on the boundary (used by the no-slip variants).
  [[nodiscard]] std::span<const int> interior_velocity_dofs() const { return interior_velocity_; }

  /// Local position (0..2) of a vertex within triangle t, or -1.
  [[nodiscard]] int local_vertex(int t, int vertex) const;

 private:
  const Mesh* mesh_;
  int num_vertices_ = 0;
  int num_edges_ = 0;
  std::vector<std::array<int, 6>> cell_nodes_;
  std::vector<std::array<int, 2>> edge_vertices_;
  std::vector<bool> boundary_vertex_;
  std::vector<bool> boundary_p2_node_;
  std::vector<int> gauge_free_;
  std::vector<int> interior_velocity_;
};

struct DiscreteField {
  SpaceKind space = SpaceKind::velocity;
  Vector values;
};

/// Every matrix used by the schemes.  Stiffness matrices carry no Reynolds
/// number; the schemes scale them.
struct OperatorSet {
  CsrMatrix mass_velocity;     // (v, w)
  CsrMatrix stiffness_grad;    // (grad v, grad w)
  CsrMatrix stiffness_sym;     // (eps(v), eps(w)), eps = sym grad
  CsrMatrix grad_div;          // (div v, div w)
  CsrMatrix divergence;        // rows pressure, cols velocity: (z_i, div v_j)
  CsrMatrix laplace_pressure;  // (grad phi, grad z)
  CsrMatrix mass_pressure;     // (phi, z)
  CsrMatrix h1_pressure;       // mass + laplace
  CsrMatrix boundary_coupling; // rows velocity, cols pressure: <n.grad phi_j, div_G v_i>
  CsrMatrix velocity_gradient; // rows pressure, cols velocity: (v_j, grad z_i)
};

OperatorSet assemble_operators(const SpacePair& spaces);

/// Selects the viscous form: (grad v, grad w) for open boundaries,
/// (eps(v), eps(w)) for traction boundaries.
enum class StressForm { open, traction };

std::string to_string(StressForm form);
StressForm parse_stress_form(const std::string& name);

[[nodiscard]] inline const CsrMatrix& viscous_stiffness(const OperatorSet& ops, StressForm form) {
  return form == StressForm::open ? ops.stiffness_grad : ops.stiffness_sym;
}

using VectorFunction = std::function<Vec2(double t, Point x)>;
using ScalarFunction = std::function<double(double t, Point x)>;
/// Boundary data; receives the unit outward normal of the facet.
using BoundaryFunction = std::function<Vec2(double t, Point x, Point normal)>;

/// Entries (f(t), v_i).
Vector assemble_load(const VectorFunction& f, double t, const SpacePair& spaces);
/// Entries <g(t), v_i> over the whole boundary.
Vector assemble_boundary_load(const BoundaryFunction& g, double t, const SpacePair& spaces);
/// Entries (s(t), z_i) over the pressure space.
Vector assemble_scalar_load(const ScalarFunction& s, double t, const SpacePair& spaces);

/// L2 projections.  The mass solves use the supplied solver settings.
DiscreteField l2_project_velocity(const VectorFunction& u, double t, const SpacePair& spaces,
                                  const OperatorSet& ops, const SolverConfig& config = {});
DiscreteField l2_project_pressure(const ScalarFunction& p, double t, const SpacePair& spaces,
                                  const OperatorSet& ops, const SolverConfig& config = {});

/// Nodal interpolants (used by tests and the field dump).
Vector interpolate_velocity(const std::function<Vec2(Point)>& u, const SpacePair& spaces);
Vector interpolate_pressure(const std::function<double(Point)>& p, const SpacePair& spaces);

/// Restriction to the free (interior) gauge dofs and prolongation by zero.
CsrMatrix restrict_to_gauge(const CsrMatrix& pressure_matrix, const SpacePair& spaces);
Vector restrict_to_gauge(const Vector& pressure_vector, const SpacePair& spaces);
Vector prolong_from_gauge(const Vector& gauge_vector, const SpacePair& spaces);

/// Field values and gradients at a point of triangle t.
struct VelocitySample {
  Vec2 value;
  std::array<Vec2, 2> grad;  // grad[c] = gradient of component c
};
VelocitySample sample_velocity(const Vector& u, const SpacePair& spaces, int t, const P2Eval& basis);
double sample_pressure(const Vector& p, int t, const SpacePair& spaces, const std::array<double, 3>& bary);

/// Mesh, spaces and assembled operators for one rectangle discretization.
/// Owns the mesh so that the space handle stays valid when moved.
class Discretization {
 public:
  Discretization(int nx, int ny, Extent extent = {});

  [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
  [[nodiscard]] const SpacePair& spaces() const { return *spaces_; }
  [[nodiscard]] const OperatorSet& operators() const { return ops_; }
  [[nodiscard]] int nx() const { return nx_; }
  [[nodiscard]] int ny() const { return ny_; }

 private:
  int nx_;
  int ny_;
  std::unique_ptr<Mesh> mesh_;
  std::unique_ptr<SpacePair> spaces_;
  OperatorSet ops_;
};

}  // namespace tsplit
