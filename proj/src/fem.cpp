#include "tsplit/fem.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace tsplit {

namespace {

constexpr double kA1 = 0.445948490915964886318;
constexpr double kB1 = 1.0 - 2.0 * kA1;
constexpr double kW1 = 0.223381589678011465944;
constexpr double kA2 = 0.091576213509770743460;
constexpr double kB2 = 1.0 - 2.0 * kA2;
constexpr double kW2 = 0.109951743655321867389;

constexpr std::array<TriangleQuadPoint, 6> kTriangleRule{{
    {{kA1, kA1, kB1}, kW1},
    {{kA1, kB1, kA1}, kW1},
    {{kB1, kA1, kA1}, kW1},
    {{kA2, kA2, kB2}, kW2},
    {{kA2, kB2, kA2}, kW2},
    {{kB2, kA2, kA2}, kW2},
}};

// 0.5 * sqrt(3/5)
constexpr double kGaussOffset = 0.387298334620741688518;
constexpr std::array<EdgeQuadPoint, 3> kEdgeRule{{
    {0.5 - kGaussOffset, 5.0 / 18.0},
    {0.5, 8.0 / 18.0},
    {0.5 + kGaussOffset, 5.0 / 18.0},
}};

constexpr std::array<std::array<int, 2>, 3> kLocalEdges{{{0, 1}, {1, 2}, {2, 0}}};

double comp(const Vec2& v, int c) { return c == 0 ? v.x : v.y; }
double dot2(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
double dot2(const Vec2& a, const Point& b) { return a.x * b.x + a.y * b.y; }

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (hi << 32) | lo;
}

// Barycentric coordinates of the point at parameter s along the facet.
std::array<double, 3> facet_bary(int local_a, int local_b, double s) {
  std::array<double, 3> bary{0.0, 0.0, 0.0};
  bary[local_a] = 1.0 - s;
  bary[local_b] = s;
  return bary;
}

}  // namespace

std::span<const TriangleQuadPoint> triangle_rule() { return kTriangleRule; }
std::span<const EdgeQuadPoint> edge_rule() { return kEdgeRule; }

std::span<const TriangleQuadPoint> error_rule() {
  static const std::vector<TriangleQuadPoint> rule = [] {
    // Golub-Welsch nodes and weights of the 6-point Gauss-Legendre rule.
    constexpr int n = 6;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) jacobi(i, i - 1) = jacobi(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    std::vector<std::pair<double, double>> line;
    for (int i = 0; i < n; ++i) {
      const double v0 = es.eigenvectors()(0, i);
      line.emplace_back(0.5 * (es.eigenvalues()(i) + 1.0), v0 * v0);  // weights sum to 1 on [0, 1]
    }
    std::vector<TriangleQuadPoint> out;
    for (const auto& [xi, wx] : line) {
      for (const auto& [eta, wy] : line) {
        const double l1 = xi;
        const double l2 = eta * (1.0 - xi);
        out.push_back({{1.0 - l1 - l2, l1, l2}, 2.0 * wx * wy * (1.0 - xi)});
      }
    }
    return out;
  }();
  return rule;
}

Point TriangleGeometry::map(const std::array<double, 3>& bary) const {
  return {bary[0] * corners[0].x + bary[1] * corners[1].x + bary[2] * corners[2].x,
          bary[0] * corners[0].y + bary[1] * corners[1].y + bary[2] * corners[2].y};
}

TriangleGeometry triangle_geometry(const Mesh& mesh, int t) {
  TriangleGeometry g;
  const auto& tri = mesh.triangles[t];
  for (int i = 0; i < 3; ++i) g.corners[i] = mesh.vertices[tri[i]];
  const double twice_area = (g.corners[1].x - g.corners[0].x) * (g.corners[2].y - g.corners[0].y) -
                            (g.corners[2].x - g.corners[0].x) * (g.corners[1].y - g.corners[0].y);
  g.area = 0.5 * twice_area;
  // grad(lambda_i) = rot(edge opposite to i) / (2 area)
  for (int i = 0; i < 3; ++i) {
    const Point& pj = g.corners[(i + 1) % 3];
    const Point& pk = g.corners[(i + 2) % 3];
    g.grad_bary[i] = {(pj.y - pk.y) / twice_area, (pk.x - pj.x) / twice_area};
  }
  return g;
}

P2Eval eval_p2(const TriangleGeometry& g, const std::array<double, 3>& bary) {
  P2Eval e{};
  for (int i = 0; i < 3; ++i) {
    e.value[i] = bary[i] * (2.0 * bary[i] - 1.0);
    const double s = 4.0 * bary[i] - 1.0;
    e.grad[i] = {s * g.grad_bary[i].x, s * g.grad_bary[i].y};
  }
  for (int k = 0; k < 3; ++k) {
    const int a = kLocalEdges[k][0];
    const int b = kLocalEdges[k][1];
    e.value[3 + k] = 4.0 * bary[a] * bary[b];
    e.grad[3 + k] = {4.0 * (bary[a] * g.grad_bary[b].x + bary[b] * g.grad_bary[a].x),
                     4.0 * (bary[a] * g.grad_bary[b].y + bary[b] * g.grad_bary[a].y)};
  }
  return e;
}

// ---------------------------------------------------------------------------
// SpacePair

SpacePair::SpacePair(const Mesh& mesh) : mesh_(&mesh), num_vertices_(mesh.num_vertices()) {
  std::unordered_map<std::uint64_t, int> edges;
  edges.reserve(static_cast<std::size_t>(3) * mesh.triangles.size());
  cell_nodes_.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    auto& nodes = cell_nodes_[t];
    for (int i = 0; i < 3; ++i) nodes[i] = tri[i];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[kLocalEdges[k][0]];
      const int b = tri[kLocalEdges[k][1]];
      const auto [it, inserted] = edges.try_emplace(edge_key(a, b), num_edges_);
      if (inserted) {
        edge_vertices_.push_back({std::min(a, b), std::max(a, b)});
        ++num_edges_;
      }
      nodes[3 + k] = num_vertices_ + it->second;
    }
  }

  boundary_vertex_.assign(num_vertices_, false);
  boundary_p2_node_.assign(num_p2_nodes(), false);
  for (const auto& f : mesh.boundary_facets) {
    boundary_vertex_[f.edge[0]] = true;
    boundary_vertex_[f.edge[1]] = true;
    boundary_p2_node_[f.edge[0]] = true;
    boundary_p2_node_[f.edge[1]] = true;
    boundary_p2_node_[num_vertices_ + edges.at(edge_key(f.edge[0], f.edge[1]))] = true;
  }
  for (int v = 0; v < num_vertices_; ++v) {
    if (!boundary_vertex_[v]) gauge_free_.push_back(v);
  }
  for (int c = 0; c < 2; ++c) {
    for (int n = 0; n < num_p2_nodes(); ++n) {
      if (!boundary_p2_node_[n]) interior_velocity_.push_back(velocity_dof(c, n));
    }
  }
}

int SpacePair::dim(SpaceKind kind) const {
  switch (kind) {
    case SpaceKind::velocity:
      return velocity_dim();
    case SpaceKind::pressure:
      return pressure_dim();
    case SpaceKind::gauge:
      return gauge_dim();
  }
  return 0;
}

Point SpacePair::node_point(int node) const {
  if (node < num_vertices_) return mesh_->vertices[node];
  const auto& e = edge_vertices_[node - num_vertices_];
  return 0.5 * (mesh_->vertices[e[0]] + mesh_->vertices[e[1]]);
}

int SpacePair::local_vertex(int t, int vertex) const {
  const auto& tri = mesh_->triangles[t];
  for (int i = 0; i < 3; ++i) {
    if (tri[i] == vertex) return i;
  }
  return -1;
}

std::string to_string(StressForm form) { return form == StressForm::open ? "open" : "traction"; }

StressForm parse_stress_form(const std::string& name) {
  if (name == "open") return StressForm::open;
  if (name == "traction") return StressForm::traction;
  throw std::invalid_argument("unknown stress form '" + name + "' (expected open or traction)");
}

// ---------------------------------------------------------------------------
// Assembly

OperatorSet assemble_operators(const SpacePair& spaces) {
  const Mesh& mesh = spaces.mesh();
  const int nu = spaces.velocity_dim();
  const int np = spaces.pressure_dim();
  const std::size_t nt = mesh.triangles.size();

  std::vector<Triplet> mass_u, stiff_grad, stiff_sym, grad_div, div, grad_z, lap_p, mass_p, h1_p, coupling;
  mass_u.reserve(nt * 72);
  stiff_grad.reserve(nt * 72);
  stiff_sym.reserve(nt * 144);
  grad_div.reserve(nt * 144);
  div.reserve(nt * 36);
  grad_z.reserve(nt * 36);
  lap_p.reserve(nt * 9);
  mass_p.reserve(nt * 9);
  h1_p.reserve(nt * 9);

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const TriangleGeometry g = triangle_geometry(mesh, t);
    const auto& nodes = spaces.cell_nodes(t);

    double m[6][6] = {};
    double k[6][6] = {};
    // cross[a][b][c][d] = d_c phi_a * d_d phi_b
    double cross[6][6][2][2] = {};
    double bdiv[3][6][2] = {};   // (lambda_i, d_d phi_b)
    double cgrad[3][6][2] = {};  // (phi_b, d_d lambda_i)
    double mp[3][3] = {};

    for (const auto& qp : triangle_rule()) {
      const double w = qp.weight * g.area;
      const P2Eval e = eval_p2(g, qp.bary);
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          m[a][b] += w * e.value[a] * e.value[b];
          k[a][b] += w * dot2(e.grad[a], e.grad[b]);
          for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d) cross[a][b][c][d] += w * comp(e.grad[a], c) * comp(e.grad[b], d);
        }
      }
      for (int i = 0; i < 3; ++i) {
        for (int b = 0; b < 6; ++b) {
          for (int d = 0; d < 2; ++d) {
            bdiv[i][b][d] += w * qp.bary[i] * comp(e.grad[b], d);
            cgrad[i][b][d] += w * e.value[b] * comp(g.grad_bary[i], d);
          }
        }
        for (int j = 0; j < 3; ++j) mp[i][j] += w * qp.bary[i] * qp.bary[j];
      }
    }

    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        for (int c = 0; c < 2; ++c) {
          const int row = spaces.velocity_dof(c, nodes[a]);
          mass_u.push_back({row, spaces.velocity_dof(c, nodes[b]), m[a][b]});
          stiff_grad.push_back({row, spaces.velocity_dof(c, nodes[b]), k[a][b]});
          for (int d = 0; d < 2; ++d) {
            const int col = spaces.velocity_dof(d, nodes[b]);
            // eps(phi_a e_c) : eps(phi_b e_d) = (delta_cd grad.grad + d_d phi_a d_c phi_b) / 2
            const double sym = 0.5 * ((c == d ? k[a][b] : 0.0) + cross[a][b][d][c]);
            stiff_sym.push_back({row, col, sym});
            grad_div.push_back({row, col, cross[a][b][c][d]});
          }
        }
      }
    }
    for (int i = 0; i < 3; ++i) {
      for (int b = 0; b < 6; ++b) {
        for (int d = 0; d < 2; ++d) {
          div.push_back({nodes[i], spaces.velocity_dof(d, nodes[b]), bdiv[i][b][d]});
          grad_z.push_back({nodes[i], spaces.velocity_dof(d, nodes[b]), cgrad[i][b][d]});
        }
      }
      for (int j = 0; j < 3; ++j) {
        const double l = g.area * dot2(g.grad_bary[i], g.grad_bary[j]);
        lap_p.push_back({nodes[i], nodes[j], l});
        mass_p.push_back({nodes[i], nodes[j], mp[i][j]});
        h1_p.push_back({nodes[i], nodes[j], mp[i][j] + l});
      }
    }
  }

  // Boundary coupling <n.grad phi_j, t^T (grad v_i) t> with the one-sided
  // gradients of the owning triangle.
  for (const auto& f : mesh.boundary_facets) {
    const int t = f.triangle;
    const TriangleGeometry g = triangle_geometry(mesh, t);
    const auto& nodes = spaces.cell_nodes(t);
    const int la = spaces.local_vertex(t, f.edge[0]);
    const int lb = spaces.local_vertex(t, f.edge[1]);
    const double length = std::hypot(mesh.vertices[f.edge[1]].x - mesh.vertices[f.edge[0]].x,
                                     mesh.vertices[f.edge[1]].y - mesh.vertices[f.edge[0]].y);
    double normal_grad[3];
    for (int j = 0; j < 3; ++j) normal_grad[j] = dot2(g.grad_bary[j], f.normal);
    double s_local[6][2][3] = {};
    for (const auto& qp : edge_rule()) {
      const double w = qp.weight * length;
      const P2Eval e = eval_p2(g, facet_bary(la, lb, qp.s));
      for (int a = 0; a < 6; ++a) {
        const double tangential = dot2(e.grad[a], f.tangent);
        for (int c = 0; c < 2; ++c) {
          const double surf_div = (c == 0 ? f.tangent.x : f.tangent.y) * tangential;
          for (int j = 0; j < 3; ++j) s_local[a][c][j] += w * surf_div * normal_grad[j];
        }
      }
    }
    for (int a = 0; a < 6; ++a)
      for (int c = 0; c < 2; ++c)
        for (int j = 0; j < 3; ++j) coupling.push_back({spaces.velocity_dof(c, nodes[a]), nodes[j], s_local[a][c][j]});
  }

  OperatorSet ops;
  ops.mass_velocity = CsrMatrix::from_triplets(nu, nu, std::move(mass_u));
  ops.stiffness_grad = CsrMatrix::from_triplets(nu, nu, std::move(stiff_grad));
  ops.stiffness_sym = CsrMatrix::from_triplets(nu, nu, std::move(stiff_sym));
  ops.grad_div = CsrMatrix::from_triplets(nu, nu, std::move(grad_div));
  ops.divergence = CsrMatrix::from_triplets(np, nu, std::move(div));
  ops.velocity_gradient = CsrMatrix::from_triplets(np, nu, std::move(grad_z));
  ops.laplace_pressure = CsrMatrix::from_triplets(np, np, std::move(lap_p));
  ops.mass_pressure = CsrMatrix::from_triplets(np, np, std::move(mass_p));
  ops.h1_pressure = CsrMatrix::from_triplets(np, np, std::move(h1_p));
  ops.boundary_coupling = CsrMatrix::from_triplets(nu, np, std::move(coupling));
  return ops;
}

Vector assemble_load(const VectorFunction& f, double t, const SpacePair& spaces) {
  const Mesh& mesh = spaces.mesh();
  Vector load = Vector::Zero(spaces.velocity_dim());
  for (int tri = 0; tri < mesh.num_triangles(); ++tri) {
    const TriangleGeometry g = triangle_geometry(mesh, tri);
    const auto& nodes = spaces.cell_nodes(tri);
    for (const auto& qp : triangle_rule()) {
      const double w = qp.weight * g.area;
      const Vec2 fv = f(t, g.map(qp.bary));
      const P2Eval e = eval_p2(g, qp.bary);
      for (int a = 0; a < 6; ++a) {
        load[spaces.velocity_dof(0, nodes[a])] += w * e.value[a] * fv.x;
        load[spaces.velocity_dof(1, nodes[a])] += w * e.value[a] * fv.y;
      }
    }
  }
  return load;
}

Vector assemble_boundary_load(const BoundaryFunction& gfun, double t, const SpacePair& spaces) {
  const Mesh& mesh = spaces.mesh();
  Vector load = Vector::Zero(spaces.velocity_dim());
  for (const auto& f : mesh.boundary_facets) {
    const TriangleGeometry g = triangle_geometry(mesh, f.triangle);
    const auto& nodes = spaces.cell_nodes(f.triangle);
    const int la = spaces.local_vertex(f.triangle, f.edge[0]);
    const int lb = spaces.local_vertex(f.triangle, f.edge[1]);
    const Point p0 = mesh.vertices[f.edge[0]];
    const Point p1 = mesh.vertices[f.edge[1]];
    const double length = std::hypot(p1.x - p0.x, p1.y - p0.y);
    for (const auto& qp : edge_rule()) {
      const double w = qp.weight * length;
      const Point x = p0 + qp.s * (p1 - p0);
      const Vec2 gv = gfun(t, x, f.normal);
      const P2Eval e = eval_p2(g, facet_bary(la, lb, qp.s));
      for (int a = 0; a < 6; ++a) {
        load[spaces.velocity_dof(0, nodes[a])] += w * e.value[a] * gv.x;
        load[spaces.velocity_dof(1, nodes[a])] += w * e.value[a] * gv.y;
      }
    }
  }
  return load;
}

Vector assemble_scalar_load(const ScalarFunction& s, double t, const SpacePair& spaces) {
  const Mesh& mesh = spaces.mesh();
  Vector load = Vector::Zero(spaces.pressure_dim());
  for (int tri = 0; tri < mesh.num_triangles(); ++tri) {
    const TriangleGeometry g = triangle_geometry(mesh, tri);
    const auto& v = mesh.triangles[tri];
    for (const auto& qp : triangle_rule()) {
      const double w = qp.weight * g.area * s(t, g.map(qp.bary));
      for (int i = 0; i < 3; ++i) load[v[i]] += w * qp.bary[i];
    }
  }
  return load;
}

DiscreteField l2_project_velocity(const VectorFunction& u, double t, const SpacePair& spaces,
                                  const OperatorSet& ops, const SolverConfig& config) {
  return {SpaceKind::velocity, solve_spd(ops.mass_velocity, assemble_load(u, t, spaces), config).x};
}

DiscreteField l2_project_pressure(const ScalarFunction& p, double t, const SpacePair& spaces,
                                  const OperatorSet& ops, const SolverConfig& config) {
  return {SpaceKind::pressure, solve_spd(ops.mass_pressure, assemble_scalar_load(p, t, spaces), config).x};
}

Vector interpolate_velocity(const std::function<Vec2(Point)>& u, const SpacePair& spaces) {
  Vector c(spaces.velocity_dim());
  for (int n = 0; n < spaces.num_p2_nodes(); ++n) {
    const Vec2 v = u(spaces.node_point(n));
    c[spaces.velocity_dof(0, n)] = v.x;
    c[spaces.velocity_dof(1, n)] = v.y;
  }
  return c;
}

Vector interpolate_pressure(const std::function<double(Point)>& p, const SpacePair& spaces) {
  Vector c(spaces.pressure_dim());
  for (int v = 0; v < spaces.pressure_dim(); ++v) c[v] = p(spaces.node_point(v));
  return c;
}

CsrMatrix restrict_to_gauge(const CsrMatrix& pressure_matrix, const SpacePair& spaces) {
  if (pressure_matrix.rows() != spaces.pressure_dim() || pressure_matrix.cols() != spaces.pressure_dim()) {
    throw std::invalid_argument("restrict_to_gauge: matrix is not over the pressure space");
  }
  return pressure_matrix.submatrix(spaces.gauge_free_dofs(), spaces.gauge_free_dofs());
}

Vector restrict_to_gauge(const Vector& pressure_vector, const SpacePair& spaces) {
  if (pressure_vector.size() != spaces.pressure_dim()) {
    throw std::invalid_argument("restrict_to_gauge: vector is not over the pressure space");
  }
  const auto free = spaces.gauge_free_dofs();
  Vector r(static_cast<Eigen::Index>(free.size()));
  for (std::size_t i = 0; i < free.size(); ++i) r[static_cast<Eigen::Index>(i)] = pressure_vector[free[i]];
  return r;
}

Vector prolong_from_gauge(const Vector& gauge_vector, const SpacePair& spaces) {
  const auto free = spaces.gauge_free_dofs();
  if (gauge_vector.size() != static_cast<Eigen::Index>(free.size())) {
    throw std::invalid_argument("prolong_from_gauge: vector is not over the gauge space");
  }
  Vector p = Vector::Zero(spaces.pressure_dim());
  for (std::size_t i = 0; i < free.size(); ++i) p[free[i]] = gauge_vector[static_cast<Eigen::Index>(i)];
  return p;
}

VelocitySample sample_velocity(const Vector& u, const SpacePair& spaces, int t, const P2Eval& basis) {
  VelocitySample s{};
  const auto& nodes = spaces.cell_nodes(t);
  for (int a = 0; a < 6; ++a) {
    const double ux = u[spaces.velocity_dof(0, nodes[a])];
    const double uy = u[spaces.velocity_dof(1, nodes[a])];
    s.value.x += ux * basis.value[a];
    s.value.y += uy * basis.value[a];
    s.grad[0].x += ux * basis.grad[a].x;
    s.grad[0].y += ux * basis.grad[a].y;
    s.grad[1].x += uy * basis.grad[a].x;
    s.grad[1].y += uy * basis.grad[a].y;
  }
  return s;
}

double sample_pressure(const Vector& p, int t, const SpacePair& spaces, const std::array<double, 3>& bary) {
  const auto& tri = spaces.mesh().triangles[t];
  return bary[0] * p[tri[0]] + bary[1] * p[tri[1]] + bary[2] * p[tri[2]];
}

Discretization::Discretization(int nx, int ny, Extent extent)
    : nx_(nx),
      ny_(ny),
      mesh_(std::make_unique<Mesh>(build_rect_mesh(nx, ny, extent))),
      spaces_(std::make_unique<SpacePair>(*mesh_)),
      ops_(assemble_operators(*spaces_)) {}

}  // namespace tsplit
