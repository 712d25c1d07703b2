#include "tsplit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace tsplit {

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::left:
      return "left";
    case BoundaryTag::right:
      return "right";
    case BoundaryTag::bottom:
      return "bottom";
    case BoundaryTag::top:
      return "top";
  }
  return "unknown";
}

double Mesh::signed_area(int t) const {
  const auto& tri = triangles[t];
  const Point a = vertices[tri[0]];
  const Point b = vertices[tri[1]];
  const Point c = vertices[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

namespace {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

MeshSize mesh_size(const Mesh& mesh) {
  double h_max = 0.0;
  double h_min = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const double len = distance(mesh.vertices[tri[e]], mesh.vertices[tri[(e + 1) % 3]]);
      h_max = std::max(h_max, len);
      h_min = std::min(h_min, len);
    }
  }
  return {h_max, h_min};
}

Mesh build_rect_mesh(int nx, int ny, Extent extent) {
  if (nx < 1 || ny < 1) {
    throw std::invalid_argument("build_rect_mesh: cell counts must be at least 1");
  }
  if (!(extent.width > 0.0) || !(extent.height > 0.0)) {
    throw std::invalid_argument("build_rect_mesh: extent must have positive width and height");
  }

  Mesh mesh;
  mesh.extent = extent;
  const double dx = extent.width / nx;
  const double dy = extent.height / ny;
  const auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Pin the far edges to the exact extent so boundary checks are exact.
      const double x = (i == nx) ? extent.width : i * dx;
      const double y = (j == ny) ? extent.height : j * dy;
      mesh.vertices.push_back({x, y});
    }
  }

  mesh.triangles.reserve(static_cast<std::size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j);
      const int v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1);
      const int v11 = vid(i + 1, j + 1);
      mesh.triangles.push_back({v00, v10, v11});  // lower-right triangle
      mesh.triangles.push_back({v00, v11, v01});  // upper-left triangle
    }
  }

  const auto cell_lower = [nx](int i, int j) { return 2 * (j * nx + i); };
  const auto cell_upper = [nx](int i, int j) { return 2 * (j * nx + i) + 1; };

  // Facets are oriented counterclockwise around the rectangle so that the
  // tangent (normal rotated +90 degrees) points from edge[0] to edge[1].
  for (int i = 0; i < nx; ++i) {
    mesh.boundary_facets.push_back(
        {{vid(i, 0), vid(i + 1, 0)}, BoundaryTag::bottom, {0.0, -1.0}, {1.0, 0.0}, cell_lower(i, 0)});
  }
  for (int j = 0; j < ny; ++j) {
    mesh.boundary_facets.push_back(
        {{vid(nx, j), vid(nx, j + 1)}, BoundaryTag::right, {1.0, 0.0}, {0.0, 1.0}, cell_lower(nx - 1, j)});
  }
  for (int i = nx - 1; i >= 0; --i) {
    mesh.boundary_facets.push_back(
        {{vid(i + 1, ny), vid(i, ny)}, BoundaryTag::top, {0.0, 1.0}, {-1.0, 0.0}, cell_upper(i, ny - 1)});
  }
  for (int j = ny - 1; j >= 0; --j) {
    mesh.boundary_facets.push_back(
        {{vid(0, j + 1), vid(0, j)}, BoundaryTag::left, {-1.0, 0.0}, {0.0, -1.0}, cell_upper(0, j)});
  }

  const MeshSize hs = mesh_size(mesh);
  mesh.h_max = hs.h_max;
  mesh.h_min = hs.h_min;
  return mesh;
}

void write_mesh(const Mesh& mesh, std::ostream& os) {
  os << std::setprecision(17);
  os << mesh.vertices.size() << '\n';
  for (const auto& v : mesh.vertices) os << v.x << ' ' << v.y << '\n';
  os << mesh.triangles.size() << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << mesh.boundary_facets.size() << '\n';
  for (const auto& f : mesh.boundary_facets) {
    os << f.edge[0] << ' ' << f.edge[1] << ' ' << to_string(f.tag) << '\n';
  }
}

}  // namespace tsplit
