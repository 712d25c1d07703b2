#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace tsplit {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }

enum class BoundaryTag { left, right, bottom, top };

std::string to_string(BoundaryTag tag);

/// A boundary edge of the triangulation.  The edge is stored so that
/// walking from edge[0] to edge[1] follows the tangent.
struct BoundaryFacet {
  std::array<int, 2> edge{};
  BoundaryTag tag = BoundaryTag::bottom;
  Point normal;   // unit outward normal
  Point tangent;  // normal rotated by +90 degrees
  int triangle = -1;
};

/// Dimensions of the rectangle [0, width] x [0, height].
struct Extent {
  double width = 1.0;
  double height = 1.0;
};

/// Conforming triangulation of an axis-aligned rectangle.  Immutable after
/// construction.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<BoundaryFacet> boundary_facets;
  Extent extent;
  double h_max = 0.0;  // largest triangle diameter
  double h_min = 0.0;  // shortest edge

  [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices.size()); }
  [[nodiscard]] int num_triangles() const { return static_cast<int>(triangles.size()); }
  [[nodiscard]] double signed_area(int t) const;
};

/// Structured mesh of nx * ny cells, each split along the lower-left to
/// upper-right diagonal.  Throws std::invalid_argument on bad input.
Mesh build_rect_mesh(int nx, int ny, Extent extent = {});

struct MeshSize {
  double h_max;
  double h_min;
};

MeshSize mesh_size(const Mesh& mesh);

/// Plain-text dump: vertices ("x y"), triangles ("i j k"), facets ("i j tag"),
/// each block preceded by a count line.
void write_mesh(const Mesh& mesh, std::ostream& os);

}  // namespace tsplit
