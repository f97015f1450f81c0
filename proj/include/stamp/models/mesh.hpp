#pragma once

#include <array>
#include <optional>
#include <vector>

#include "stamp/sparse/sparse_sym.hpp"

namespace stamp::models {

// Triangular mesh over a 2D domain. Triangles are positively oriented and
// every edge is shared by at most two triangles.
struct Mesh {
  std::vector<double> x, y;                  // vertex coordinates
  std::vector<std::array<int, 3>> triangles; // CCW vertex triples

  int n_vertices() const { return int(x.size()); }
  int n_triangles() const { return int(triangles.size()); }

  double triangle_area(int t) const;
  double total_area() const;

  // One third of the incident triangle area per vertex (the volume of the
  // unit-weight linear basis function).
  std::vector<double> vertex_volumes() const;

  // Vertex adjacency as a strictly-lower edge structure.
  sparse::SparseSym edge_structure() const;

  struct Location {
    int triangle = -1;
    std::array<double, 3> bary{};  // barycentric weights of the triangle
  };
  // Point location with a small tolerance at edges; nullopt when outside.
  std::optional<Location> locate(double px, double py) const;

  void validate() const;

 private:
  mutable std::vector<std::vector<int>> grid_;  // uniform point-location grid
  mutable double gx0_ = 0, gy0_ = 0, gw_ = 0;
  mutable int gcells_ = 0;
  void build_grid() const;
};

// Delaunay triangulation of an explicit point set (Bowyer-Watson);
// deterministic for fixed input.
Mesh delaunay(const std::vector<double>& xs, const std::vector<double>& ys);

// Quasi-uniform disc mesh: sunflower-spiral points triangulated by Delaunay.
// The vertex count follows from the target edge length.
Mesh make_disc_mesh(double radius, double target_edge_length);
Mesh make_disc_mesh_n(double radius, int n_vertices);

}  // namespace stamp::models
