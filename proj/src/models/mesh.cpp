#include "stamp/models/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "stamp/util/error.hpp"

namespace stamp::models {

double Mesh::triangle_area(int t) const {
  auto [a, b, c] = triangles[t];
  return 0.5 * ((x[b] - x[a]) * (y[c] - y[a]) - (x[c] - x[a]) * (y[b] - y[a]));
}

double Mesh::total_area() const {
  double s = 0.0;
  for (int t = 0; t < n_triangles(); ++t) s += triangle_area(t);
  return s;
}

std::vector<double> Mesh::vertex_volumes() const {
  std::vector<double> vol(n_vertices(), 0.0);
  for (int t = 0; t < n_triangles(); ++t) {
    double third = triangle_area(t) / 3.0;
    for (int v : triangles[t]) vol[v] += third;
  }
  return vol;
}

sparse::SparseSym Mesh::edge_structure() const {
  std::vector<int> is, js;
  for (auto& tri : triangles)
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      is.push_back(std::max(a, b));
      js.push_back(std::min(a, b));
    }
  return sparse::strict_lower(sparse::sym_from_triplets(n_vertices(), is, js, {}, false));
}

void Mesh::build_grid() const {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (int v = 0; v < n_vertices(); ++v) {
    x0 = std::min(x0, x[v]);
    x1 = std::max(x1, x[v]);
    y0 = std::min(y0, y[v]);
    y1 = std::max(y1, y[v]);
  }
  gcells_ = std::max(1, int(std::sqrt(double(std::max(1, n_triangles())))));
  gx0_ = x0;
  gy0_ = y0;
  gw_ = std::max(x1 - x0, y1 - y0) / gcells_ + 1e-12;
  grid_.assign(size_t(gcells_) * gcells_, {});
  for (int t = 0; t < n_triangles(); ++t) {
    auto [a, b, c] = triangles[t];
    double tx0 = std::min({x[a], x[b], x[c]}), tx1 = std::max({x[a], x[b], x[c]});
    double ty0 = std::min({y[a], y[b], y[c]}), ty1 = std::max({y[a], y[b], y[c]});
    int cx0 = std::clamp(int((tx0 - gx0_) / gw_), 0, gcells_ - 1);
    int cx1 = std::clamp(int((tx1 - gx0_) / gw_), 0, gcells_ - 1);
    int cy0 = std::clamp(int((ty0 - gy0_) / gw_), 0, gcells_ - 1);
    int cy1 = std::clamp(int((ty1 - gy0_) / gw_), 0, gcells_ - 1);
    for (int cx = cx0; cx <= cx1; ++cx)
      for (int cy = cy0; cy <= cy1; ++cy) grid_[size_t(cx) * gcells_ + cy].push_back(t);
  }
}

std::optional<Mesh::Location> Mesh::locate(double px, double py) const {
  if (grid_.empty()) build_grid();
  int cx = int((px - gx0_) / gw_), cy = int((py - gy0_) / gw_);
  if (cx < 0 || cy < 0 || cx >= gcells_ || cy >= gcells_) return std::nullopt;
  const double tol = -1e-12;
  for (int t : grid_[size_t(cx) * gcells_ + cy]) {
    auto [a, b, c] = triangles[t];
    double area = triangle_area(t);
    double w0 = 0.5 * ((x[b] - px) * (y[c] - py) - (x[c] - px) * (y[b] - py)) / area;
    double w1 = 0.5 * ((x[c] - px) * (y[a] - py) - (x[a] - px) * (y[c] - py)) / area;
    double w2 = 1.0 - w0 - w1;
    if (w0 >= tol && w1 >= tol && w2 >= tol) {
      Location loc;
      loc.triangle = t;
      loc.bary = {std::max(0.0, w0), std::max(0.0, w1), std::max(0.0, w2)};
      double s = loc.bary[0] + loc.bary[1] + loc.bary[2];
      for (auto& w : loc.bary) w /= s;
      return loc;
    }
  }
  return std::nullopt;
}

void Mesh::validate() const {
  std::map<std::pair<int, int>, int> edge_count;
  for (int t = 0; t < n_triangles(); ++t) {
    if (!(triangle_area(t) > 0.0)) throw ValidationError("triangle not positively oriented");
    auto& tri = triangles[t];
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      if (a < 0 || b < 0 || a >= n_vertices() || b >= n_vertices())
        throw ValidationError("triangle vertex out of range");
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (auto& [e, c] : edge_count)
    if (c > 2) throw ValidationError("edge shared by more than two triangles");
}

namespace {

struct Tri {
  int a, b, c;
  double cx, cy, r2;  // circumcircle
};

Tri make_tri(const std::vector<double>& xs, const std::vector<double>& ys, int a, int b,
             int c) {
  double ax = xs[a], ay = ys[a], bx = xs[b], by = ys[b], cx = xs[c], cy = ys[c];
  double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  double ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) +
               (cx * cx + cy * cy) * (ay - by)) /
              d;
  double uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) +
               (cx * cx + cy * cy) * (bx - ax)) /
              d;
  Tri t{a, b, c, ux, uy, 0.0};
  double dx = ux - ax, dy = uy - ay;
  t.r2 = dx * dx + dy * dy;
  return t;
}

}  // namespace

Mesh delaunay(const std::vector<double>& xs_in, const std::vector<double>& ys_in) {
  int n = int(xs_in.size());
  if (n < 3 || ys_in.size() != xs_in.size())
    throw ValidationError("delaunay needs at least three points");
  std::vector<double> xs = xs_in, ys = ys_in;
  // super-triangle
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (int i = 0; i < n; ++i) {
    x0 = std::min(x0, xs[i]);
    x1 = std::max(x1, xs[i]);
    y0 = std::min(y0, ys[i]);
    y1 = std::max(y1, ys[i]);
  }
  double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  double span = std::max(x1 - x0, y1 - y0) * 20.0 + 1.0;
  xs.push_back(cx - span);
  ys.push_back(cy - span * 0.7);
  xs.push_back(cx + span);
  ys.push_back(cy - span * 0.7);
  xs.push_back(cx);
  ys.push_back(cy + span);

  std::vector<Tri> tris{make_tri(xs, ys, n, n + 1, n + 2)};
  for (int p = 0; p < n; ++p) {
    double px = xs[p], py = ys[p];
    std::vector<int> bad;
    for (int t = 0; t < int(tris.size()); ++t) {
      double dx = px - tris[t].cx, dy = py - tris[t].cy;
      if (dx * dx + dy * dy <= tris[t].r2 * (1.0 + 1e-12)) bad.push_back(t);
    }
    // boundary polygon of the cavity: edges of bad triangles not shared twice
    std::map<std::pair<int, int>, std::pair<int, int>> edges;  // sorted -> oriented
    for (int t : bad) {
      int vs[3] = {tris[t].a, tris[t].b, tris[t].c};
      for (int e = 0; e < 3; ++e) {
        int a = vs[e], b = vs[(e + 1) % 3];
        auto key = std::minmax(a, b);
        auto it = edges.find({key.first, key.second});
        if (it == edges.end())
          edges[{key.first, key.second}] = {a, b};
        else
          edges.erase(it);
      }
    }
    for (int i = int(bad.size()) - 1; i >= 0; --i) {
      tris[bad[i]] = tris.back();
      tris.pop_back();
    }
    for (auto& [key, e] : edges) tris.push_back(make_tri(xs, ys, e.first, e.second, p));
  }

  Mesh mesh;
  mesh.x = xs_in;
  mesh.y = ys_in;
  for (auto& t : tris) {
    if (t.a >= n || t.b >= n || t.c >= n) continue;  // touches the super-triangle
    std::array<int, 3> tri{t.a, t.b, t.c};
    double area = 0.5 * ((xs[t.b] - xs[t.a]) * (ys[t.c] - ys[t.a]) -
                         (xs[t.c] - xs[t.a]) * (ys[t.b] - ys[t.a]));
    if (area < 0) std::swap(tri[1], tri[2]);
    mesh.triangles.push_back(tri);
  }
  std::sort(mesh.triangles.begin(), mesh.triangles.end());
  mesh.validate();
  return mesh;
}

Mesh make_disc_mesh_n(double radius, int n_vertices) {
  if (!(radius > 0.0) || n_vertices < 4)
    throw ValidationError("disc mesh needs radius > 0 and at least 4 vertices");
  const double golden = 2.3999632297286533222;
  std::vector<double> xs(n_vertices), ys(n_vertices);
  for (int i = 0; i < n_vertices; ++i) {
    double r = radius * std::sqrt((i + 0.5) / n_vertices);
    double a = golden * i;
    xs[i] = r * std::cos(a);
    ys[i] = r * std::sin(a);
  }
  return delaunay(xs, ys);
}

Mesh make_disc_mesh(double radius, double target_edge_length) {
  if (!(radius > 0.0) || !(target_edge_length > 0.0))
    throw ValidationError("disc mesh needs positive radius and edge length");
  double h = std::min(target_edge_length, 2.0 * radius);
  int n = std::max(4, int(std::lround(2.0 * M_PI * radius * radius /
                                      (std::sqrt(3.0) * h * h))));
  return make_disc_mesh_n(radius, n);
}

}  // namespace stamp::models
