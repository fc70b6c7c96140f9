#include "hoi/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

namespace hoi {

TriMesh::TriMesh(PointSet v, Triangles t) : vertices(std::move(v)), triangles(std::move(t)) {
  if (triangles.size() > 0 &&
      (triangles.minCoeff() < 0 || triangles.maxCoeff() >= vertices.cols())) {
    throw Error("triangle index out of range");
  }
  watertight = check_watertight(triangles, vertices.cols());
}

double TriMesh::area() const {
  double a = 0;
  for (Eigen::Index f = 0; f < triangles.cols(); ++f) {
    const Vec3d p0 = vertices.col(triangles(0, f));
    a += 0.5 * (vertices.col(triangles(1, f)) - p0).cross(vertices.col(triangles(2, f)) - p0).norm();
  }
  return a;
}

bool TriMesh::check_watertight(const Triangles& tris, Eigen::Index num_vertices) {
  if (tris.cols() == 0) return false;
  std::map<std::pair<int, int>, int> directed;
  for (Eigen::Index f = 0; f < tris.cols(); ++f) {
    for (int e = 0; e < 3; ++e) {
      const int a = tris(e, f), b = tris((e + 1) % 3, f);
      if (a == b || a < 0 || b < 0 || a >= num_vertices || b >= num_vertices) return false;
      if (++directed[{a, b}] > 1) return false;  // inconsistent winding or non-manifold
    }
  }
  for (const auto& [edge, count] : directed) {
    auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

TriMesh TriMesh::transformed(const Posed& t) const { return TriMesh(t * vertices, triangles); }

TriMesh TriMesh::scaled(double s) const { return TriMesh(vertices * s, triangles); }

TriMesh parse_obj(const std::string& text) {
  std::vector<Vec3d> verts;
  std::vector<Eigen::Vector3i> faces;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3d v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw Error("obj line " + std::to_string(lineno) + ": malformed vertex");
      }
      verts.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // "v", "v/vt", "v//vn", "v/vt/vn"; negative indices are relative.
        int i = std::stoi(tok.substr(0, tok.find('/')));
        i = i < 0 ? static_cast<int>(verts.size()) + i : i - 1;
        idx.push_back(i);
      }
      if (idx.size() == 3) {
        faces.emplace_back(idx[0], idx[1], idx[2]);
      } else if (idx.size() == 4) {
        faces.emplace_back(idx[0], idx[1], idx[2]);
        faces.emplace_back(idx[0], idx[2], idx[3]);
      } else {
        throw Error("obj line " + std::to_string(lineno) + ": only triangles and quads supported");
      }
    }
  }
  Triangles tris(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i) tris.col(static_cast<Eigen::Index>(i)) = faces[i];
  return TriMesh(to_point_set(verts), tris);
}

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open mesh " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_obj(ss.str());
}

std::string to_obj(const TriMesh& mesh) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index i = 0; i < mesh.vertices.cols(); ++i) {
    out << "v " << mesh.vertices(0, i) << ' ' << mesh.vertices(1, i) << ' ' << mesh.vertices(2, i)
        << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.triangles.cols(); ++f) {
    out << "f " << mesh.triangles(0, f) + 1 << ' ' << mesh.triangles(1, f) + 1 << ' '
        << mesh.triangles(2, f) + 1 << '\n';
  }
  return out.str();
}

namespace {

// 53-bit uniform in [0, 1); stable across standard libraries.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

PointSet sample_surface(const TriMesh& mesh, int count, std::uint64_t seed) {
  if (mesh.triangles.cols() == 0) throw Error("cannot sample an empty mesh");
  if (count <= 0) throw Error("sample count must be positive");
  std::vector<double> cdf(static_cast<std::size_t>(mesh.triangles.cols()));
  double total = 0;
  for (Eigen::Index f = 0; f < mesh.triangles.cols(); ++f) {
    const Vec3d p0 = mesh.vertices.col(mesh.triangles(0, f));
    total += 0.5 * (mesh.vertices.col(mesh.triangles(1, f)) - p0)
                       .cross(mesh.vertices.col(mesh.triangles(2, f)) - p0)
                       .norm();
    cdf[static_cast<std::size_t>(f)] = total;
  }
  if (!(total > 0)) throw Error("mesh has zero surface area");

  std::mt19937_64 rng(seed);
  PointSet out(3, count);
  for (int i = 0; i < count; ++i) {
    const double pick = unit_uniform(rng) * total;
    const auto f = static_cast<Eigen::Index>(
        std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin(),
                              cdf.size() - 1));
    double u = unit_uniform(rng), v = unit_uniform(rng);
    if (u + v > 1) {
      u = 1 - u;
      v = 1 - v;
    }
    const Vec3d a = mesh.vertices.col(mesh.triangles(0, f));
    const Vec3d b = mesh.vertices.col(mesh.triangles(1, f));
    const Vec3d c = mesh.vertices.col(mesh.triangles(2, f));
    out.col(i) = a + u * (b - a) + v * (c - a);
  }
  return out;
}

Vec3d closest_point_on_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b, const Vec3d& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Vec3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double winding_number(const TriMesh& mesh, const Vec3d& p) {
  // Van Oosterom-Strackee solid angle per triangle.
  double total = 0;
  for (Eigen::Index f = 0; f < mesh.triangles.cols(); ++f) {
    const Vec3d a = mesh.vertices.col(mesh.triangles(0, f)) - p;
    const Vec3d b = mesh.vertices.col(mesh.triangles(1, f)) - p;
    const Vec3d c = mesh.vertices.col(mesh.triangles(2, f)) - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * std::numbers::pi);
}

TriMesh make_icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3d> v = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
                          {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
                          {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Eigen::Vector3i> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      v.push_back(((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]) / 2).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]),
                c = midpoint(tri[2], tri[0]);
      next.emplace_back(tri[0], a, c);
      next.emplace_back(tri[1], b, a);
      next.emplace_back(tri[2], c, b);
      next.emplace_back(a, b, c);
    }
    f = std::move(next);
  }
  PointSet verts = to_point_set(v) * radius;
  Triangles tris(3, static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) tris.col(static_cast<Eigen::Index>(i)) = f[i];
  return TriMesh(std::move(verts), std::move(tris));
}

TriMesh make_box(const Vec3d& h) {
  PointSet v(3, 8);
  for (int i = 0; i < 8; ++i) {
    v.col(i) = Vec3d((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  Triangles t(3, 12);
  // Outward-facing (counter-clockwise seen from outside).
  t << 0, 0, 4, 4, 0, 0, 2, 2, 0, 0, 1, 1,  //
      2, 3, 5, 7, 1, 5, 6, 7, 4, 6, 3, 7,   //
      3, 1, 7, 6, 5, 4, 7, 3, 6, 2, 7, 5;
  return TriMesh(std::move(v), std::move(t));
}

TriMesh make_cylinder(double radius, double half_height, int segments) {
  if (segments < 3) throw Error("cylinder needs at least 3 segments");
  PointSet v(3, 2 * segments + 2);
  for (int i = 0; i < segments; ++i) {
    const double a = 2 * std::numbers::pi * i / segments;
    v.col(i) = Vec3d(radius * std::cos(a), radius * std::sin(a), -half_height);
    v.col(segments + i) = Vec3d(radius * std::cos(a), radius * std::sin(a), half_height);
  }
  const int bottom = 2 * segments, top = 2 * segments + 1;
  v.col(bottom) = Vec3d(0, 0, -half_height);
  v.col(top) = Vec3d(0, 0, half_height);
  Triangles t(3, 4 * segments);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    t.col(4 * i) << i, j, segments + j;
    t.col(4 * i + 1) << i, segments + j, segments + i;
    t.col(4 * i + 2) << bottom, j, i;
    t.col(4 * i + 3) << top, segments + i, segments + j;
  }
  return TriMesh(std::move(v), std::move(t));
}

}  // namespace hoi
