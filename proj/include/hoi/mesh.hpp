// Triangle meshes: OBJ ingest, watertightness, surface sampling, primitives.

#ifndef HOI_MESH_HPP
#define HOI_MESH_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "hoi/geom.hpp"

namespace hoi {

using Triangles = Eigen::Matrix<int, 3, Eigen::Dynamic>;

struct TriMesh {
  PointSet vertices;
  Triangles triangles;
  bool watertight = false;

  TriMesh() = default;
  TriMesh(PointSet v, Triangles t);

  [[nodiscard]] Aabbd aabb() const { return Aabbd::from_points(vertices); }
  [[nodiscard]] double area() const;
  /// Every undirected edge shared by exactly two triangles that traverse it
  /// in opposite directions.
  [[nodiscard]] static bool check_watertight(const Triangles& tris, Eigen::Index num_vertices);
  [[nodiscard]] TriMesh transformed(const Posed& t) const;
  [[nodiscard]] TriMesh scaled(double s) const;
};

/// Triangles and quads (split into two triangles); other records ignored.
[[nodiscard]] TriMesh parse_obj(const std::string& text);
[[nodiscard]] TriMesh load_obj(const std::filesystem::path& path);
[[nodiscard]] std::string to_obj(const TriMesh& mesh);

/// Area-weighted uniform surface samples. Identical meshes and seeds give
/// identical samples; meshes sharing topology share barycentric draws.
[[nodiscard]] PointSet sample_surface(const TriMesh& mesh, int count, std::uint64_t seed);

/// Closest point on triangle (a, b, c) to p.
[[nodiscard]] Vec3d closest_point_on_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b,
                                              const Vec3d& c);

/// Generalized winding number of a closed mesh around p (1 inside, 0 outside).
[[nodiscard]] double winding_number(const TriMesh& mesh, const Vec3d& p);

[[nodiscard]] TriMesh make_icosphere(double radius, int subdivisions);
[[nodiscard]] TriMesh make_box(const Vec3d& half_extent);
[[nodiscard]] TriMesh make_cylinder(double radius, double half_height, int segments);

}  // namespace hoi

#endif  // HOI_MESH_HPP
