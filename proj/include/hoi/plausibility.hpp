// Object TSDFs, hand-object penetration scoring and resolution, and the
// tracking/contact reward used to grade refined hand-object states.

#ifndef HOI_PLAUSIBILITY_HPP
#define HOI_PLAUSIBILITY_HPP

#include <span>
#include <vector>

#include "hoi/geom.hpp"
#include "hoi/mesh.hpp"

namespace hoi {

/// Voxelized truncated signed distance, positive outside. Voxel (i, j, k)
/// holds the value at origin + voxel * (i, j, k).
struct TsdfGrid {
  Vec3d origin = Vec3d::Zero();
  double voxel = 0;
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  double trunc = 0;
  Eigen::VectorXd values;

  [[nodiscard]] Eigen::Index index(int i, int j, int k) const {
    return i + static_cast<Eigen::Index>(dims.x()) * (j + static_cast<Eigen::Index>(dims.y()) * k);
  }
  [[nodiscard]] double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  [[nodiscard]] Vec3d center(int i, int j, int k) const {
    return origin + voxel * Vec3d(i, j, k);
  }
};

struct TsdfOptions {
  double voxel = 0.005;
  double trunc = 0.02;
  double padding = 0.02;
};

/// Throws "sign undefined" for meshes that are not watertight.
[[nodiscard]] TsdfGrid build_tsdf(const TriMesh& mesh, const TsdfOptions& opts);

/// Trilinear interpolation; +trunc outside the voxel lattice.
[[nodiscard]] double query_sdf(const TsdfGrid& grid, const Vec3d& p);

/// Central-difference gradient of the interpolated field.
[[nodiscard]] Vec3d sdf_gradient(const TsdfGrid& grid, const Vec3d& p, double h);

struct HandSurface {
  PointSet points;
  std::vector<int> palm;  // indices into points

  void validate() const;
};

enum class SurfaceSubset { palm, all };

/// Sum of squared signed distance over selected points that are inside the
/// object; `surface_to_grid` maps surface points into the grid frame.
[[nodiscard]] double penetration_energy(const HandSurface& surface, SurfaceSubset subset,
                                        const TsdfGrid& grid,
                                        const Posed& surface_to_grid = Posed::identity());

struct ResolveOptions {
  int max_iterations = 200;
  double tolerance = 1e-8;  // energy considered penetration free
  double step_scale = 0.5;  // initial step relative to the per-point Newton step
  double max_rotation_step = 0.1;  // rad per iteration
  bool translation_only = false;
  SurfaceSubset subset = SurfaceSubset::all;
};

struct ResolveResult {
  Posed pose;
  double initial_energy = 0;
  double final_energy = 0;
  int iterations = 0;
  bool converged = false;
  GeodesicError<double> displacement{0, 0};
  std::vector<double> energies;  // initial value then every accepted step
};

/// Gradient descent on the wrist pose (translation and local axis-angle)
/// reducing penetration of `surface_local` (wrist frame) into the grid.
[[nodiscard]] ResolveResult resolve_penetration(const Posed& initial,
                                                const HandSurface& surface_local,
                                                const TsdfGrid& grid, const ResolveOptions& opts);

struct RewardSpec {
  double lambda_geo = 1.0, lambda_dyn = 0.5, lambda_con = 0.5;
  double sigma_geo = 0.05, sigma_dyn = 0.5, sigma_con = 1.0;

  void validate() const;
};

struct RewardState {
  Eigen::VectorXd hand;      // hand pose vector
  Posed object;
  Eigen::VectorXd hand_vel;
  Eigen::Matrix<double, 6, 1> object_vel = Eigen::Matrix<double, 6, 1>::Zero();
  double contact = 0;        // non-negative contact force magnitude

  /// Per-contact forces reduced by sum.
  static double total_contact(std::span<const double> forces);
};

/// lambda_geo exp(-(|dh| + |dp|)/sigma_geo) + lambda_dyn exp(-(|dhdot| + |dpdot|)/sigma_dyn)
/// + lambda_con (1 - exp(-C/sigma_con)); |dp| is translation error plus
/// geodesic rotation error.
[[nodiscard]] double reward_step(const RewardState& state, const RewardState& target,
                                 const RewardSpec& spec);

}  // namespace hoi

#endif  // HOI_PLAUSIBILITY_HPP
