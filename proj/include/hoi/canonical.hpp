// Camera-frame reconstructions -> world frame -> canonical action space.
//
// The canonical frame has z along the scene up direction, y along the
// dominant hand-to-object approach direction and x completing a right-handed
// basis. Its origin sits at the object position of the first salient frame.

#ifndef HOI_CANONICAL_HPP
#define HOI_CANONICAL_HPP

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

#include "hoi/geom.hpp"

namespace hoi {

struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

using DepthImage = Eigen::ArrayXXd;  // rows = v, cols = u
using MaskImage = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct BodyAnchors {
  Vec3d hip_left = Vec3d::Zero();
  Vec3d hip_right = Vec3d::Zero();
  Vec3d shoulder_left = Vec3d::Zero();
  Vec3d shoulder_right = Vec3d::Zero();
  Vec3d up = Vec3d::UnitZ();
  Vec3d approach = Vec3d::UnitY();
  bool has_body = false;  // hips/shoulders populated

  void validate() const;
};

struct CanonicalTransform {
  Posed world_to_canonical;
  int t0 = 0;
  /// Lateral body reference projected orthogonal to `up`; zero when absent.
  Vec3d lateral = Vec3d::Zero();
  /// sign(x_canonical . lateral); 0 when no body anchors were given.
  int lateral_agreement = 0;
};

/// Pinhole back-projection of every masked pixel with a finite, positive depth.
[[nodiscard]] PointSet backproject(const DepthImage& depth, const MaskImage& mask,
                                   const CameraModel& cam);

/// Ratio of the observed point-set AABB diagonal to the mesh AABB diagonal.
[[nodiscard]] double recover_scale(const PointSet& points, const Aabbd& unscaled_mesh_aabb);

[[nodiscard]] CanonicalTransform build_canonical_frame(const BodyAnchors& anchors,
                                                       const Vec3d& object_pos_t0, int t0 = 0);

[[nodiscard]] std::vector<Posed> apply_canonical(const CanonicalTransform& transform,
                                                 std::span<const Posed> poses);

/// Mean unit wrist->object direction over frames whose distance is at or below
/// the 25th percentile. Throws when the streams are empty or of unequal length.
[[nodiscard]] Vec3d default_approach(std::span<const Vec3d> wrist, std::span<const Vec3d> object);

/// First frame with wrist-object distance below `salient_distance`; falls back
/// to the closest frame when no frame qualifies.
[[nodiscard]] int default_t0(std::span<const Vec3d> wrist, std::span<const Vec3d> object,
                             double salient_distance = 0.15);

}  // namespace hoi

#endif  // HOI_CANONICAL_HPP
