#include "hoi/canonical.hpp"

#include <algorithm>
#include <cmath>

namespace hoi {

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ConfigError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("camera image size must be positive");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height)) {
    throw ConfigError("camera principal point outside the image");
  }
}

void BodyAnchors::validate() const {
  for (const Vec3d* v : {&hip_left, &hip_right, &shoulder_left, &shoulder_right, &up, &approach}) {
    if (!v->allFinite()) throw Error("body anchors must be finite");
  }
  if (up.norm() < 1e-12 || approach.norm() < 1e-12) throw Error("degenerate frame");
  const double cosang = std::abs(up.normalized().dot(approach.normalized()));
  if (std::acos(std::min(1.0, cosang)) <= 1e-3) throw Error("degenerate frame");
}

PointSet backproject(const DepthImage& depth, const MaskImage& mask, const CameraModel& cam) {
  if (depth.rows() != mask.rows() || depth.cols() != mask.cols()) {
    throw Error("depth and mask dimensions differ");
  }
  std::vector<Vec3d> pts;
  for (Eigen::Index v = 0; v < depth.rows(); ++v) {
    for (Eigen::Index u = 0; u < depth.cols(); ++u) {
      if (!mask(v, u)) continue;
      const double d = depth(v, u);
      if (!std::isfinite(d) || d <= 0) continue;
      pts.emplace_back((static_cast<double>(u) - cam.cx) * d / cam.fx,
                       (static_cast<double>(v) - cam.cy) * d / cam.fy, d);
    }
  }
  return to_point_set(pts);
}

double recover_scale(const PointSet& points, const Aabbd& unscaled_mesh_aabb) {
  if (points.cols() < 2) throw Error("degenerate observation");
  const double obs = Aabbd::from_points(points).diagonal();
  if (!(obs > 0)) throw Error("degenerate observation");
  const double ref = unscaled_mesh_aabb.diagonal();
  if (!(ref > 0)) throw Error("mesh bounding box has zero diagonal");
  return obs / ref;
}

CanonicalTransform build_canonical_frame(const BodyAnchors& anchors, const Vec3d& object_pos_t0,
                                         int t0) {
  anchors.validate();
  const Vec3d z = anchors.up.normalized();
  const Vec3d y = (anchors.approach - anchors.approach.dot(z) * z).normalized();
  const Vec3d x = y.cross(z);

  // Rows are the canonical axes expressed in world coordinates.
  Mat3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();

  CanonicalTransform out;
  const Rot3d rot = Rot3d::from_matrix(r);
  out.world_to_canonical = Posed(rot, -(rot * object_pos_t0));
  out.t0 = t0;

  if (anchors.has_body) {
    const Vec3d lat = (anchors.hip_left - anchors.hip_right) +
                      (anchors.shoulder_left - anchors.shoulder_right);
    out.lateral = lat - lat.dot(z) * z;
    const double d = x.dot(out.lateral);
    out.lateral_agreement = d > 0 ? 1 : (d < 0 ? -1 : 0);
  }
  return out;
}

std::vector<Posed> apply_canonical(const CanonicalTransform& transform,
                                   std::span<const Posed> poses) {
  std::vector<Posed> out;
  out.reserve(poses.size());
  for (const Posed& p : poses) out.push_back(transform.world_to_canonical * p);
  return out;
}

namespace {

void check_streams(std::span<const Vec3d> wrist, std::span<const Vec3d> object) {
  if (wrist.empty() || wrist.size() != object.size()) {
    throw Error("wrist and object streams must be non-empty and equally long");
  }
}

}  // namespace

Vec3d default_approach(std::span<const Vec3d> wrist, std::span<const Vec3d> object) {
  check_streams(wrist, object);
  std::vector<double> dist(wrist.size());
  for (std::size_t i = 0; i < wrist.size(); ++i) dist[i] = (object[i] - wrist[i]).norm();

  std::vector<double> sorted = dist;
  const auto k = static_cast<std::ptrdiff_t>((sorted.size() - 1) / 4);
  std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
  const double cutoff = sorted[static_cast<std::size_t>(k)];

  Vec3d sum = Vec3d::Zero();
  for (std::size_t i = 0; i < wrist.size(); ++i) {
    if (dist[i] <= cutoff && dist[i] > 1e-12) sum += (object[i] - wrist[i]) / dist[i];
  }
  if (sum.norm() < 1e-12) throw Error("approach direction undefined");
  return sum.normalized();
}

int default_t0(std::span<const Vec3d> wrist, std::span<const Vec3d> object,
               double salient_distance) {
  check_streams(wrist, object);
  int best = 0;
  double best_d = INFINITY;
  for (std::size_t i = 0; i < wrist.size(); ++i) {
    const double d = (object[i] - wrist[i]).norm();
    if (d < salient_distance) return static_cast<int>(i);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace hoi
