#include "hoi/augment.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hoi/nearest.hpp"

namespace hoi {

const char* to_string(ContactState s) { return s == ContactState::hold ? "hold" : "open"; }

std::vector<Segment> segment_trajectory(const GripperTrajectory& traj) {
  std::vector<Segment> out;
  const int n = static_cast<int>(traj.size());
  int start = 0;
  while (start < n) {
    int end = start;
    const GripperCommand c = traj.frames[static_cast<std::size_t>(start)].command;
    while (end + 1 < n && traj.frames[static_cast<std::size_t>(end + 1)].command == c) ++end;
    out.push_back({start, end, c == GripperCommand::closed ? ContactState::hold : ContactState::open});
    start = end + 1;
  }
  return out;
}

namespace {

void check_segment(const GripperTrajectory& traj, const Segment& seg) {
  if (seg.start < 0 || seg.end < seg.start || seg.end >= static_cast<int>(traj.size())) {
    throw Error("segment outside trajectory");
  }
}

}  // namespace

std::vector<GripperFrame> transform_hold(const GripperTrajectory& traj, const Segment& seg,
                                         const Posed& t_o, double rotation_cap) {
  check_segment(traj, seg);
  if (seg.state != ContactState::hold) throw Error("transform_hold needs a hold segment");
  if (t_o.rot.angle() > rotation_cap) throw Error("object transform rotation exceeds cap");
  std::vector<GripperFrame> out;
  out.reserve(static_cast<std::size_t>(seg.length()));
  for (int t = seg.start; t <= seg.end; ++t) {
    GripperFrame f = traj.frames[static_cast<std::size_t>(t)];
    f.pose = t_o * f.pose;
    out.push_back(f);
  }
  return out;
}

std::vector<double> segment_progress(std::span<const Vec3d> path, ProgressMode mode) {
  const std::size_t n = path.size();
  std::vector<double> alpha(n, 0.0);
  if (n < 2) return alpha;
  if (mode == ProgressMode::frame_index) {
    for (std::size_t i = 0; i < n; ++i) alpha[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return alpha;
  }
  double total = 0;
  for (std::size_t i = 1; i < n; ++i) {
    total += (path[i] - path[i - 1]).norm();
    alpha[i] = total;
  }
  if (total > 0) {
    for (double& a : alpha) a /= total;
  }
  alpha.back() = total > 0 ? 1.0 : 0.0;
  return alpha;
}

std::vector<GripperFrame> remap_open(const GripperTrajectory& traj, const Segment& seg,
                                     const OpenAnchors& anchors, const Rot3d& r_delta,
                                     ProgressMode mode) {
  check_segment(traj, seg);
  if (seg.state != ContactState::open) throw Error("remap_open needs an open segment");
  if (seg.length() < 2) throw Error("open segment shorter than two frames");

  std::vector<Vec3d> path;
  for (int t = seg.start; t <= seg.end; ++t) path.push_back(traj.frames[static_cast<std::size_t>(t)].pose.trans);
  const Vec3d ps = path.front(), pe = path.back();
  if ((pe - ps).norm() == 0 && (anchors.end - anchors.start).norm() != 0) {
    throw Error("degenerate chord");
  }
  const std::vector<double> alpha = segment_progress(path, mode);

  std::vector<GripperFrame> out;
  out.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double a = alpha[i];
    // Convex-combination form keeps both endpoints exact.
    const Vec3d chord = (1 - a) * ps + a * pe;
    const Vec3d anchor_chord = (1 - a) * anchors.start + a * anchors.end;
    GripperFrame f = traj.frames[static_cast<std::size_t>(seg.start) + i];
    f.pose = Posed(r_delta * f.pose.rot, anchor_chord + (path[i] - chord));
    out.push_back(f);
  }
  return out;
}

namespace {

const Mat3d kSagittal = Eigen::Vector3d(-1, 1, 1).asDiagonal();
const Mat3d kRotYPi = Eigen::Vector3d(-1, 1, -1).asDiagonal();

}  // namespace

Posed mirror_pose(const Posed& p) {
  return Posed(Rot3d::unchecked(kSagittal * p.rot.matrix() * kSagittal * kRotYPi),
               kSagittal * p.trans);
}

double screw_component(std::span<const Posed> object, const Segment& seg, const Vec3d& axis) {
  if (seg.length() < 2) throw Error("screw component needs at least two frames");
  if (seg.start < 0 || seg.end >= static_cast<int>(object.size())) throw Error("segment outside stream");
  const Vec3d a = axis.normalized();
  double total = 0;
  for (int t = seg.start; t < seg.end; ++t) {
    const Rot3d step = object[static_cast<std::size_t>(t)].rot.inverse() *
                       object[static_cast<std::size_t>(t + 1)].rot;
    total += step.log().dot(a);
  }
  return total;
}

MirrorResult mirror_trajectory(std::span<const Posed> hand, std::span<const Posed> object,
                               std::span<const Segment> segments, const MirrorSpec& spec,
                               const Vec3d& task_axis) {
  if (!(spec.tau_screw > 0)) throw Error("tau_screw must be positive");
  if (hand.size() != object.size()) throw Error("hand and object streams differ in length");

  MirrorResult out;
  for (const Segment& s : segments) {
    if (s.state != ContactState::hold || s.length() < 2) continue;
    const double screw = screw_component(object, s, task_axis);
    out.screw.push_back(screw);
    if (std::abs(screw) > spec.tau_screw && out.reason.empty()) {
      out.reason = "screw component " + std::to_string(screw) + " rad over hold segment [" +
                   std::to_string(s.start) + ", " + std::to_string(s.end) + "] exceeds tau_screw";
    }
  }
  if (!out.reason.empty()) return out;

  out.accepted = true;
  out.hand.reserve(hand.size());
  out.object.reserve(object.size());
  for (const Posed& p : hand) out.hand.push_back(mirror_pose(p));
  for (const Posed& p : object) out.object.push_back(mirror_pose(p));
  return out;
}

GripperTrajectory mirror_gripper(const GripperTrajectory& traj) {
  GripperTrajectory out = traj;
  for (auto& f : out.frames) f.pose = mirror_pose(f.pose);
  out.handedness = traj.handedness == Handedness::left ? Handedness::right : Handedness::left;
  return out;
}

double chamfer_distance(const PointSet& a, const PointSet& b) {
  if (a.cols() == 0 || b.cols() == 0) throw Error("chamfer distance of an empty point set");
  return 0.5 * (nearest_distances(a, b).mean() + nearest_distances(b, a).mean());
}

void SimilarityWeights::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0) throw ConfigError("similarity weights must be non-negative");
  if (!(alpha + beta + gamma > 0)) throw ConfigError("similarity weights must not all be zero");
  if (surface_samples <= 0) throw ConfigError("surface sample count must be positive");
}

namespace {

struct Prepared {
  PointSet samples;  // unit-AABB normalized surface samples
  Aabbd aspect_box;  // extents / longest extent, centered at origin
  std::optional<Eigen::VectorXd> embedding;
};

Prepared prepare(const ObjectAsset& asset, const SimilarityWeights& w) {
  if (asset.mesh.vertices.cols() == 0) throw Error("asset '" + asset.id + "' has no mesh");
  const Aabbd box = asset.mesh.aabb();
  const double longest = box.extent().maxCoeff();
  if (!(box.extent().minCoeff() > 0)) throw Error("asset '" + asset.id + "' has zero extent");
  const PointSet normalized = (asset.mesh.vertices.colwise() - box.center()) / longest;
  Prepared p;
  p.samples = sample_surface(TriMesh(normalized, asset.mesh.triangles), w.surface_samples,
                             w.sample_seed);
  const Vec3d half = box.extent() / (2 * longest);
  p.aspect_box = Aabbd(-half, half);
  if (asset.embedding && asset.embedding->norm() > 0) p.embedding = asset.embedding;
  return p;
}

RetrievalScore score(const Prepared& src, const Prepared& cand, const SimilarityWeights& w) {
  RetrievalScore s;
  s.chamfer = chamfer_distance(src.samples, cand.samples);
  s.iou = aabb_iou(src.aspect_box, cand.aspect_box);
  s.total = w.alpha * s.chamfer + w.beta * (1 - s.iou);
  if (src.embedding && cand.embedding && src.embedding->size() == cand.embedding->size()) {
    const double cosine =
        src.embedding->dot(*cand.embedding) / (src.embedding->norm() * cand.embedding->norm());
    s.semantic = 1 - cosine;
    s.semantic_used = true;
    s.total += w.gamma * s.semantic;
  } else if (w.gamma > 0) {
    s.warnings.emplace_back("semantic term dropped: embedding missing or mismatched");
  }
  return s;
}

}  // namespace

RetrievalScore retrieval_score(const ObjectAsset& source, const ObjectAsset& candidate,
                               const SimilarityWeights& w) {
  w.validate();
  return score(prepare(source, w), prepare(candidate, w), w);
}

std::vector<RankedAsset> rank_substitutes(const ObjectAsset& source,
                                          std::span<const ObjectAsset> library,
                                          const SimilarityWeights& w, std::size_t k) {
  w.validate();
  const Prepared src = prepare(source, w);
  std::vector<RankedAsset> ranked;
  ranked.reserve(library.size());
  for (std::size_t i = 0; i < library.size(); ++i) {
    ranked.push_back({i, library[i].id, score(src, prepare(library[i], w), w)});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedAsset& a, const RankedAsset& b) {
    if (a.score.total != b.score.total) return a.score.total < b.score.total;
    return a.id < b.id;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

PrincipalAxes principal_axes(const TriMesh& mesh) {
  // Exact surface moments: for a triangle of area A,
  //   int x dA = A (a + b + c) / 3,
  //   int x x^T dA = A / 12 (a a^T + b b^T + c c^T + s s^T), s = a + b + c.
  double area = 0;
  Vec3d first = Vec3d::Zero();
  Mat3d second = Mat3d::Zero();
  for (Eigen::Index f = 0; f < mesh.triangles.cols(); ++f) {
    const Vec3d a = mesh.vertices.col(mesh.triangles(0, f));
    const Vec3d b = mesh.vertices.col(mesh.triangles(1, f));
    const Vec3d c = mesh.vertices.col(mesh.triangles(2, f));
    const double A = 0.5 * (b - a).cross(c - a).norm();
    const Vec3d s = a + b + c;
    area += A;
    first += A * s / 3;
    second += A / 12 * (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
  }
  if (!(area > 0)) throw Error("mesh has zero surface area");

  PrincipalAxes out;
  out.centroid = first / area;
  const Mat3d cov = second / area - out.centroid * out.centroid.transpose();
  Eigen::SelfAdjointEigenSolver<Mat3d> es(cov);
  // Eigen sorts ascending.
  out.variances = es.eigenvalues().reverse();
  Mat3d axes = es.eigenvectors().rowwise().reverse();
  const double top = std::max(out.variances[0], 1e-300);
  out.degenerate = (out.variances[0] - out.variances[1]) <= 1e-6 * top ||
                   (out.variances[1] - out.variances[2]) <= 1e-6 * top;
  if (axes(0, 0) < 0) axes.col(0) = -axes.col(0);
  if (axes(1, 1) < 0) axes.col(1) = -axes.col(1);
  axes.col(2) = axes.col(0).cross(axes.col(1));
  out.axes = axes;
  return out;
}

Binding bind_substitute(std::span<const Posed> source_object_poses, const ObjectAsset& source,
                        const ObjectAsset& substitute) {
  const double src_extent = source.mesh.aabb().extent().maxCoeff();
  if (!(src_extent > 0) || !(substitute.mesh.aabb().extent().maxCoeff() > 0)) {
    throw Error("degenerate mesh extent");
  }

  Binding b;
  b.canonical_pose = source.canonical_pose;
  const PrincipalAxes src = principal_axes(source.mesh);
  const PrincipalAxes sub = principal_axes(substitute.mesh);
  if (src.degenerate || sub.degenerate) {
    b.pca_fallback = true;
    b.warnings.emplace_back("principal axes degenerate; aligning bounding-box axes instead");
    b.rotation = Rot3d();
  } else {
    b.rotation = Rot3d::project(src.axes * sub.axes.transpose());
  }
  // Extents are compared once the substitute sits in the source's axes, so a
  // rotated copy binds at scale 1.
  const Aabbd turned = Aabbd::from_points(b.rotation.matrix() * substitute.mesh.vertices);
  b.scale = src_extent / turned.extent().maxCoeff();
  b.bound_mesh = substitute.mesh.scaled(b.scale);
  b.translation = b.pca_fallback
                      ? Vec3d(source.mesh.aabb().center() - b.scale * turned.center())
                      : Vec3d(src.centroid - b.scale * (b.rotation * sub.centroid));

  const Posed rebase = b.substitute_to_source();
  b.object_poses.reserve(source_object_poses.size());
  for (const Posed& p : source_object_poses) b.object_poses.push_back(p * rebase);
  return b;
}

Posed sample_object_transform(const AugmentSampler& sampler, std::mt19937_64& rng) {
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  Vec3d t;
  for (int a = 0; a < 3; ++a) t[a] = uniform(sampler.object_shift.min[a], sampler.object_shift.max[a]);
  const double yaw = uniform(-sampler.rotation_cap, sampler.rotation_cap);
  return Posed(Rot3d::rot_z(yaw), t);
}

AugmentedTrajectory augment_trajectory(const GripperTrajectory& traj, const Posed& t_o,
                                       const AugmentSampler& sampler, std::mt19937_64& rng) {
  auto uniform_in = [&](const Aabbd& box) {
    Vec3d p;
    for (int a = 0; a < 3; ++a) {
      p[a] = box.min[a] + (box.max[a] - box.min[a]) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    }
    return p;
  };

  AugmentedTrajectory out;
  out.trajectory = traj;
  out.object_transform = t_o;
  const auto segments = segment_trajectory(traj);
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const Segment& s = segments[k];
    if (s.state == ContactState::hold) {
      const auto frames = transform_hold(traj, s, t_o, sampler.rotation_cap);
      std::copy(frames.begin(), frames.end(), out.trajectory.frames.begin() + s.start);
      continue;
    }
    const Vec3d ps = traj.frames[static_cast<std::size_t>(s.start)].pose.trans;
    const Vec3d pe = traj.frames[static_cast<std::size_t>(s.end)].pose.trans;
    const bool hold_before = k > 0;
    const bool hold_after = k + 1 < segments.size();
    OpenAnchors anchors;
    anchors.start = hold_before ? Vec3d(t_o * ps) : (sampler.resample_free_anchors ? uniform_in(sampler.reachable) : ps);
    anchors.end = hold_after ? Vec3d(t_o * pe) : (sampler.resample_free_anchors ? uniform_in(sampler.reachable) : pe);
    out.anchors.push_back(anchors);
    if (s.length() < 2) {
      GripperFrame f = traj.frames[static_cast<std::size_t>(s.start)];
      f.pose = Posed(t_o.rot * f.pose.rot, anchors.start);
      out.trajectory.frames[static_cast<std::size_t>(s.start)] = f;
      continue;
    }
    const auto frames = remap_open(traj, s, anchors, t_o.rot, sampler.progress);
    std::copy(frames.begin(), frames.end(), out.trajectory.frames.begin() + s.start);
  }
  return out;
}

}  // namespace hoi
