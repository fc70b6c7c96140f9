// Contact segmentation and trajectory augmentation: object-frame transforms
// of hold segments, residual-preserving remapping of open segments, sagittal
// mirroring, and object substitution by shape/semantic retrieval.

#ifndef HOI_AUGMENT_HPP
#define HOI_AUGMENT_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hoi/geom.hpp"
#include "hoi/hand.hpp"
#include "hoi/mesh.hpp"

namespace hoi {

enum class ContactState { hold, open };
[[nodiscard]] const char* to_string(ContactState s);

/// Inclusive, zero-based frame range.
struct Segment {
  int start = 0;
  int end = 0;
  ContactState state = ContactState::open;

  [[nodiscard]] int length() const { return end - start + 1; }
  bool operator==(const Segment&) const = default;
};

/// Maximal runs of constant gripper command; closed runs are holds.
[[nodiscard]] std::vector<Segment> segment_trajectory(const GripperTrajectory& traj);

/// Left-multiplies every waypoint of a hold segment by `t_o`.
[[nodiscard]] std::vector<GripperFrame> transform_hold(const GripperTrajectory& traj,
                                                       const Segment& seg, const Posed& t_o,
                                                       double rotation_cap);

enum class ProgressMode { arc_length, frame_index };

struct OpenAnchors {
  Vec3d start = Vec3d::Zero();
  Vec3d end = Vec3d::Zero();
};

/// Normalized progress along the original translational path, 0 at the first
/// frame and 1 at the last.
[[nodiscard]] std::vector<double> segment_progress(std::span<const Vec3d> path, ProgressMode mode);

/// Moves the chord of an open segment onto new anchors while keeping each
/// waypoint's deviation from the original chord; rotations are
/// left-multiplied by `r_delta`.
[[nodiscard]] std::vector<GripperFrame> remap_open(const GripperTrajectory& traj,
                                                   const Segment& seg, const OpenAnchors& anchors,
                                                   const Rot3d& r_delta,
                                                   ProgressMode mode = ProgressMode::arc_length);

struct MirrorSpec {
  double tau_screw = 0.35;  // rad
};

/// Sagittal reflection S = diag(-1, 1, 1): p' = S p, R' = S R S Ry(pi).
[[nodiscard]] Posed mirror_pose(const Posed& p);

/// Signed rotation about `axis` accumulated over consecutive frames of `seg`.
[[nodiscard]] double screw_component(std::span<const Posed> object, const Segment& seg,
                                     const Vec3d& axis);

struct MirrorResult {
  bool accepted = false;
  std::vector<Posed> hand;
  std::vector<Posed> object;
  std::vector<double> screw;  // per hold segment
  std::string reason;
};

/// Mirrors hand (or gripper) and object streams about the same plane. Rejects
/// when any hold segment screws about `task_axis` by more than tau_screw.
[[nodiscard]] MirrorResult mirror_trajectory(std::span<const Posed> hand,
                                             std::span<const Posed> object,
                                             std::span<const Segment> segments,
                                             const MirrorSpec& spec, const Vec3d& task_axis);

/// Gripper trajectory with mirrored poses and flipped chirality.
[[nodiscard]] GripperTrajectory mirror_gripper(const GripperTrajectory& traj);

/// Symmetric mean nearest-neighbour distance (non-squared).
[[nodiscard]] double chamfer_distance(const PointSet& a, const PointSet& b);

struct ObjectAsset {
  std::string id;
  TriMesh mesh;
  Posed canonical_pose;
  std::string category;
  std::optional<Eigen::VectorXd> embedding;
};

struct SimilarityWeights {
  double alpha = 1.0;
  double beta = 0.5;
  double gamma = 0.5;
  int surface_samples = 1024;
  std::uint64_t sample_seed = 0x5eed;

  void validate() const;
};

struct RetrievalScore {
  double total = 0;
  double chamfer = 0;
  double iou = 0;
  double semantic = 0;  // 1 - cosine, when used
  bool semantic_used = false;
  std::vector<std::string> warnings;
};

/// Cost (lower is better): alpha CD of unit-AABB-normalized surfaces
/// + beta (1 - IoU of longest-extent-normalized boxes) + gamma (1 - cosine).
[[nodiscard]] RetrievalScore retrieval_score(const ObjectAsset& source, const ObjectAsset& candidate,
                                             const SimilarityWeights& w);

struct RankedAsset {
  std::size_t index = 0;  // into the library
  std::string id;
  RetrievalScore score;
};

/// Ascending by cost; ties broken by id.
[[nodiscard]] std::vector<RankedAsset> rank_substitutes(const ObjectAsset& source,
                                                        std::span<const ObjectAsset> library,
                                                        const SimilarityWeights& w, std::size_t k);

struct Binding {
  double scale = 1;              // applied to the substitute mesh
  Rot3d rotation;                // substitute principal axes -> source axes
  Vec3d translation = Vec3d::Zero();
  bool pca_fallback = false;
  Posed canonical_pose;          // copied from the source
  TriMesh bound_mesh;            // substitute scaled by `scale`
  std::vector<Posed> object_poses;  // pose stream for `bound_mesh`
  std::vector<std::string> warnings;

  /// Maps scaled-substitute coordinates into the source object frame.
  [[nodiscard]] Posed substitute_to_source() const { return Posed(rotation, translation); }
};

/// Aligns principal axes and centroids, scales the substitute so its largest
/// AABB extent in the aligned frame matches the source's, and rebases the
/// source object pose stream. The end-effector trajectory is reused unchanged.
[[nodiscard]] Binding bind_substitute(std::span<const Posed> source_object_poses,
                                      const ObjectAsset& source, const ObjectAsset& substitute);

/// Principal axes of the surface (exact area-weighted second moments), sorted
/// by decreasing variance and sign-fixed toward +x, +y; right-handed.
struct PrincipalAxes {
  Vec3d centroid = Vec3d::Zero();
  Mat3d axes = Mat3d::Identity();  // columns
  Vec3d variances = Vec3d::Zero();
  bool degenerate = false;
};
[[nodiscard]] PrincipalAxes principal_axes(const TriMesh& mesh);

/// Random object-frame transform and anchor draws for augmentation.
struct AugmentSampler {
  Aabbd object_shift{Vec3d(-0.05, -0.05, 0.0), Vec3d(0.05, 0.05, 0.0)};
  double rotation_cap = 0.3;  // rad, yaw about the canonical up axis
  Aabbd reachable{Vec3d(-0.3, -0.3, 0.05), Vec3d(0.3, 0.3, 0.4)};
  bool resample_free_anchors = true;
  ProgressMode progress = ProgressMode::arc_length;
};

struct AugmentedTrajectory {
  GripperTrajectory trajectory;
  Posed object_transform;
  std::vector<OpenAnchors> anchors;  // per open segment
};

/// Applies `t_o` to hold segments and remaps open segments. The anchor next to
/// a hold segment follows the transformed hold; free anchors at the clip ends
/// are drawn from the reachable box (or kept when resampling is off).
[[nodiscard]] AugmentedTrajectory augment_trajectory(const GripperTrajectory& traj,
                                                     const Posed& t_o,
                                                     const AugmentSampler& sampler,
                                                     std::mt19937_64& rng);

[[nodiscard]] Posed sample_object_transform(const AugmentSampler& sampler, std::mt19937_64& rng);

}  // namespace hoi

#endif  // HOI_AUGMENT_HPP
