// Hand keypoints -> parallel-jaw gripper poses and open/close commands.

#ifndef HOI_HAND_HPP
#define HOI_HAND_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hoi/geom.hpp"

namespace hoi {

enum class Handedness { left, right };

/// Standard 21-landmark hand layout: wrist, then four joints per finger
/// from the palm outwards.
enum class Keypoint : int {
  wrist = 0,
  thumb_cmc, thumb_mcp, thumb_ip, thumb_tip,
  index_mcp, index_pip, index_dip, index_tip,
  middle_mcp, middle_pip, middle_dip, middle_tip,
  ring_mcp, ring_pip, ring_dip, ring_tip,
  pinky_mcp, pinky_pip, pinky_dip, pinky_tip,
};
inline constexpr int kNumKeypoints = 21;

/// Parent of each landmark in the hand skeleton (wrist is its own parent).
inline constexpr std::array<int, kNumKeypoints> kKeypointParent = {
    0, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19};

struct HandFrame {
  std::array<Vec3d, kNumKeypoints> keypoints{};
  Handedness handedness = Handedness::right;
  std::optional<Posed> wrist_pose;

  [[nodiscard]] const Vec3d& at(Keypoint k) const { return keypoints[static_cast<int>(k)]; }
  [[nodiscard]] Vec3d& at(Keypoint k) { return keypoints[static_cast<int>(k)]; }

  /// Finite keypoints and every bone length within [0.005, 0.12] m.
  void validate() const;
  [[nodiscard]] HandFrame transformed(const Posed& t) const;
};

enum class Gesture { whole_hand, finger_only };
enum class GripperCommand { open, closed };

[[nodiscard]] const char* to_string(Gesture g);
[[nodiscard]] const char* to_string(GripperCommand c);
[[nodiscard]] const char* to_string(Handedness h);

struct GripperFrame {
  Posed pose;
  GripperCommand command = GripperCommand::open;
  std::optional<double> width;
};

struct GripperTrajectory {
  std::vector<GripperFrame> frames;
  Gesture gesture = Gesture::whole_hand;
  Handedness handedness = Handedness::right;
  std::vector<bool> interpolated;  // per frame; empty means none
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t size() const { return frames.size(); }
  [[nodiscard]] std::vector<Posed> poses() const;
};

struct GestureExemplar {
  Gesture label;
  Eigen::VectorXd features;
};

/// Keypoints relative to the wrist, divided by the wrist->middle-MCP span,
/// flattened to 63 values.
[[nodiscard]] Eigen::VectorXd gesture_features(const HandFrame& frame);

[[nodiscard]] Gesture classify_gesture(const HandFrame& frame,
                                       std::span<const GestureExemplar> exemplars, int k = 3);

/// Palm-plane construction: origin at the wrist/index-MCP/ring-MCP centroid,
/// x toward the ring MCP, z along the palm normal times `sign`.
[[nodiscard]] Posed gripper_pose_wholehand(const Vec3d& wrist, const Vec3d& index_mcp,
                                           const Vec3d& ring_mcp, double d_z, int sign);
[[nodiscard]] Posed gripper_pose_wholehand(const HandFrame& frame, double d_z, int sign);

/// Pinch construction: origin between thumb and index tips, z along the
/// index distal chord.
[[nodiscard]] Posed gripper_pose_fingeronly(const Vec3d& index_tip, const Vec3d& index_mcp,
                                            const Vec3d& thumb_tip, const Vec3d& thumb_mcp);
[[nodiscard]] Posed gripper_pose_fingeronly(const HandFrame& frame);

/// Tracked object keypoints, 2D (pixels) or 3D (meters).
struct KeypointTrack {
  int dim = 3;
  std::vector<Eigen::MatrixXd> points;  // per frame: dim x K
  std::vector<std::vector<bool>> valid;  // per frame: K flags

  [[nodiscard]] std::size_t size() const { return points.size(); }
  void validate() const;
};

struct GripperStateOptions {
  int window = 5;
  double threshold = 0.005;
  int hysteresis = 3;
};

[[nodiscard]] std::vector<GripperCommand> detect_gripper_state(const KeypointTrack& track,
                                                               const GripperStateOptions& opts);

struct RetargetConfig {
  int k = 3;
  double d_z = 0.0;
  std::optional<int> sign;  // unset: object-facing rule, else handedness
  int window = 5;
  double threshold_3d = 0.005;
  double threshold_2d = 2.0;
  int hysteresis = 3;
  int max_gap = 3;
};

/// One gesture per clip (majority over frames), per-frame pose construction,
/// commands from the keypoint track. Degenerate frames become gaps that are
/// interpolated when at most `max_gap` long.
[[nodiscard]] GripperTrajectory retarget_trajectory(
    std::span<const HandFrame> frames, const KeypointTrack* track,
    std::span<const GestureExemplar> exemplars, const RetargetConfig& config,
    std::span<const Vec3d> object_centroids = {});

}  // namespace hoi

#endif  // HOI_HAND_HPP
