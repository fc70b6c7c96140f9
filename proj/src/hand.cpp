#include "hoi/hand.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace hoi {

const char* to_string(Gesture g) { return g == Gesture::whole_hand ? "whole_hand" : "finger_only"; }
const char* to_string(GripperCommand c) { return c == GripperCommand::open ? "open" : "closed"; }
const char* to_string(Handedness h) { return h == Handedness::left ? "left" : "right"; }

void HandFrame::validate() const {
  for (const Vec3d& k : keypoints) {
    if (!k.allFinite()) throw Error("hand keypoint is not finite");
  }
  for (int i = 1; i < kNumKeypoints; ++i) {
    const double len = (keypoints[i] - keypoints[kKeypointParent[i]]).norm();
    if (len < 0.005 || len > 0.12) {
      throw Error("hand bone length " + std::to_string(len) + " m outside [0.005, 0.12] at joint " +
                  std::to_string(i));
    }
  }
}

HandFrame HandFrame::transformed(const Posed& t) const {
  HandFrame out = *this;
  for (Vec3d& k : out.keypoints) k = t * k;
  if (wrist_pose) out.wrist_pose = t * *wrist_pose;
  return out;
}

std::vector<Posed> GripperTrajectory::poses() const {
  std::vector<Posed> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.pose);
  return out;
}

Eigen::VectorXd gesture_features(const HandFrame& frame) {
  const Vec3d& w = frame.at(Keypoint::wrist);
  const double span = (frame.at(Keypoint::middle_mcp) - w).norm();
  if (!(span > 1e-9)) throw Error("hand span is zero");
  Eigen::VectorXd f(3 * kNumKeypoints);
  for (int i = 0; i < kNumKeypoints; ++i) f.segment<3>(3 * i) = (frame.keypoints[i] - w) / span;
  return f;
}

namespace {

void check_exemplars(std::span<const GestureExemplar> exemplars, int k) {
  if (exemplars.empty()) throw Error("gesture exemplar set is empty");
  if (k < 1 || static_cast<std::size_t>(k) > exemplars.size()) {
    throw Error("k must be in [1, number of exemplars]");
  }
  const bool has_whole = std::any_of(exemplars.begin(), exemplars.end(),
                                     [](const auto& e) { return e.label == Gesture::whole_hand; });
  const bool has_finger = std::any_of(exemplars.begin(), exemplars.end(),
                                      [](const auto& e) { return e.label == Gesture::finger_only; });
  if (!has_whole || !has_finger) throw Error("gesture exemplars must cover both labels");
}

}  // namespace

Gesture classify_gesture(const HandFrame& frame, std::span<const GestureExemplar> exemplars,
                         int k) {
  check_exemplars(exemplars, k);

  const Eigen::VectorXd f = gesture_features(frame);
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(exemplars.size());
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    if (exemplars[i].features.size() != f.size()) throw Error("exemplar feature size mismatch");
    d.emplace_back((exemplars[i].features - f).squaredNorm(), i);
  }
  std::partial_sort(d.begin(), d.begin() + k, d.end());

  int whole = 0;
  for (int i = 0; i < k; ++i) whole += exemplars[d[i].second].label == Gesture::whole_hand;
  const int finger = k - whole;
  if (whole == finger) return exemplars[d[0].second].label;  // even k tie: nearest wins
  return whole > finger ? Gesture::whole_hand : Gesture::finger_only;
}

Posed gripper_pose_wholehand(const Vec3d& w, const Vec3d& i, const Vec3d& r, double d_z,
                             int sign) {
  const Vec3d vx = r - w;
  const Vec3d vz = (i - w).cross(r - w);
  if (vz.norm() <= 1e-8 || vx.norm() <= 1e-12) throw Error("degenerate palm");
  if (sign != 1 && sign != -1) throw Error("palm normal sign must be +1 or -1");

  const Vec3d x = vx.normalized();
  Vec3d z = (static_cast<double>(sign) * vz).normalized();
  z = (z - z.dot(x) * x).normalized();
  const Vec3d y = z.cross(x);

  Mat3d m;
  m << x, y, z;
  const Vec3d o = (w + i + r) / 3.0;
  return Posed(Rot3d::unchecked(m), o + d_z * z);
}

Posed gripper_pose_wholehand(const HandFrame& frame, double d_z, int sign) {
  return gripper_pose_wholehand(frame.at(Keypoint::wrist), frame.at(Keypoint::index_mcp),
                                frame.at(Keypoint::ring_mcp), d_z, sign);
}

Posed gripper_pose_fingeronly(const Vec3d& index_tip, const Vec3d& index_mcp,
                              const Vec3d& thumb_tip, const Vec3d& thumb_mcp) {
  const Vec3d vz = index_tip - index_mcp;
  const Vec3d vy = vz.cross(index_mcp - thumb_mcp);
  if (vz.norm() <= 1e-12 || vy.norm() <= 1e-8) throw Error("degenerate finger axes");

  const Vec3d z = vz.normalized();
  Vec3d y = vy.normalized();
  y = (y - y.dot(z) * z).normalized();
  const Vec3d x = y.cross(z);

  Mat3d m;
  m << x, y, z;
  return Posed(Rot3d::unchecked(m), (thumb_tip + index_tip) / 2.0);
}

Posed gripper_pose_fingeronly(const HandFrame& frame) {
  return gripper_pose_fingeronly(frame.at(Keypoint::index_tip), frame.at(Keypoint::index_mcp),
                                 frame.at(Keypoint::thumb_tip), frame.at(Keypoint::thumb_mcp));
}

void KeypointTrack::validate() const {
  if (dim != 2 && dim != 3) throw Error("keypoint track dimension must be 2 or 3");
  if (points.size() != valid.size()) throw Error("keypoint track validity length mismatch");
  for (std::size_t t = 0; t < points.size(); ++t) {
    if (points[t].rows() != dim) throw Error("inconsistent keypoint dimensionality");
    if (points[t].cols() != points.front().cols()) throw Error("inconsistent keypoint count");
    if (valid[t].size() != static_cast<std::size_t>(points[t].cols())) {
      throw Error("keypoint validity flags do not match keypoint count");
    }
  }
}

std::vector<GripperCommand> detect_gripper_state(const KeypointTrack& track,
                                                 const GripperStateOptions& opts) {
  if (opts.window < 2) throw Error("gripper state window must be at least 2 frames");
  if (!(opts.threshold > 0)) throw Error("gripper state threshold must be positive");
  track.validate();

  const std::size_t n = track.size();
  std::vector<GripperCommand> raw(n, GripperCommand::open);
  const auto w = static_cast<std::size_t>(opts.window);
  for (std::size_t t = 0; t < n; ++t) {
    if (t == 0) continue;  // first frame defaults to open
    raw[t] = raw[t - 1];
    if (t + 1 < w) continue;  // no full window yet

    // Per-keypoint mean step displacement over the window; stationary
    // keypoints never pull the statistic down.
    double peak = -1;
    const auto& first = track.points[t + 1 - w];
    for (Eigen::Index k = 0; k < first.cols(); ++k) {
      double sum = 0;
      int count = 0;
      for (std::size_t s = t + 1 - w + 1; s <= t; ++s) {
        if (!track.valid[s - 1][k] || !track.valid[s][k]) continue;
        sum += (track.points[s].col(k) - track.points[s - 1].col(k)).norm();
        ++count;
      }
      if (count > 0) peak = std::max(peak, sum / count);
    }
    if (peak < 0) continue;  // nothing valid in the window: carry over
    raw[t] = peak > opts.threshold ? GripperCommand::closed : GripperCommand::open;
  }

  // Offline hysteresis: a run shorter than `hysteresis` frames keeps the
  // previously accepted state.
  std::vector<GripperCommand> out = raw;
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start;
    while (end < n && raw[end] == raw[start]) ++end;
    if (start > 0 && static_cast<int>(end - start) < opts.hysteresis) {
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(start),
                out.begin() + static_cast<std::ptrdiff_t>(end), out[start - 1]);
    }
    start = end;
  }
  return out;
}

namespace {

int palm_sign(std::span<const HandFrame> frames, const RetargetConfig& config,
              std::span<const Vec3d> object_centroids) {
  if (config.sign) return *config.sign;
  const int by_hand = frames.front().handedness == Handedness::right ? 1 : -1;
  if (object_centroids.size() != frames.size()) return by_hand;

  int votes = 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    try {
      const Posed p = gripper_pose_wholehand(frames[t], 0.0, 1);
      const double d = p.rot.col(2).dot(object_centroids[t] - p.trans);
      votes += d > 0 ? 1 : (d < 0 ? -1 : 0);
    } catch (const Error&) {
    }
  }
  if (votes == 0) return by_hand;
  return votes > 0 ? 1 : -1;
}

}  // namespace

GripperTrajectory retarget_trajectory(std::span<const HandFrame> frames, const KeypointTrack* track,
                                      std::span<const GestureExemplar> exemplars,
                                      const RetargetConfig& config,
                                      std::span<const Vec3d> object_centroids) {
  if (frames.empty()) throw Error("retargeting needs at least one frame");
  const std::size_t n = frames.size();

  GripperTrajectory out;
  out.handedness = frames.front().handedness;

  int whole_votes = 0, finger_votes = 0;
  if (exemplars.empty()) {
    out.warnings.emplace_back("no gesture exemplars; assuming whole_hand");
  } else {
    check_exemplars(exemplars, config.k);
    for (const HandFrame& f : frames) {
      try {
        (classify_gesture(f, exemplars, config.k) == Gesture::whole_hand ? whole_votes
                                                                         : finger_votes)++;
      } catch (const Error&) {
        // zero hand span; the frame does not vote
      }
    }
  }
  out.gesture = finger_votes > whole_votes ? Gesture::finger_only : Gesture::whole_hand;
  const int sign = palm_sign(frames, config, object_centroids);

  std::vector<std::optional<Posed>> poses(n);
  out.frames.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    try {
      poses[t] = out.gesture == Gesture::whole_hand
                     ? gripper_pose_wholehand(frames[t], config.d_z, sign)
                     : gripper_pose_fingeronly(frames[t]);
    } catch (const Error&) {
    }
    const double width =
        (frames[t].at(Keypoint::thumb_tip) - frames[t].at(Keypoint::index_tip)).norm();
    out.frames[t].width = std::clamp(width, 0.0, 0.12);
  }

  // Fill gaps.
  out.interpolated.assign(n, false);
  std::size_t t = 0;
  while (t < n) {
    if (poses[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < n && !poses[end]) ++end;
    const std::size_t len = end - t;
    if (static_cast<int>(len) > config.max_gap || len == n) {
      throw Error("degenerate gap of " + std::to_string(len) + " frames starting at frame " +
                  std::to_string(t));
    }
    for (std::size_t g = t; g < end; ++g) {
      if (t == 0) {
        poses[g] = poses[end];
      } else if (end == n) {
        poses[g] = poses[t - 1];
      } else {
        const double s = static_cast<double>(g - t + 1) / static_cast<double>(len + 1);
        poses[g] = interpolate(*poses[t - 1], *poses[end], s);
      }
      out.interpolated[g] = true;
    }
    out.warnings.push_back("interpolated " + std::to_string(len) + " degenerate frame(s) at " +
                           std::to_string(t));
    t = end;
  }
  for (std::size_t i = 0; i < n; ++i) out.frames[i].pose = *poses[i];

  if (track != nullptr && track->size() > 0) {
    if (track->size() != n) throw Error("keypoint track length differs from hand stream");
    GripperStateOptions opts{config.window,
                             track->dim == 3 ? config.threshold_3d : config.threshold_2d,
                             config.hysteresis};
    const auto cmds = detect_gripper_state(*track, opts);
    for (std::size_t i = 0; i < n; ++i) out.frames[i].command = cmds[i];
  } else {
    out.warnings.emplace_back("no keypoint track; gripper held open");
  }
  return out;
}

}  // namespace hoi
